//! Linear coupled bulk/surface solves with variable coefficients, and the
//! systems derived from them around a state trajectory: the linearized
//! (tangent) system, the backward adjoint system, and the second-derivative
//! system.
//!
//! Step `s` of the forward sweep solves
//! `(M/dt + K + W c₁ + S c₂) w^{s+1} = M w^s / dt + W f_s + S f_{Γ,s}`
//! with the coefficients of slot `s`. The step matrices are symmetric, so
//! the backward sweep
//! `(M/dt + K + W c₁ + S c₂) p_s = M p_{s+1} / dt + W a_s + S a_{Γ,s}`
//! is the exact transpose of the forward one.

use alloc::vec;
use alloc::vec::Vec;

use crate::fields::{ControlPair, FieldPair, Trajectory};
use crate::geometry::Discretization;
use crate::objective::ControlProblem;
use crate::potential::Potential;
use crate::sparse::StepFactor;
use crate::{Error, Result};

/// Reaction coefficients `c₁` (bulk) and `c₂` (boundary cycle), one slot per
/// time step, laid out like a [`ControlPair`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFields(ControlPair);

impl CoefficientFields {
    pub fn zeros(disc: &Discretization) -> Self {
        Self(ControlPair::zeros(disc))
    }

    pub fn constant(disc: &Discretization, c1: f64, c2: f64) -> Self {
        Self(ControlPair::constant(disc, c1, c2))
    }

    pub fn from_parts(disc: &Discretization, bulk: Vec<f64>, surface: Vec<f64>) -> Result<Self> {
        let c = ControlPair::from_parts(disc, bulk, surface)?;
        if !c.is_finite() {
            return Err(Error::InvalidArgument("coefficients must be finite".into()));
        }
        Ok(Self(c))
    }

    /// `c₁ = f''(y^{s+1})`, `c₂ = g''(y_Γ^{s+1})`: the coefficients at the
    /// implicit point of each Newton step.
    pub fn from_state(disc: &Discretization, state: &Trajectory, pf: &Potential, pg: &Potential) -> Result<Self> {
        derivative_fields(disc, state, pf, pg, 2).map(Self)
    }

    pub fn bulk_at(&self, s: usize) -> &[f64] {
        self.0.bulk_at(s)
    }

    pub fn surface_at(&self, s: usize) -> &[f64] {
        self.0.surface_at(s)
    }
}

fn derivative_fields(disc: &Discretization, state: &Trajectory, pf: &Potential, pg: &Potential, order: usize) -> Result<ControlPair> {
    let steps = disc.time().steps();
    Error::check_len(steps + 1, state.levels())?;
    Error::check_len(disc.grid().num_nodes(), state.nodes())?;
    let mut c = ControlPair::zeros(disc);
    for s in 0..steps {
        let y = state.level(s + 1);
        for (c, &v) in c.bulk_at_mut(s).iter_mut().zip(y) {
            *c = pf.eval(order, v)?;
        }
        for (c, &g) in c.surface_at_mut(s).iter_mut().zip(disc.grid().boundary_cycle()) {
            *c = pg.eval(order, y[g])?;
        }
    }
    Ok(c)
}

/// Factored step matrices for one set of coefficients.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    disc: &'a Discretization,
    factors: Vec<StepFactor>,
}

impl<'a> Propagator<'a> {
    pub fn new(disc: &'a Discretization, coeffs: &CoefficientFields) -> Result<Self> {
        coeffs.0.check_shape(disc)?;
        let factors = (0..disc.time().steps())
            .map(|s| disc.pattern().factor(&disc.shift(coeffs.bulk_at(s), coeffs.surface_at(s)), s + 1))
            .collect::<Result<_>>()?;
        Ok(Self { disc, factors })
    }

    /// Forward sweep from `init` driven by `source`.
    pub fn forward(&self, source: &ControlPair, init: &[f64]) -> Result<Trajectory> {
        source.check_shape(self.disc)?;
        let nodes = self.disc.grid().num_nodes();
        Error::check_len(nodes, init.len())?;
        let mass = &self.disc.ops().mass;
        let dt = self.disc.dt();
        let mut traj = Trajectory::zeros(self.factors.len() + 1, nodes);
        traj.level_mut(0).copy_from_slice(init);
        let mut rhs = vec![0.0; nodes];
        for (s, factor) in self.factors.iter().enumerate() {
            self.disc.load(source.bulk_at(s), source.surface_at(s), &mut rhs);
            for ((r, &m), &w) in rhs.iter_mut().zip(mass).zip(traj.level(s)) {
                *r += m * w / dt;
            }
            factor.solve_in_place(&mut rhs)?;
            traj.level_mut(s + 1).copy_from_slice(&rhs);
        }
        Ok(traj)
    }

    /// Backward sweep from `terminal` (stored at level `m`) driven by the
    /// per-slot `loads`; level `s < m` pairs with control slot `s`.
    pub fn backward(&self, loads: &ControlPair, terminal: &[f64]) -> Result<Trajectory> {
        loads.check_shape(self.disc)?;
        let nodes = self.disc.grid().num_nodes();
        Error::check_len(nodes, terminal.len())?;
        let mass = &self.disc.ops().mass;
        let dt = self.disc.dt();
        let m = self.factors.len();
        let mut traj = Trajectory::zeros(m + 1, nodes);
        traj.level_mut(m).copy_from_slice(terminal);
        let mut rhs = vec![0.0; nodes];
        for s in (0..m).rev() {
            self.disc.load(loads.bulk_at(s), loads.surface_at(s), &mut rhs);
            for ((r, &mm), &p) in rhs.iter_mut().zip(mass).zip(traj.level(s + 1)) {
                *r += mm * p / dt;
            }
            self.factors[s].solve_in_place(&mut rhs)?;
            traj.level_mut(s).copy_from_slice(&rhs);
        }
        Ok(traj)
    }
}

/// Solves the linear system with the given coefficients, source and initial
/// data.
pub fn solve_linear(disc: &Discretization, coeffs: &CoefficientFields, source: &ControlPair, init: &FieldPair) -> Result<Trajectory> {
    Propagator::new(disc, coeffs)?.forward(source, &init.bulk)
}

/// Backward counterpart of [`solve_linear`] with terminal data.
pub fn solve_linear_backward(disc: &Discretization, coeffs: &CoefficientFields, loads: &ControlPair, terminal: &FieldPair) -> Result<Trajectory> {
    Propagator::new(disc, coeffs)?.backward(loads, &terminal.bulk)
}

/// Linearization of the control-to-state map around one state trajectory.
/// Holds the factored step matrices, so tangent, adjoint and
/// second-derivative solves reuse them.
#[derive(Debug, Clone)]
pub struct Linearization<'a> {
    propagator: Propagator<'a>,
    third: ControlPair,
}

impl<'a> Linearization<'a> {
    pub fn new(disc: &'a Discretization, state: &Trajectory, pf: &Potential, pg: &Potential) -> Result<Self> {
        let coeffs = CoefficientFields::from_state(disc, state, pf, pg)?;
        let third = derivative_fields(disc, state, pf, pg, 3)?;
        Ok(Self { propagator: Propagator::new(disc, &coeffs)?, third })
    }

    pub fn disc(&self) -> &'a Discretization {
        self.propagator.disc
    }

    /// `f'''(y^{s+1})` per bulk node and `g'''(y_Γ^{s+1})` per boundary node.
    pub fn third_derivatives(&self) -> &ControlPair {
        &self.third
    }

    pub fn propagator(&self) -> &Propagator<'a> {
        &self.propagator
    }

    /// `ξ = D S(u) h`: tangent trajectory for a control direction.
    pub fn tangent(&self, direction: &ControlPair) -> Result<Trajectory> {
        let zero = vec![0.0; self.disc().grid().num_nodes()];
        self.propagator.forward(direction, &zero)
    }

    /// `η = D² S(u)[h, k]` given the tangents `φ = DS(u)h` and `ψ = DS(u)k`.
    pub fn second_derivative(&self, phi: &Trajectory, psi: &Trajectory) -> Result<Trajectory> {
        let disc = self.disc();
        let steps = disc.time().steps();
        for t in [phi, psi] {
            Error::check_len(steps + 1, t.levels())?;
        }
        let mut source = ControlPair::zeros(disc);
        for s in 0..steps {
            let (a, b) = (phi.level(s + 1), psi.level(s + 1));
            for (i, v) in source.bulk_at_mut(s).iter_mut().enumerate() {
                *v = -self.third.bulk_at(s)[i] * a[i] * b[i];
            }
            for (j, (v, &g)) in source.surface_at_mut(s).iter_mut().zip(disc.grid().boundary_cycle()).enumerate() {
                *v = -self.third.surface_at(s)[j] * a[g] * b[g];
            }
        }
        let zero = vec![0.0; disc.grid().num_nodes()];
        self.propagator.forward(&source, &zero)
    }

    /// Adjoint state for the tracking cost of `problem` at `state`.
    ///
    /// Level `m` holds the terminal value `β₃ (y(T) − z_T)`; level `s < m`
    /// pairs with control slot `s`. The boundary adjoint is the trace of the
    /// bulk one.
    pub fn adjoint(&self, problem: &ControlProblem, state: &Trajectory) -> Result<Trajectory> {
        let disc = self.disc();
        let steps = disc.time().steps();
        Error::check_len(steps + 1, state.levels())?;
        let w = problem.weights();
        let targets = problem.targets();
        let mut loads = ControlPair::zeros(disc);
        for s in 0..steps {
            let y = state.level(s + 1);
            for ((l, &v), &z) in loads.bulk_at_mut(s).iter_mut().zip(y).zip(targets.z_q_at(s)) {
                *l = w.beta1 * (v - z);
            }
            for ((l, &g), &z) in loads.surface_at_mut(s).iter_mut().zip(disc.grid().boundary_cycle()).zip(targets.z_sigma_at(s)) {
                *l = w.beta2 * (y[g] - z);
            }
        }
        let terminal: Vec<f64> = state.last().iter().zip(targets.z_t()).map(|(y, z)| w.beta3 * (y - z)).collect();
        self.propagator.backward(&loads, &terminal)
    }
}

/// Tangent of the control-to-state map at `state` in direction `direction`.
pub fn solve_linearized(disc: &Discretization, state: &Trajectory, pf: &Potential, pg: &Potential, direction: &ControlPair) -> Result<Trajectory> {
    Linearization::new(disc, state, pf, pg)?.tangent(direction)
}

/// Adjoint state of `problem` at `state`.
pub fn solve_adjoint(problem: &ControlProblem, state: &Trajectory) -> Result<Trajectory> {
    Linearization::new(problem.disc(), state, problem.pf(), problem.pg())?.adjoint(problem, state)
}

/// Second derivative of the control-to-state map for tangents `phi`, `psi`.
pub fn solve_second_derivative(
    disc: &Discretization,
    state: &Trajectory,
    pf: &Potential,
    pg: &Potential,
    phi: &Trajectory,
    psi: &Trajectory,
) -> Result<Trajectory> {
    Linearization::new(disc, state, pf, pg)?.second_derivative(phi, psi)
}
