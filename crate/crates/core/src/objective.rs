//! The tracking cost, its exact discrete gradient and curvature, and the
//! first/second-order optimality diagnostics.
//!
//! Space-time integrals over `Q` and `Σ` use the right-endpoint rule of the
//! implicit Euler scheme: state level `s + 1` and control slot `s` carry
//! weight `dt`. With this rule the reduced gradient `(p + β₅ u, p_Γ + β₆ u_Γ)`
//! is the exact ℋ-gradient of the discrete reduced cost.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{ControlPair, FieldPair, Trajectory};
use crate::geometry::{weighted_dot, Discretization};
use crate::linear::Linearization;
use crate::potential::Potential;
use crate::state::{solve_state, NewtonOptions, StateSolution};
use crate::{Error, Result};

/// Cost weights. The terminal boundary weight always equals the terminal
/// bulk weight, so it is not stored separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub beta5: f64,
    pub beta6: f64,
}

impl Weights {
    pub fn beta4(&self) -> f64 {
        self.beta3
    }

    fn validate(&self) -> Result<()> {
        let all = [self.beta1, self.beta2, self.beta3, self.beta5, self.beta6];
        if all.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::param("cost weights must be finite and nonnegative"));
        }
        if all.iter().all(|&b| b == 0.0) {
            return Err(Error::param("at least one cost weight must be positive"));
        }
        Ok(())
    }
}

impl Default for Weights {
    fn default() -> Self {
        Self { beta1: 1.0, beta2: 1.0, beta3: 1.0, beta5: 1e-2, beta6: 1e-2 }
    }
}

/// Tracking targets: `z_Q` and `z_Σ` per step (paired with state level
/// `s + 1`) and the terminal `z_T`, whose trace is the boundary terminal
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    tracking: ControlPair,
    z_t: Vec<f64>,
}

impl Targets {
    pub fn new(disc: &Discretization, z_q: Vec<f64>, z_sigma: Vec<f64>, z_t: Vec<f64>) -> Result<Self> {
        Error::check_len(disc.grid().num_nodes(), z_t.len())?;
        let tracking = ControlPair::from_parts(disc, z_q, z_sigma)?;
        Ok(Self { tracking, z_t })
    }

    pub fn constant(disc: &Discretization, value: f64) -> Self {
        Self { tracking: ControlPair::constant(disc, value, value), z_t: alloc::vec![value; disc.grid().num_nodes()] }
    }

    /// `bulk(x, y, t)` sampled at `t_{s+1}` gives `z_Q`, its boundary values
    /// give `z_Σ`, and `bulk(x, y, T)` gives `z_T`.
    pub fn from_fn(disc: &Discretization, bulk: impl Fn(f64, f64, f64) -> f64) -> Self {
        let tracking = ControlPair::from_fn(disc, &bulk, &bulk);
        let t = disc.time().final_time();
        let z_t = disc.grid().coords().iter().map(|&[x, y]| bulk(x, y, t)).collect();
        Self { tracking, z_t }
    }

    pub fn z_q_at(&self, s: usize) -> &[f64] {
        self.tracking.bulk_at(s)
    }

    pub fn z_sigma_at(&self, s: usize) -> &[f64] {
        self.tracking.surface_at(s)
    }

    pub fn z_t(&self) -> &[f64] {
        &self.z_t
    }

    pub fn z_gamma_t(&self, disc: &Discretization) -> Vec<f64> {
        disc.grid().trace(&self.z_t)
    }
}

/// The discrete optimal control problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    disc: Discretization,
    pf: Potential,
    pg: Potential,
    weights: Weights,
    targets: Targets,
    lower: ControlPair,
    upper: ControlPair,
    init: FieldPair,
    newton: NewtonOptions,
}

#[allow(clippy::too_many_arguments)]
impl ControlProblem {
    pub fn new(
        disc: Discretization,
        pf: Potential,
        pg: Potential,
        weights: Weights,
        targets: Targets,
        lower: ControlPair,
        upper: ControlPair,
        init: FieldPair,
    ) -> Result<Self> {
        weights.validate()?;
        lower.check_shape(&disc)?;
        upper.check_shape(&disc)?;
        Error::check_len(disc.grid().num_nodes(), init.bulk.len())?;
        let unordered = lower.bulk.iter().zip(&upper.bulk).chain(lower.surface.iter().zip(&upper.surface)).position(|(l, u)| !(l <= u));
        if let Some(pos) = unordered {
            return Err(Error::param(format!("lower bound exceeds upper bound at entry {pos}")));
        }
        Ok(Self { disc, pf, pg, weights, targets, lower, upper, init, newton: NewtonOptions::default() })
    }

    /// Constant box `[u1, u2]` on `Q` and `[u1_gamma, u2_gamma]` on `Σ`.
    pub fn constant_box(disc: &Discretization, u1: f64, u2: f64, u1_gamma: f64, u2_gamma: f64) -> (ControlPair, ControlPair) {
        (ControlPair::constant(disc, u1, u1_gamma), ControlPair::constant(disc, u2, u2_gamma))
    }

    pub fn with_newton(mut self, newton: NewtonOptions) -> Self {
        self.newton = newton;
        self
    }

    pub fn disc(&self) -> &Discretization {
        &self.disc
    }

    pub fn pf(&self) -> &Potential {
        &self.pf
    }

    pub fn pg(&self) -> &Potential {
        &self.pg
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn lower(&self) -> &ControlPair {
        &self.lower
    }

    pub fn upper(&self) -> &ControlPair {
        &self.upper
    }

    pub fn init(&self) -> &FieldPair {
        &self.init
    }

    pub fn newton(&self) -> &NewtonOptions {
        &self.newton
    }

    pub fn solve_state(&self, control: &ControlPair) -> Result<StateSolution> {
        solve_state(&self.disc, &self.pf, &self.pg, control, &self.init, &self.newton)
    }

    /// Nodewise clip into the box.
    pub fn project(&self, control: &ControlPair) -> ControlPair {
        let mut out = control.clone();
        let clip = |v: &mut [f64], lo: &[f64], hi: &[f64]| {
            for ((v, &l), &h) in v.iter_mut().zip(lo).zip(hi) {
                *v = v.max(l).min(h);
            }
        };
        clip(&mut out.bulk, &self.lower.bulk, &self.upper.bulk);
        clip(&mut out.surface, &self.lower.surface, &self.upper.surface);
        out
    }

    pub fn is_feasible(&self, control: &ControlPair) -> bool {
        self.project(control) == *control
    }

    /// The cost functional at a state/control pair.
    pub fn cost(&self, state: &Trajectory, control: &ControlPair) -> Result<f64> {
        let disc = &self.disc;
        let grid = disc.grid();
        let steps = disc.time().steps();
        Error::check_len(steps + 1, state.levels())?;
        Error::check_len(grid.num_nodes(), state.nodes())?;
        control.check_shape(disc)?;
        let w = &self.weights;
        let dt = disc.dt();
        let (bw, sw) = (grid.bulk_weights(), grid.surface_weights());
        let cycle = grid.boundary_cycle();

        let mut bulk_track = 0.0;
        let mut surf_track = 0.0;
        for s in 0..steps {
            let y = state.level(s + 1);
            bulk_track += y.iter().zip(self.targets.z_q_at(s)).zip(bw).map(|((y, z), w)| w * (y - z) * (y - z)).sum::<f64>();
            surf_track += cycle.iter().zip(self.targets.z_sigma_at(s)).zip(sw).map(|((&g, z), w)| w * (y[g] - z) * (y[g] - z)).sum::<f64>();
        }
        let y_t = state.last();
        let term_bulk: f64 = y_t.iter().zip(self.targets.z_t()).zip(bw).map(|((y, z), w)| w * (y - z) * (y - z)).sum();
        let term_surf: f64 = cycle.iter().zip(sw).map(|(&g, w)| {
            let d = y_t[g] - self.targets.z_t()[g];
            w * d * d
        }).sum();
        let mut ctrl_bulk = 0.0;
        let mut ctrl_surf = 0.0;
        for s in 0..steps {
            ctrl_bulk += weighted_dot(bw, control.bulk_at(s), control.bulk_at(s));
            ctrl_surf += weighted_dot(sw, control.surface_at(s), control.surface_at(s));
        }
        Ok(0.5
            * (w.beta1 * dt * bulk_track
                + w.beta2 * dt * surf_track
                + w.beta3 * term_bulk
                + w.beta4() * term_surf
                + w.beta5 * dt * ctrl_bulk
                + w.beta6 * dt * ctrl_surf))
    }

    /// Reduced cost `𝒥(u) = J(S(u), u)`.
    pub fn reduced_cost(&self, control: &ControlPair) -> Result<f64> {
        let state = self.solve_state(control)?;
        self.cost(&state.trajectory, control)
    }

    /// `(p + β₅ u, p_Γ + β₆ u_Γ)` slot by slot.
    pub fn gradient(&self, adjoint: &Trajectory, control: &ControlPair) -> Result<ControlPair> {
        control.check_shape(&self.disc)?;
        let steps = self.disc.time().steps();
        Error::check_len(steps + 1, adjoint.levels())?;
        let cycle = self.disc.grid().boundary_cycle();
        let mut g = control.clone();
        for s in 0..steps {
            let p = adjoint.level(s);
            for (gv, &pv) in g.bulk_at_mut(s).iter_mut().zip(p) {
                *gv = pv + self.weights.beta5 * *gv;
            }
            for (gv, &node) in g.surface_at_mut(s).iter_mut().zip(cycle) {
                *gv = p[node] + self.weights.beta6 * *gv;
            }
        }
        Ok(g)
    }

    /// Solves state and adjoint and assembles cost and gradient.
    pub fn evaluate(&self, control: &ControlPair) -> Result<Evaluation<'_>> {
        let state = self.solve_state(control)?;
        let cost = self.cost(&state.trajectory, control)?;
        let linearization = Linearization::new(&self.disc, &state.trajectory, &self.pf, &self.pg)?;
        let adjoint = linearization.adjoint(self, &state.trajectory)?;
        let gradient = self.gradient(&adjoint, control)?;
        Ok(Evaluation { control: control.clone(), state, cost, linearization, adjoint, gradient })
    }

    /// Derivative of the cost along a tangent `xi = DS(u) h`, assembled from
    /// the tracking residuals.
    pub fn directional_derivative(&self, state: &Trajectory, control: &ControlPair, h: &ControlPair, xi: &Trajectory) -> Result<f64> {
        let grid = self.disc.grid();
        let steps = self.disc.time().steps();
        Error::check_len(steps + 1, xi.levels())?;
        let w = &self.weights;
        let dt = self.disc.dt();
        let (bw, sw) = (grid.bulk_weights(), grid.surface_weights());
        let cycle = grid.boundary_cycle();
        let mut total = 0.0;
        for s in 0..steps {
            let (y, x) = (state.level(s + 1), xi.level(s + 1));
            let bulk: f64 = y.iter().zip(self.targets.z_q_at(s)).zip(x).zip(bw).map(|(((y, z), x), w)| w * (y - z) * x).sum();
            let surf: f64 = cycle.iter().zip(self.targets.z_sigma_at(s)).zip(sw).map(|((&g, z), w)| w * (y[g] - z) * x[g]).sum();
            total += dt * (w.beta1 * bulk + w.beta2 * surf);
        }
        let (y, x) = (state.last(), xi.last());
        let z = self.targets.z_t();
        let term_bulk: f64 = (0..y.len()).map(|i| bw[i] * (y[i] - z[i]) * x[i]).sum();
        let term_surf: f64 = cycle.iter().zip(sw).map(|(&g, w)| w * (y[g] - z[g]) * x[g]).sum();
        total += w.beta3 * term_bulk + w.beta4() * term_surf;
        for s in 0..steps {
            total += dt * w.beta5 * weighted_dot(bw, control.bulk_at(s), h.bulk_at(s));
            total += dt * w.beta6 * weighted_dot(sw, control.surface_at(s), h.surface_at(s));
        }
        Ok(total)
    }

    /// Symmetric second-derivative form `D²𝒥[h, k]` given the tangents
    /// `phi = DS h` and `psi = DS k`.
    pub fn curvature_form(
        &self,
        eval: &Evaluation<'_>,
        h: &ControlPair,
        phi: &Trajectory,
        k: &ControlPair,
        psi: &Trajectory,
    ) -> f64 {
        let grid = self.disc.grid();
        let steps = self.disc.time().steps();
        let w = &self.weights;
        let dt = self.disc.dt();
        let (bw, sw) = (grid.bulk_weights(), grid.surface_weights());
        let cycle = grid.boundary_cycle();
        let third = eval.linearization.third_derivatives();
        let mut total = 0.0;
        for s in 0..steps {
            let p = eval.adjoint.level(s);
            let (a, b) = (phi.level(s + 1), psi.level(s + 1));
            let f3 = third.bulk_at(s);
            let bulk: f64 = (0..a.len()).map(|i| bw[i] * (w.beta1 - p[i] * f3[i]) * a[i] * b[i]).sum();
            let g3 = third.surface_at(s);
            let surf: f64 = cycle.iter().enumerate().map(|(j, &g)| sw[j] * (w.beta2 - p[g] * g3[j]) * a[g] * b[g]).sum();
            total += dt * (bulk + surf);
            total += dt * w.beta5 * weighted_dot(bw, h.bulk_at(s), k.bulk_at(s));
            total += dt * w.beta6 * weighted_dot(sw, h.surface_at(s), k.surface_at(s));
        }
        let (a, b) = (phi.last(), psi.last());
        total += w.beta3 * weighted_dot(bw, a, b);
        total += w.beta4() * cycle.iter().zip(sw).map(|(&g, s)| s * a[g] * b[g]).sum::<f64>();
        total
    }

    /// `D²𝒥(u)[h, h]`.
    pub fn curvature(&self, eval: &Evaluation<'_>, direction: &ControlPair) -> Result<f64> {
        let phi = eval.linearization.tangent(direction)?;
        Ok(self.curvature_form(eval, direction, &phi, direction, &phi))
    }

    /// ℋ-norm of `u − P(u − ∇𝒥(u))`.
    pub fn stationarity(&self, control: &ControlPair, gradient: &ControlPair) -> f64 {
        let step = self.project(&control.add_scaled(-1.0, gradient));
        control.add_scaled(-1.0, &step).norm(&self.disc)
    }

    /// Largest nodewise violation of `u = clip(−p/β₅)` and
    /// `u_Γ = clip(−p_Γ/β₆)`.
    pub fn projection_residual(&self, eval: &Evaluation<'_>) -> Result<f64> {
        let w = &self.weights;
        if !(w.beta5 > 0.0 && w.beta6 > 0.0) {
            return Err(Error::Unsupported("projection formula needs beta5 > 0 and beta6 > 0".into()));
        }
        let u = &eval.control;
        let cycle = self.disc.grid().boundary_cycle();
        let mut worst: f64 = 0.0;
        for s in 0..self.disc.time().steps() {
            let p = eval.adjoint.level(s);
            let (lo, hi) = (self.lower.bulk_at(s), self.upper.bulk_at(s));
            for (i, &v) in u.bulk_at(s).iter().enumerate() {
                worst = worst.max((v - (-p[i] / w.beta5).max(lo[i]).min(hi[i])).abs());
            }
            let (lo, hi) = (self.lower.surface_at(s), self.upper.surface_at(s));
            for (j, (&v, &g)) in u.surface_at(s).iter().zip(cycle).enumerate() {
                worst = worst.max((v - (-p[g] / w.beta6).max(lo[j]).min(hi[j])).abs());
            }
        }
        Ok(worst)
    }

    /// First- and second-order diagnostics at `control`.
    pub fn optimality_report(&self, control: &ControlPair, opts: &ReportOptions) -> Result<OptimalityReport> {
        let eval = self.evaluate(control)?;
        self.report_at(&eval, opts)
    }

    pub fn report_at(&self, eval: &Evaluation<'_>, opts: &ReportOptions) -> Result<OptimalityReport> {
        let disc = &self.disc;
        let grad = &eval.gradient;
        let grad_norm = grad.norm(disc);
        let tau = opts.tau.unwrap_or(1e-3 * grad_norm);
        let u = &eval.control;
        let grid = disc.grid();
        let dt = disc.dt();
        let (bw, sw) = (grid.bulk_weights(), grid.surface_weights());

        // strongly active set and its measure fraction
        let active_bulk: Vec<bool> = grad.bulk.iter().map(|g| g.abs() > tau).collect();
        let active_surf: Vec<bool> = grad.surface.iter().map(|g| g.abs() > tau).collect();
        let nb = grid.num_nodes();
        let ns = grid.num_boundary();
        let mut active_measure = 0.0;
        for (idx, &a) in active_bulk.iter().enumerate() {
            if a {
                active_measure += dt * bw[idx % nb];
            }
        }
        for (idx, &a) in active_surf.iter().enumerate() {
            if a {
                active_measure += dt * sw[idx % ns];
            }
        }
        let total_measure = disc.time().final_time() * (bw.iter().sum::<f64>() + sw.iter().sum::<f64>());

        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut samples = Vec::with_capacity(opts.directions);
        for id in 0..opts.directions {
            let mut h = ControlPair::zeros(disc);
            let mut draw = |v: &mut f64, active: bool, val: f64, lo: f64, hi: f64| {
                let r: f64 = rng.random_range(-1.0..1.0);
                *v = if active || (val == lo && val == hi) {
                    0.0
                } else if val == lo {
                    r.abs()
                } else if val == hi {
                    -r.abs()
                } else {
                    r
                };
            };
            for i in 0..h.bulk.len() {
                draw(&mut h.bulk[i], active_bulk[i], u.bulk[i], self.lower.bulk[i], self.upper.bulk[i]);
            }
            for i in 0..h.surface.len() {
                draw(&mut h.surface[i], active_surf[i], u.surface[i], self.lower.surface[i], self.upper.surface[i]);
            }
            let norm = h.norm(disc);
            if norm == 0.0 {
                continue;
            }
            h.scale(1.0 / norm);
            let curvature = self.curvature(eval, &h)?;
            samples.push(CurvatureSample { id, curvature, norm_sq: 1.0, ratio: curvature });
        }
        let delta = samples.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);

        Ok(OptimalityReport {
            cost: eval.cost,
            grad_norm,
            stationarity: self.stationarity(u, grad),
            tau,
            active_set_fraction: active_measure / total_measure,
            projection_residual: self.projection_residual(eval),
            curvature_samples: samples,
            delta,
            clamp_events: eval.state.diagnostics.clamp_events,
        })
    }
}

/// State, adjoint and gradient at one control, with the linearization kept
/// for further tangent solves.
#[derive(Debug, Clone)]
pub struct Evaluation<'a> {
    pub control: ControlPair,
    pub state: StateSolution,
    pub cost: f64,
    pub linearization: Linearization<'a>,
    pub adjoint: Trajectory,
    pub gradient: ControlPair,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    /// Threshold of the strongly active set; `None` uses `1e-3 · ‖∇𝒥‖`.
    pub tau: Option<f64>,
    /// Number of sampled critical-cone directions.
    pub directions: usize,
    pub seed: u64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { tau: None, directions: 32, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSample {
    pub id: usize,
    pub curvature: f64,
    pub norm_sq: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub cost: f64,
    pub grad_norm: f64,
    pub stationarity: f64,
    pub tau: f64,
    pub active_set_fraction: f64,
    pub projection_residual: Result<f64>,
    pub curvature_samples: Vec<CurvatureSample>,
    /// Smallest sampled curvature ratio: the empirical coercivity constant on
    /// the critical cone.
    pub delta: f64,
    pub clamp_events: usize,
}

impl OptimalityReport {
    /// A non-positive sampled ratio. Flagged for inspection, never an error:
    /// positive curvature on the cone is sufficient, not necessary.
    pub fn curvature_flagged(&self) -> bool {
        !(self.delta > 0.0)
    }
}
