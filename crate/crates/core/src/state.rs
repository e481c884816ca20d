//! Forward solve of the nonlinear state system by implicit Euler with damped
//! Newton, the discrete free energy, and the invariant interval of the
//! maximum principle.
//!
//! Each step solves
//! `M (y − y_prev)/dt + K y + W f'(y) + S g'(y|_Γ) = W u + S u_Γ`,
//! which at interior nodes reads `(y − y_prev)/dt − Δ_h y + f'(y) = u`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::fields::{ControlPair, FieldPair, Trajectory};
use crate::geometry::Discretization;
use crate::potential::Potential;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Tolerance on the ∞-norm of the mass-scaled residual. Iteration also
    /// stops once the Newton update is at roundoff level.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-11, max_iter: 50, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StateDiagnostics {
    pub newton_iterations: Vec<usize>,
    pub damped_steps: usize,
    pub max_residual: f64,
    /// Potential evaluations that had to be clamped into the guard interval.
    pub clamp_events: usize,
}

impl StateDiagnostics {
    pub fn bounds_warning(&self) -> bool {
        self.clamp_events > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub trajectory: Trajectory,
    pub diagnostics: StateDiagnostics,
}

fn clamp_total(pf: &Potential, pg: &Potential) -> usize {
    if core::ptr::eq(pf, pg) {
        pf.clamp_count()
    } else {
        pf.clamp_count() + pg.clamp_count()
    }
}

/// Newton updates this small are at the resolution of `f64` on `(0, 1)`.
const ROUNDOFF_STEP: f64 = 8.0 * f64::EPSILON;

/// Per-node admissible interval for Newton iterates.
fn iterate_bounds(disc: &Discretization, pf: &Potential, pg: &Potential) -> (Vec<f64>, Vec<f64>) {
    let (flo, fhi) = pf.guard_interval();
    let (glo, ghi) = pg.guard_interval();
    let mut lo = vec![flo; disc.grid().num_nodes()];
    let mut hi = vec![fhi; disc.grid().num_nodes()];
    for &g in disc.grid().boundary_cycle() {
        lo[g] = lo[g].max(glo);
        hi[g] = hi[g].min(ghi);
    }
    (lo, hi)
}

struct StepResidual<'a> {
    disc: &'a Discretization,
    pf: &'a Potential,
    pg: &'a Potential,
}

impl StepResidual<'_> {
    /// `M (y − prev)/dt + K y + W f'(y) + S g'(y_Γ) − load`.
    fn eval(&self, y: &[f64], prev: &[f64], load: &[f64], out: &mut [f64]) -> Result<()> {
        let ops = self.disc.ops();
        let grid = self.disc.grid();
        let dt = self.disc.dt();
        ops.stiffness.mul_vec_into(y, out);
        for (i, o) in out.iter_mut().enumerate() {
            *o += ops.mass[i] * (y[i] - prev[i]) / dt + grid.bulk_weights()[i] * self.pf.d1(y[i])? - load[i];
        }
        for (&g, &s) in grid.boundary_cycle().iter().zip(grid.surface_weights()) {
            out[g] += s * self.pg.d1(y[g])?;
        }
        Ok(())
    }

    fn jacobian_shift(&self, y: &[f64]) -> Result<Vec<f64>> {
        let grid = self.disc.grid();
        let mut shift: Vec<f64> = y.iter().zip(grid.bulk_weights()).map(|(&v, &w)| Ok(w * self.pf.d2(v)?)).collect::<Result<_>>()?;
        for (&g, &s) in grid.boundary_cycle().iter().zip(grid.surface_weights()) {
            shift[g] += s * self.pg.d2(y[g])?;
        }
        Ok(shift)
    }
}

fn scaled_norms(r: &[f64], mass: &[f64]) -> (f64, f64) {
    let mut inf: f64 = 0.0;
    let mut two = 0.0;
    for (v, m) in r.iter().zip(mass) {
        let s = v / m;
        inf = inf.max(s.abs());
        two += s * s;
    }
    (inf, two.sqrt())
}

/// Solves the state system for the given control and initial data.
pub fn solve_state(
    disc: &Discretization,
    pf: &Potential,
    pg: &Potential,
    control: &ControlPair,
    init: &FieldPair,
    opts: &NewtonOptions,
) -> Result<StateSolution> {
    control.check_shape(disc)?;
    Error::check_len(disc.grid().num_nodes(), init.bulk.len())?;
    if !control.is_finite() {
        return Err(Error::InvalidArgument("control has non-finite entries".into()));
    }
    let (lo, hi) = iterate_bounds(disc, pf, pg);
    if init.bulk.iter().zip(lo.iter().zip(&hi)).any(|(v, (l, h))| !(v >= l && v <= h)) {
        return Err(Error::InvalidArgument("initial data must lie strictly inside the potentials' domain".into()));
    }

    let clamps_before = clamp_total(pf, pg);
    let nodes = disc.grid().num_nodes();
    let steps = disc.time().steps();
    let mass = &disc.ops().mass;
    let residual = StepResidual { disc, pf, pg };

    let mut traj = Trajectory::zeros(steps + 1, nodes);
    traj.level_mut(0).copy_from_slice(&init.bulk);
    let mut diag = StateDiagnostics::default();
    let mut load = vec![0.0; nodes];
    let mut r = vec![0.0; nodes];
    let mut r_trial = vec![0.0; nodes];
    let mut trial = vec![0.0; nodes];

    for s in 0..steps {
        let prev = traj.level(s).to_vec();
        disc.load(control.bulk_at(s), control.surface_at(s), &mut load);
        let mut y = prev.clone();
        residual.eval(&y, &prev, &load, &mut r)?;
        let (mut r_inf, mut r_two) = scaled_norms(&r, mass);
        let mut iters = 0;
        while r_inf > opts.tol {
            if iters == opts.max_iter {
                return Err(Error::NewtonFailure { step: s + 1, residual: r_inf });
            }
            iters += 1;
            let factor = disc.pattern().factor(&residual.jacobian_shift(&y)?, s + 1)?;
            let mut delta: Vec<f64> = r.iter().map(|v| -v).collect();
            factor.solve_in_place(&mut delta)?;
            if delta.iter().all(|d| d.abs() <= ROUNDOFF_STEP) {
                // the residual floor near the endpoints exceeds `tol`
                break;
            }

            let mut lambda = 1.0;
            let mut accepted = false;
            for halving in 0..=opts.max_halvings {
                for i in 0..nodes {
                    trial[i] = y[i] + lambda * delta[i];
                }
                let inside = trial.iter().zip(lo.iter().zip(&hi)).all(|(v, (l, h))| *v >= *l && *v <= *h);
                if inside {
                    residual.eval(&trial, &prev, &load, &mut r_trial)?;
                    let (t_inf, t_two) = scaled_norms(&r_trial, mass);
                    if t_two < r_two || t_inf <= opts.tol {
                        if halving > 0 {
                            diag.damped_steps += 1;
                        }
                        core::mem::swap(&mut y, &mut trial);
                        core::mem::swap(&mut r, &mut r_trial);
                        (r_inf, r_two) = (t_inf, t_two);
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(Error::NewtonFailure { step: s + 1, residual: r_inf });
            }
        }
        diag.newton_iterations.push(iters);
        diag.max_residual = diag.max_residual.max(r_inf);
        traj.level_mut(s + 1).copy_from_slice(&y);
    }
    diag.clamp_events = clamp_total(pf, pg) - clamps_before;
    Ok(StateSolution { trajectory: traj, diagnostics: diag })
}

/// Discrete free energy
/// `½ yᵀ(A_bulk + A_surf) y + Σ w f(y) + Σ_Γ s g(y_Γ)`.
pub fn energy(disc: &Discretization, pf: &Potential, pg: &Potential, state: &FieldPair) -> Result<f64> {
    let grid = disc.grid();
    let y = &state.bulk;
    Error::check_len(grid.num_nodes(), y.len())?;
    let singular_endpoint = |p: &Potential, v: f64| p.is_singular() && (v <= 0.0 || v >= 1.0);
    let ky = disc.ops().stiffness.mul_vec(y);
    let mut e = 0.5 * y.iter().zip(&ky).map(|(a, b)| a * b).sum::<f64>();
    for (&v, &w) in y.iter().zip(grid.bulk_weights()) {
        if singular_endpoint(pf, v) {
            return Err(Error::Domain { value: v });
        }
        e += w * pf.value(v)?;
    }
    for (&g, &s) in grid.boundary_cycle().iter().zip(grid.surface_weights()) {
        if singular_endpoint(pg, y[g]) {
            return Err(Error::Domain { value: y[g] });
        }
        e += s * pg.value(y[g])?;
    }
    Ok(e)
}

/// Interval `[r_*, r^*]` that confines every state whose controls satisfy
/// `|u|, |u_Γ| ≤ bound` and whose initial data lies in `[init_min, init_max]`:
/// `r_*` is the largest value with `max(f', g') + bound ≤ 0` on `(0, r_*)`,
/// and symmetrically for `r^*`.
pub fn invariant_interval(pf: &Potential, pg: &Potential, bound: f64, init_min: f64, init_max: f64) -> Result<(f64, f64)> {
    if !(pf.is_singular() && pg.is_singular()) {
        return Err(Error::Unsupported("invariant interval needs singular potentials".into()));
    }
    let eps = pf.eps_guard().max(pg.eps_guard());
    let low_ok = |r: f64| -> Result<bool> { Ok(pf.d1(r)?.max(pg.d1(r)?) + bound <= 0.0) };
    let high_ok = |r: f64| -> Result<bool> { Ok(pf.d1(r)?.min(pg.d1(r)?) - bound >= 0.0) };

    // scan from the endpoint inward on a log grid, then bisect the first failure
    let scan = |ok: &dyn Fn(f64) -> Result<bool>, at: &dyn Fn(f64) -> f64| -> Result<f64> {
        let mut good = eps;
        if !ok(at(good))? {
            return Ok(0.0);
        }
        let n = 4000;
        let (l0, l1) = (eps.ln(), 0.5f64.ln());
        for i in 1..=n {
            let d = (l0 + (l1 - l0) * i as f64 / n as f64).exp();
            if ok(at(d))? {
                good = d;
            } else {
                let mut bad = d;
                for _ in 0..100 {
                    let mid = 0.5 * (good + bad);
                    if ok(at(mid))? { good = mid } else { bad = mid }
                }
                return Ok(good);
            }
        }
        Ok(good)
    };
    let low = scan(&low_ok, &|d| d)?;
    let high = 1.0 - scan(&high_ok, &|d| 1.0 - d)?;
    Ok((low.min(init_min), high.max(init_max)))
}
