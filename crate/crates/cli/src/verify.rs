//! Derivative checks of the reduced cost, run over random directions in
//! parallel.

use acopt_core::presets::random_control;
use acopt_core::{ControlPair, ControlProblem, Error, Evaluation};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtLeast,
    AtMost,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtLeast => ">=",
            Relation::AtMost => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub relation: Relation,
    pub threshold: f64,
}

impl Check {
    fn new(name: String, observed: f64, relation: Relation, threshold: f64) -> Self {
        Self { name, observed, relation, threshold }
    }

    /// False for NaN observations.
    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtLeast => self.observed >= self.threshold,
            Relation::AtMost => self.observed <= self.threshold,
        }
    }
}

pub const MIN_ORDER: f64 = 1.9;
pub const DUALITY_TOL: f64 = 1e-9;
pub const FD_PLATEAU_TOL: f64 = 1e-8;
pub const CURVATURE_TOL: f64 = 1e-4;
pub const POLARIZATION_TOL: f64 = 1e-9;

const FD_STEPS: [f64; 4] = [2e-1, 1e-1, 5e-2, 2.5e-2];
const PLATEAU_STEPS: [f64; 3] = [1e-3, 3e-4, 1e-4];
const TAYLOR_STEPS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
const CURVATURE_STEPS: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];

/// Least-squares slope of `ln err` against `ln eps`.
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Probe direction `k`, uniform in `[-1, 1)` on every node.
pub fn direction(problem: &ControlProblem, seed: u64, k: usize) -> ControlPair {
    random_control(problem.disc(), seed.wrapping_mul(7919).wrapping_add(k as u64 + 1), 1.0)
}

fn per_direction<F>(directions: usize, f: F) -> Result<Vec<Check>, Error>
where
    F: Fn(usize) -> Result<Vec<Check>, Error> + Send + Sync,
{
    let nested: Vec<Vec<Check>> = (0..directions).into_par_iter().map(f).collect::<Result<_, _>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Duality of gradient and tangent, and central-difference order and
/// plateau of the directional derivative.
pub fn gradient_checks(problem: &ControlProblem, base: &ControlPair, directions: usize, seed: u64) -> Result<Vec<Check>, Error> {
    let eval = problem.evaluate(base)?;
    let disc = problem.disc();
    per_direction(directions, |k| {
        let h = direction(problem, seed, k);
        let exact = eval.gradient.dot(&h, disc);
        let xi = eval.linearization.tangent(&h)?;
        let assembled = problem.directional_derivative(&eval.state.trajectory, base, &h, &xi)?;
        let duality = (exact - assembled).abs() / exact.abs().max(assembled.abs());

        let rel = |e: f64| -> Result<f64, Error> {
            let plus = problem.reduced_cost(&base.add_scaled(e, &h))?;
            let minus = problem.reduced_cost(&base.add_scaled(-e, &h))?;
            Ok(((plus - minus) / (2.0 * e) - exact).abs() / exact.abs())
        };
        let err = FD_STEPS.iter().map(|&e| rel(e)).collect::<Result<Vec<_>, _>>()?;
        let plateau = PLATEAU_STEPS.iter().map(|&e| rel(e)).collect::<Result<Vec<_>, _>>()?;
        Ok(vec![
            Check::new(format!("duality[{k}]"), duality, Relation::AtMost, DUALITY_TOL),
            Check::new(format!("fd_order[{k}]"), loglog_slope(&FD_STEPS, &err), Relation::AtLeast, MIN_ORDER),
            Check::new(format!("fd_plateau[{k}]"), plateau.into_iter().fold(f64::INFINITY, f64::min), Relation::AtMost, FD_PLATEAU_TOL),
        ])
    })
}

/// Order of the first-order Taylor remainder of the control-to-state map.
pub fn taylor_checks(problem: &ControlProblem, base: &ControlPair, directions: usize, seed: u64) -> Result<Vec<Check>, Error> {
    let eval = problem.evaluate(base)?;
    let (grid, dt) = (problem.disc().grid(), problem.disc().dt());
    per_direction(directions, |k| {
        let h = direction(problem, seed, k);
        let xi = eval.linearization.tangent(&h)?;
        let remainder = TAYLOR_STEPS
            .iter()
            .map(|&e| {
                let moved = problem.solve_state(&base.add_scaled(e, &h))?.trajectory;
                let mut r = moved.difference(&eval.state.trajectory);
                r.axpy(-e, &xi);
                Ok(r.l2_norm(grid, dt))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        Ok(vec![Check::new(format!("taylor_order[{k}]"), loglog_slope(&TAYLOR_STEPS, &remainder), Relation::AtLeast, MIN_ORDER)])
    })
}

fn polarization(problem: &ControlProblem, eval: &Evaluation<'_>, h: &ControlPair, g: &ControlPair) -> Result<f64, Error> {
    let (phi, psi) = (eval.linearization.tangent(h)?, eval.linearization.tangent(g)?);
    let mixed = problem.curvature_form(eval, h, &phi, g, &psi);
    let polar = 0.25 * (problem.curvature(eval, &h.add_scaled(1.0, g))? - problem.curvature(eval, &h.add_scaled(-1.0, g))?);
    let scale = mixed.abs().max(problem.curvature(eval, h)?.abs());
    Ok((mixed - polar).abs() / scale)
}

/// Second central differences against the curvature form, and the
/// polarization identity of the bilinear form.
pub fn curvature_checks(problem: &ControlProblem, base: &ControlPair, directions: usize, seed: u64) -> Result<Vec<Check>, Error> {
    let eval = problem.evaluate(base)?;
    per_direction(directions, |k| {
        let h = direction(problem, seed, k);
        let exact = problem.curvature(&eval, &h)?;
        let mut best = f64::INFINITY;
        for &e in &CURVATURE_STEPS {
            let plus = problem.reduced_cost(&base.add_scaled(e, &h))?;
            let minus = problem.reduced_cost(&base.add_scaled(-e, &h))?;
            let fd = (plus - 2.0 * eval.cost + minus) / (e * e);
            best = best.min((fd - exact).abs() / exact.abs());
        }
        let g = direction(problem, seed, k + directions);
        Ok(vec![
            Check::new(format!("second_difference[{k}]"), best, Relation::AtMost, CURVATURE_TOL),
            Check::new(format!("polarization[{k}]"), polarization(problem, &eval, &h, &g)?, Relation::AtMost, POLARIZATION_TOL),
        ])
    })
}
