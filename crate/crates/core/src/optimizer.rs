//! Projected gradient with Armijo backtracking on the control box.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::fields::ControlPair;
use crate::objective::{ControlProblem, OptimalityReport, ReportOptions};
use crate::{Error, Result};

/// Relative cost change below which the line search measures descent
/// through the gradient rather than through cost values.
const COST_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub stop_tol: f64,
    pub max_backtracks: usize,
    /// Critical-cone directions sampled for the final report.
    pub report_directions: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            stop_tol: 1e-8,
            max_backtracks: 40,
            report_directions: 32,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.armijo_c) {
            return Err(Error::param("armijo_c must lie in (0, 1)"));
        }
        if !open_unit(self.backtrack_factor) {
            return Err(Error::param("backtrack_factor must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::param("initial_step must be positive"));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::param("stop_tol must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateRecord {
    pub iter: usize,
    pub cost: f64,
    pub stationarity: f64,
    /// Accepted step length; zero for the starting point.
    pub step: f64,
    pub clamp_events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimization {
    pub control: ControlPair,
    pub history: Vec<IterateRecord>,
    pub converged: bool,
    pub report: OptimalityReport,
}

/// Nodewise clip into the problem's box.
pub fn project_box(control: &ControlPair, problem: &ControlProblem) -> ControlPair {
    problem.project(control)
}

pub fn minimize(problem: &ControlProblem, config: &OptimizerConfig, start: &ControlPair) -> Result<Minimization> {
    minimize_with(problem, config, start, |_, _| {})
}

/// Like [`minimize`], calling `observer` after every accepted iterate
/// (and once for the starting point).
pub fn minimize_with(
    problem: &ControlProblem,
    config: &OptimizerConfig,
    start: &ControlPair,
    mut observer: impl FnMut(&IterateRecord, &ControlPair),
) -> Result<Minimization> {
    config.validate()?;
    let disc = problem.disc();
    let at = |iter: usize| move |e: Error| Error::AtIterate { iter, source: Box::new(e) };

    let mut u = problem.project(start);
    let mut eval = problem.evaluate(&u).map_err(at(0))?;
    let initial_grad_norm = eval.gradient.norm(disc);
    let mut stationarity = problem.stationarity(&u, &eval.gradient);
    let mut history = Vec::new();
    let record = IterateRecord { iter: 0, cost: eval.cost, stationarity, step: 0.0, clamp_events: eval.state.diagnostics.clamp_events };
    observer(&record, &u);
    history.push(record);

    let mut step = config.initial_step;
    let step_cap = 10.0 * config.initial_step;
    let mut converged = stationarity <= config.stop_tol;
    let mut iter = 0;
    while !converged && iter < config.max_iters {
        iter += 1;
        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let candidate = problem.project(&u.add_scaled(-trial_step, &eval.gradient));
            let d = candidate.add_scaled(-1.0, &u);
            let moved = d.norm(disc);
            let required = config.armijo_c / trial_step * moved * moved;
            let state = problem.solve_state(&candidate).map_err(at(iter))?;
            let cost = problem.cost(&state.trajectory, &candidate)?;
            let resolution = COST_RESOLUTION * eval.cost.abs();
            if eval.cost - cost > resolution {
                if cost <= eval.cost - required {
                    accepted = Some((candidate, None));
                    break;
                }
            } else if moved > 0.0 && cost - eval.cost <= resolution {
                // change below roundoff of the cost: integrate the
                // directional derivative along the step instead
                let trial_eval = problem.evaluate(&candidate).map_err(at(iter))?;
                let decrease = 0.5 * (eval.gradient.dot(&d, disc) + trial_eval.gradient.dot(&d, disc));
                if decrease <= -required && cost < eval.cost {
                    accepted = Some((candidate, Some(trial_eval)));
                    break;
                }
            }
            trial_step *= config.backtrack_factor;
        }
        let Some((next, next_eval)) = accepted else {
            return Err(Error::Stalled { iter, control: Box::new(u), history });
        };
        u = next;
        eval = match next_eval {
            Some(e) => e,
            None => problem.evaluate(&u).map_err(at(iter))?,
        };
        stationarity = problem.stationarity(&u, &eval.gradient);
        let record = IterateRecord { iter, cost: eval.cost, stationarity, step: trial_step, clamp_events: eval.state.diagnostics.clamp_events };
        observer(&record, &u);
        history.push(record);
        converged = stationarity <= config.stop_tol;
        step = (2.0 * trial_step).min(step_cap);
    }

    let report_opts = ReportOptions { tau: Some(1e-3 * initial_grad_norm), directions: config.report_directions, seed: config.seed };
    let report = problem.report_at(&eval, &report_opts)?;
    Ok(Minimization { control: u, history, converged, report })
}
