//! Problem assembly from a [`RunConfig`] and the mode drivers.

use std::fs;
use std::path::{Path, PathBuf};

use acopt_core::objective::ReportOptions;
use acopt_core::optimizer::minimize_with;
use acopt_core::presets::{random_field, tanh_field, MovingInterface};
use acopt_core::state::energy;
use acopt_core::{ControlPair, ControlProblem, Discretization, Error, FieldPair, Grid, OptimalityReport, Targets, TimeAxis};

use crate::config::{ConfigError, ControlPreset, InitPreset, Mode, RunConfig, TargetPreset};
use crate::io;
use crate::verify::{self, Check};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{0}")]
    Solver(#[from] Error),

    #[error("{} of {} verification checks failed", .0.iter().filter(|c| !c.passed()).count(), .0.len())]
    Verification(Vec<Check>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Io { .. } => 2,
            RunError::Solver(e) if is_input_error(e) => 2,
            RunError::Solver(_) => 3,
            RunError::Verification(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "solver",
            _ => "verification",
        }
    }
}

fn is_input_error(e: &Error) -> bool {
    match e {
        Error::InvalidParameter(_) | Error::InvalidArgument(_) | Error::DimensionMismatch { .. } => true,
        Error::AtIterate { source, .. } => is_input_error(source),
        _ => false,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn read_err(key: &str, path: &Path) -> impl FnOnce(io::ReadError) -> RunError {
    let msg = format!("{key}: {}", path.display());
    move |e| RunError::Config(ConfigError::Invalid(format!("{msg}: {e}")))
}

/// What a run produced, for the console.
#[derive(Debug, Default)]
pub struct Summary {
    pub lines: Vec<String>,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

/// A problem built from a config, with the control selected by
/// `control.preset`.
pub struct Setup {
    pub problem: ControlProblem,
    pub control: ControlPair,
}

pub fn build(cfg: &RunConfig) -> Result<Setup, RunError> {
    let disc = Discretization::new(Grid::new(cfg.grid_n)?, TimeAxis::new(cfg.time_t, cfg.time_m)?)?;
    let pf = cfg.potential_f.build()?;
    let pg = cfg.potential_g.build()?;
    let grid = disc.grid();

    let t = &cfg.target;
    let targets = match t.preset {
        TargetPreset::MovingTanh => {
            MovingInterface { start_center: t.start_center, end_center: t.end_center, width: t.width, amplitude: t.amplitude }
                .targets(&disc)
        }
        TargetPreset::Constant => Targets::constant(&disc, t.value),
        TargetPreset::File => {
            let path = t.file.as_deref().expect("validated");
            let levels = io::read_bulk_target(path, &disc).map_err(read_err("target.file", path))?;
            let z_t = levels.last().expect("at least one step").clone();
            let z_sigma = levels.iter().flat_map(|l| grid.trace(l)).collect();
            Targets::new(&disc, levels.concat(), z_sigma, z_t)?
        }
    };

    let b = &cfg.bounds;
    let (mut lower, mut upper) = ControlProblem::constant_box(&disc, b.u1, b.u2, b.u1_gamma, b.u2_gamma);
    let inside: Vec<usize> = grid.coords().iter().enumerate().filter(|(_, &[x, y])| b.in_disk(x, y)).map(|(i, _)| i).collect();
    for s in 0..disc.time().steps() {
        for &i in &inside {
            lower.bulk_at_mut(s)[i] = b.disk_u1;
            upper.bulk_at_mut(s)[i] = b.disk_u2;
        }
    }

    let i = &cfg.init;
    let init = match i.preset {
        InitPreset::Constant => FieldPair::constant(grid, i.value),
        InitPreset::Tanh => tanh_field(grid, i.center, i.width, i.amplitude),
        InitPreset::Random => random_field(grid, cfg.seed, i.low, i.high),
    };

    let c = &cfg.control;
    let control = match c.preset {
        ControlPreset::Zero => ControlPair::zeros(&disc),
        ControlPreset::Constant => ControlPair::constant(&disc, c.value, c.gamma_value),
        ControlPreset::Stationary => ControlPair::constant(&disc, pf.d1(i.value)?, pg.d1(i.value)?),
        ControlPreset::File => {
            let path = c.file.as_deref().expect("validated");
            io::read_control(path, &disc).map_err(read_err("control.file", path))?
        }
    };

    let problem = ControlProblem::new(disc, pf, pg, cfg.weights, targets, lower, upper, init)?.with_newton(cfg.newton);
    Ok(Setup { problem, control })
}

struct Output<'a> {
    dir: &'a Path,
    cfg: &'a RunConfig,
    summary: Summary,
}

impl Output<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.summary.files.push(p.clone());
        p
    }

    fn state(&mut self, problem: &ControlProblem, traj: &acopt_core::Trajectory) -> Result<Vec<f64>, RunError> {
        let disc = problem.disc();
        let grid = disc.grid();
        let energies = (0..traj.levels())
            .map(|k| energy(disc, problem.pf(), problem.pg(), &traj.snapshot(k)))
            .collect::<Result<Vec<_>, _>>()?;
        if self.cfg.formats.csv {
            let p = self.path("y.csv");
            io::write_bulk_trajectory(&p, grid, traj).map_err(io_err(&p))?;
            let p = self.path("y_gamma.csv");
            io::write_trace_trajectory(&p, grid, traj).map_err(io_err(&p))?;
        }
        if self.cfg.formats.vtk {
            io::write_vtk_snapshots(self.dir, "y", grid, traj).map_err(io_err(self.dir))?;
        }
        let p = self.path("energy.csv");
        io::write_energy(&p, disc, &energies).map_err(io_err(&p))?;
        Ok(energies)
    }

    fn control(&mut self, name: &str, problem: &ControlProblem, u: &ControlPair) -> Result<(), RunError> {
        let p = self.path(name);
        io::write_control(&p, problem.disc(), u).map_err(io_err(&p))
    }

    fn report(&mut self, report: &OptimalityReport) -> Result<(), RunError> {
        let p = self.path("report.jsonl");
        io::write_report_jsonl(&p, report).map_err(io_err(&p))?;
        let p = self.path("curvature.csv");
        io::write_curvature_csv(&p, report).map_err(io_err(&p))?;
        let residual = match &report.projection_residual {
            Ok(r) => format!("{r:.3e}"),
            Err(e) => format!("n/a ({e})"),
        };
        self.summary.lines.push(format!(
            "report: cost {:.6e}, stationarity {:.3e}, projection residual {residual}, active fraction {:.4}, delta {:.4e} over {} samples{}",
            report.cost,
            report.stationarity,
            report.active_set_fraction,
            report.delta,
            report.curvature_samples.len(),
            if report.curvature_flagged() { " (flagged: non-positive curvature ratio)" } else { "" },
        ));
        Ok(())
    }
}

fn report_options(cfg: &RunConfig) -> ReportOptions {
    ReportOptions { tau: cfg.report.tau, directions: cfg.report.directions, seed: cfg.seed }
}

/// Runs the configured mode, writing outputs and the resolved config into
/// `output.dir`.
pub fn run(cfg: &RunConfig) -> Result<Summary, RunError> {
    let dir = cfg.output_dir.as_path();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let resolved = cfg.write_resolved(dir).map_err(io_err(dir))?;
    let setup = build(cfg)?;
    let problem = &setup.problem;
    let mut out = Output { dir, cfg, summary: Summary { files: vec![resolved], ..Summary::default() } };

    match cfg.mode {
        Mode::Solve => {
            let sol = problem.solve_state(&setup.control)?;
            let energies = out.state(problem, &sol.trajectory)?;
            let d = &sol.diagnostics;
            out.summary.lines.push(format!(
                "solve: {} steps, state range [{:.6}, {:.6}], energy {:.6e} -> {:.6e}, newton max residual {:.2e}, clamp events {}",
                problem.disc().time().steps(),
                sol.trajectory.min(),
                sol.trajectory.max(),
                energies[0],
                energies[energies.len() - 1],
                d.max_residual,
                d.clamp_events,
            ));
            if d.bounds_warning() {
                out.summary.lines.push("warning: potential arguments were clamped into the guard interval".into());
            }
        }
        Mode::Optimize => optimize(cfg, &setup, &mut out)?,
        Mode::Report => {
            let report = problem.optimality_report(&problem.project(&setup.control), &report_options(cfg))?;
            out.report(&report)?;
        }
        Mode::VerifyGradient | Mode::VerifyTaylor | Mode::VerifyCurvature => {
            let driver = match cfg.mode {
                Mode::VerifyGradient => verify::gradient_checks,
                Mode::VerifyTaylor => verify::taylor_checks,
                _ => verify::curvature_checks,
            };
            let checks = driver(problem, &setup.control, cfg.verify_directions, cfg.seed)?;
            let p = out.path("verify.csv");
            io::write_checks(&p, &checks).map_err(io_err(&p))?;
            if checks.iter().any(|c| !c.passed()) {
                return Err(RunError::Verification(checks));
            }
            out.summary.checks = checks;
        }
    }
    Ok(out.summary)
}

fn optimize(cfg: &RunConfig, setup: &Setup, out: &mut Output<'_>) -> Result<(), RunError> {
    let problem = &setup.problem;
    let history_path = out.path("history.csv");
    let mut history = io::HistoryWriter::create(&history_path).map_err(io_err(&history_path))?;
    let checkpoint_path = out.dir.join("checkpoint.csv");
    let every = cfg.optimizer.checkpoint_every;
    let mut write_error = None;
    let result = minimize_with(problem, &cfg.optimizer_config(), &setup.control, |record, u| {
        if write_error.is_some() {
            return;
        }
        let mut step = || -> std::io::Result<()> {
            history.push(record)?;
            if every > 0 && record.iter > 0 && record.iter % every == 0 {
                io::write_control(&checkpoint_path, problem.disc(), u)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            write_error = Some(e);
        }
    });
    if let Some(e) = write_error {
        return Err(RunError::Io { path: history_path, source: e });
    }

    match result {
        Ok(min) => {
            out.control("control.csv", problem, &min.control)?;
            let state = problem.solve_state(&min.control)?;
            out.state(problem, &state.trajectory)?;
            let last = min.history.last().expect("history starts with the initial point");
            out.summary.lines.push(format!(
                "optimize: {} after {} iterations, cost {:.6e} -> {:.6e}, stationarity {:.3e}",
                if min.converged { "converged" } else { "iteration limit reached" },
                last.iter,
                min.history[0].cost,
                last.cost,
                last.stationarity,
            ));
            let report = match cfg.report.tau {
                Some(_) => problem.optimality_report(&min.control, &report_options(cfg))?,
                None => min.report,
            };
            out.report(&report)?;
            Ok(())
        }
        Err(Error::Stalled { iter, control, history }) => {
            // keep the diagnostics of the last accepted iterate
            out.control("control.csv", problem, &control)?;
            if let Ok(report) = problem.optimality_report(&control, &report_options(cfg)) {
                out.report(&report)?;
            }
            Err(RunError::Solver(Error::Stalled { iter, control, history }))
        }
        Err(e) => Err(e.into()),
    }
}
