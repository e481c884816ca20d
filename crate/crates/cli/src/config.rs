//! Run configuration: flat dotted `key = value` text with `#` comments.
//!
//! Every key has a default. [`RunConfig::to_text`] writes the fully resolved
//! configuration, which parses back to an identical value.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use acopt_core::{NewtonOptions, OptimizerConfig, Potential, Weights};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },

    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },

    #[error("unknown key{}: {}", if .0.len() > 1 { "s" } else { "" }, .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("line {line}: invalid value for `{key}`: {msg}")]
    Value { line: usize, key: String, msg: String },

    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Conversion between a config value and its text form.
trait Value: Sized {
    fn parse_value(raw: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

impl Value for f64 {
    fn parse_value(raw: &str) -> Result<Self, String> {
        let v: f64 = raw.parse().map_err(|_| format!("`{raw}` is not a number"))?;
        if v.is_finite() { Ok(v) } else { Err(format!("`{raw}` is not finite")) }
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl Value for usize {
    fn parse_value(raw: &str) -> Result<Self, String> {
        raw.parse().map_err(|_| format!("`{raw}` is not a nonnegative integer"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Value for u64 {
    fn parse_value(raw: &str) -> Result<Self, String> {
        raw.parse().map_err(|_| format!("`{raw}` is not a nonnegative integer"))
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl Value for PathBuf {
    fn parse_value(raw: &str) -> Result<Self, String> {
        if raw.is_empty() { Err("empty path".into()) } else { Ok(PathBuf::from(raw)) }
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

/// `none` or a path.
impl Value for Option<PathBuf> {
    fn parse_value(raw: &str) -> Result<Self, String> {
        if raw == "none" { Ok(None) } else { PathBuf::parse_value(raw).map(Some) }
    }
    fn render(&self) -> String {
        self.as_ref().map_or("none".into(), |p| p.render())
    }
}

/// `auto` or a number.
impl Value for Option<f64> {
    fn parse_value(raw: &str) -> Result<Self, String> {
        if raw == "auto" { Ok(None) } else { f64::parse_value(raw).map(Some) }
    }
    fn render(&self) -> String {
        self.map_or("auto".into(), |v| v.render())
    }
}

macro_rules! keyword_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $word:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const WORDS: &'static [&'static str] = &[$($word),+];

            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $word),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($word => Ok(Self::$variant),)+
                    _ => Err(format!("`{s}` is not one of {}", Self::WORDS.join(", "))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Value for $name {
            fn parse_value(raw: &str) -> Result<Self, String> {
                raw.parse()
            }
            fn render(&self) -> String {
                self.as_str().into()
            }
        }
    };
}

keyword_enum!(Mode {
    Solve => "solve",
    Optimize => "optimize",
    VerifyGradient => "verify-gradient",
    VerifyTaylor => "verify-taylor",
    VerifyCurvature => "verify-curvature",
    Report => "report",
});

keyword_enum!(
    /// Tracking targets. `moving-tanh` moves a tanh interface linearly in
    /// time; the terminal target is its final frame.
    TargetPreset {
        MovingTanh => "moving-tanh",
        Constant => "constant",
        File => "file",
    }
);

keyword_enum!(Region {
    None => "none",
    Disk => "disk",
});

keyword_enum!(
    /// Control used by `solve`, `report` and the verify modes, and the
    /// starting point of `optimize`. `stationary` is `(f'(y*), g'(y*))` for
    /// the constant initial value `y*`.
    ControlPreset {
        Zero => "zero",
        Constant => "constant",
        Stationary => "stationary",
        File => "file",
    }
);

keyword_enum!(InitPreset {
    Constant => "constant",
    Tanh => "tanh",
    Random => "random",
});

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialConfig {
    pub alpha: f64,
    pub c: f64,
    pub eps_guard: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        let p = Potential::default();
        Self { alpha: p.alpha(), c: p.c(), eps_guard: p.eps_guard() }
    }
}

impl PotentialConfig {
    pub fn build(&self) -> Result<Potential, acopt_core::Error> {
        Potential::new(self.alpha, self.c, self.eps_guard)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetConfig {
    pub preset: TargetPreset,
    pub start_center: f64,
    pub end_center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub value: f64,
    pub file: Option<PathBuf>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        let m = acopt_core::presets::MovingInterface::default();
        Self {
            preset: TargetPreset::MovingTanh,
            start_center: m.start_center,
            end_center: m.end_center,
            width: m.width,
            amplitude: m.amplitude,
            value: 0.5,
            file: None,
        }
    }
}

/// Constant bounds, optionally overridden for bulk nodes inside a disk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxConfig {
    pub u1: f64,
    pub u2: f64,
    pub u1_gamma: f64,
    pub u2_gamma: f64,
    pub region: Region,
    pub disk_x: f64,
    pub disk_y: f64,
    pub disk_radius: f64,
    pub disk_u1: f64,
    pub disk_u2: f64,
}

impl Default for BoxConfig {
    fn default() -> Self {
        Self {
            u1: -1.0,
            u2: 1.0,
            u1_gamma: -1.0,
            u2_gamma: 1.0,
            region: Region::None,
            disk_x: 0.5,
            disk_y: 0.5,
            disk_radius: 0.25,
            disk_u1: -1.0,
            disk_u2: 1.0,
        }
    }
}

impl BoxConfig {
    pub fn in_disk(&self, x: f64, y: f64) -> bool {
        self.region == Region::Disk && (x - self.disk_x).hypot(y - self.disk_y) <= self.disk_radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub preset: ControlPreset,
    pub value: f64,
    pub gamma_value: f64,
    pub file: Option<PathBuf>,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { preset: ControlPreset::Zero, value: 0.0, gamma_value: 0.0, file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub preset: InitPreset,
    pub value: f64,
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { preset: InitPreset::Tanh, value: 0.5, center: 0.3, width: 0.15, amplitude: 0.4, low: 0.2, high: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings {
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub stop_tol: f64,
    pub max_backtracks: usize,
    /// Write the current control every this many iterations; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let c = OptimizerConfig::default();
        Self {
            max_iters: c.max_iters,
            armijo_c: c.armijo_c,
            backtrack_factor: c.backtrack_factor,
            initial_step: c.initial_step,
            stop_tol: c.stop_tol,
            max_backtracks: c.max_backtracks,
            checkpoint_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    pub directions: usize,
    /// Strong-activity threshold; `None` scales with the gradient norm.
    pub tau: Option<f64>,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { directions: 32, tau: None }
    }
}

/// Subset of {csv, vtk}; written as a comma-separated list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub vtk: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self { csv: true, vtk: false }
    }
}

impl Value for Formats {
    fn parse_value(raw: &str) -> Result<Self, String> {
        let mut f = Formats { csv: false, vtk: false };
        for word in raw.split(',').map(str::trim) {
            match word {
                "csv" => f.csv = true,
                "vtk" => f.vtk = true,
                _ => return Err(format!("`{word}` is not one of csv, vtk")),
            }
        }
        Ok(f)
    }
    fn render(&self) -> String {
        let words: Vec<&str> = [(self.csv, "csv"), (self.vtk, "vtk")].iter().filter(|(on, _)| *on).map(|(_, w)| *w).collect();
        words.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub grid_n: usize,
    pub time_t: f64,
    pub time_m: usize,
    pub potential_f: PotentialConfig,
    pub potential_g: PotentialConfig,
    pub weights: Weights,
    pub target: TargetConfig,
    pub bounds: BoxConfig,
    pub control: ControlConfig,
    pub init: InitConfig,
    pub newton: NewtonOptions,
    pub optimizer: OptimizerSettings,
    pub verify_directions: usize,
    pub report: ReportConfig,
    pub output_dir: PathBuf,
    pub formats: Formats,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Solve,
            seed: 0,
            grid_n: 16,
            time_t: 1.0,
            time_m: 20,
            potential_f: PotentialConfig::default(),
            potential_g: PotentialConfig::default(),
            weights: Weights::default(),
            target: TargetConfig::default(),
            bounds: BoxConfig::default(),
            control: ControlConfig::default(),
            init: InitConfig::default(),
            newton: NewtonOptions::default(),
            optimizer: OptimizerSettings::default(),
            verify_directions: 5,
            report: ReportConfig::default(),
            output_dir: PathBuf::from("out"),
            formats: Formats::default(),
        }
    }
}

macro_rules! config_keys {
    ($($key:literal => $($field:ident).+ : $ty:ty),+ $(,)?) => {
        /// Every accepted key, in the order of the resolved file.
        pub const KEYS: &[&str] = &[$($key),+];

        fn assign(cfg: &mut RunConfig, key: &str, raw: &str) -> Option<Result<(), String>> {
            match key {
                $($key => Some(<$ty as Value>::parse_value(raw).map(|v| cfg.$($field).+ = v)),)+
                _ => None,
            }
        }

        fn render(cfg: &RunConfig) -> Vec<(&'static str, String)> {
            vec![$(($key, <$ty as Value>::render(&cfg.$($field).+))),+]
        }
    };
}

config_keys! {
    "mode" => mode: Mode,
    "seed" => seed: u64,
    "grid.n" => grid_n: usize,
    "time.T" => time_t: f64,
    "time.m" => time_m: usize,
    "potential.f.alpha" => potential_f.alpha: f64,
    "potential.f.c" => potential_f.c: f64,
    "potential.f.eps_guard" => potential_f.eps_guard: f64,
    "potential.g.alpha" => potential_g.alpha: f64,
    "potential.g.c" => potential_g.c: f64,
    "potential.g.eps_guard" => potential_g.eps_guard: f64,
    "cost.beta1" => weights.beta1: f64,
    "cost.beta2" => weights.beta2: f64,
    "cost.beta3" => weights.beta3: f64,
    "cost.beta5" => weights.beta5: f64,
    "cost.beta6" => weights.beta6: f64,
    "target.preset" => target.preset: TargetPreset,
    "target.start_center" => target.start_center: f64,
    "target.end_center" => target.end_center: f64,
    "target.width" => target.width: f64,
    "target.amplitude" => target.amplitude: f64,
    "target.value" => target.value: f64,
    "target.file" => target.file: Option<PathBuf>,
    "box.u1" => bounds.u1: f64,
    "box.u2" => bounds.u2: f64,
    "box.u1_gamma" => bounds.u1_gamma: f64,
    "box.u2_gamma" => bounds.u2_gamma: f64,
    "box.region" => bounds.region: Region,
    "box.disk.x" => bounds.disk_x: f64,
    "box.disk.y" => bounds.disk_y: f64,
    "box.disk.radius" => bounds.disk_radius: f64,
    "box.disk.u1" => bounds.disk_u1: f64,
    "box.disk.u2" => bounds.disk_u2: f64,
    "control.preset" => control.preset: ControlPreset,
    "control.value" => control.value: f64,
    "control.gamma_value" => control.gamma_value: f64,
    "control.file" => control.file: Option<PathBuf>,
    "init.preset" => init.preset: InitPreset,
    "init.value" => init.value: f64,
    "init.center" => init.center: f64,
    "init.width" => init.width: f64,
    "init.amplitude" => init.amplitude: f64,
    "init.low" => init.low: f64,
    "init.high" => init.high: f64,
    "newton.tol" => newton.tol: f64,
    "newton.max_iter" => newton.max_iter: usize,
    "newton.max_halvings" => newton.max_halvings: usize,
    "optimizer.max_iters" => optimizer.max_iters: usize,
    "optimizer.armijo_c" => optimizer.armijo_c: f64,
    "optimizer.backtrack_factor" => optimizer.backtrack_factor: f64,
    "optimizer.initial_step" => optimizer.initial_step: f64,
    "optimizer.stop_tol" => optimizer.stop_tol: f64,
    "optimizer.max_backtracks" => optimizer.max_backtracks: usize,
    "optimizer.checkpoint_every" => optimizer.checkpoint_every: usize,
    "verify.directions" => verify_directions: usize,
    "report.directions" => report.directions: usize,
    "report.tau" => report.tau: Option<f64>,
    "output.dir" => output_dir: PathBuf,
    "output.formats" => formats: Formats,
}

/// Name of the resolved configuration written to the output directory.
pub const RESOLVED_FILE: &str = "resolved.cfg";

impl RunConfig {
    /// Reads and validates a config file. Relative `target.file` and
    /// `control.file` paths are taken relative to the file's directory and
    /// stored as absolute paths.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut unknown = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, msg: format!("expected `key = value`, found `{content}`") })?;
            let (key, value) = (key.trim(), value.trim().trim_matches('"'));
            if key == "cost.beta4" || key == "beta4" {
                return Err(invalid(
                    "(A6): cost.beta4 is not an independent key; the terminal boundary weight always equals cost.beta3",
                ));
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::Syntax { line, msg: format!("duplicate key `{key}`") });
            }
            match assign(&mut cfg, key, value) {
                Some(Ok(())) => {}
                Some(Err(msg)) => return Err(ConfigError::Value { line, key: key.into(), msg }),
                None => unknown.push(key.to_string()),
            }
        }
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        for file in [&mut cfg.target.file, &mut cfg.control.file].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
            if let Ok(abs) = file.canonicalize() {
                *file = abs;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The fully resolved configuration as config text.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# resolved configuration\n");
        for (key, value) in render(self) {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn write_resolved(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join(RESOLVED_FILE);
        fs::write(&path, self.to_text())?;
        Ok(path)
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            max_iters: o.max_iters,
            armijo_c: o.armijo_c,
            backtrack_factor: o.backtrack_factor,
            initial_step: o.initial_step,
            stop_tol: o.stop_tol,
            max_backtracks: o.max_backtracks,
            report_directions: self.report.directions,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.grid_n < 2 {
            return Err(invalid("grid.n must be at least 2"));
        }
        if !(self.time_t > 0.0) {
            return Err(invalid("time.T must be positive"));
        }
        if self.time_m == 0 {
            return Err(invalid("time.m must be at least 1"));
        }
        let pf = self.potential_f.build().map_err(|e| invalid(format!("potential.f: {e}")))?;
        let pg = self.potential_g.build().map_err(|e| invalid(format!("potential.g: {e}")))?;

        let w = &self.weights;
        let betas = [w.beta1, w.beta2, w.beta3, w.beta5, w.beta6];
        if betas.iter().any(|&b| b < 0.0) {
            return Err(invalid("cost weights must be nonnegative"));
        }
        if betas.iter().all(|&b| b == 0.0) {
            return Err(invalid("at least one cost weight must be positive"));
        }

        self.validate_bounds()?;

        match self.target.preset {
            TargetPreset::MovingTanh => {
                if !(self.target.width > 0.0) {
                    return Err(invalid("target.width must be positive"));
                }
            }
            TargetPreset::File => require_file("target.file", self.target.file.as_deref())?,
            TargetPreset::Constant => {}
        }
        if self.control.preset == ControlPreset::File {
            require_file("control.file", self.control.file.as_deref())?;
        }
        if self.control.preset == ControlPreset::Stationary && self.init.preset != InitPreset::Constant {
            return Err(invalid("control.preset = stationary needs init.preset = constant"));
        }

        let i = &self.init;
        let singular = pf.is_singular() || pg.is_singular();
        let (lo, hi) = match i.preset {
            InitPreset::Constant => (i.value, i.value),
            InitPreset::Tanh => {
                if !(i.width > 0.0) {
                    return Err(invalid("init.width must be positive"));
                }
                (0.5 - i.amplitude.abs(), 0.5 + i.amplitude.abs())
            }
            InitPreset::Random => {
                if !(i.low < i.high) {
                    return Err(invalid(format!("init.low = {} must be below init.high = {}", i.low, i.high)));
                }
                (i.low, i.high)
            }
        };
        if singular && !(lo > 0.0 && hi < 1.0) {
            return Err(invalid(format!(
                "(A5): initial data must lie strictly inside (0, 1); init.preset = {} ranges over [{lo}, {hi}]",
                i.preset
            )));
        }

        if !(self.newton.tol > 0.0) || self.newton.max_iter == 0 {
            return Err(invalid("newton.tol must be positive and newton.max_iter at least 1"));
        }
        self.optimizer_config().validate().map_err(|e| invalid(format!("optimizer: {e}")))?;
        if self.verify_directions == 0 {
            return Err(invalid("verify.directions must be at least 1"));
        }
        if matches!(self.report.tau, Some(t) if t < 0.0) {
            return Err(invalid("report.tau must be nonnegative"));
        }
        if !(self.formats.csv || self.formats.vtk) {
            return Err(invalid("output.formats must name at least one of csv, vtk"));
        }
        Ok(())
    }

    fn validate_bounds(&self) -> Result<(), ConfigError> {
        let b = &self.bounds;
        if b.u1 > b.u2 {
            return Err(invalid(format!("(A1): u1 > u2 at every bulk node (box.u1 = {} > box.u2 = {})", b.u1, b.u2)));
        }
        if b.u1_gamma > b.u2_gamma {
            return Err(invalid(format!(
                "(A1): u1 > u2 at every boundary node (box.u1_gamma = {} > box.u2_gamma = {})",
                b.u1_gamma, b.u2_gamma
            )));
        }
        if b.region == Region::Disk {
            if !(b.disk_radius > 0.0) {
                return Err(invalid("box.disk.radius must be positive"));
            }
            if b.disk_u1 > b.disk_u2 {
                return Err(invalid(format!(
                    "(A1): u1 > u2 at bulk nodes inside the disk of radius {} around ({}, {}) (box.disk.u1 = {} > box.disk.u2 = {})",
                    b.disk_radius, b.disk_x, b.disk_y, b.disk_u1, b.disk_u2
                )));
            }
        }
        Ok(())
    }
}

fn require_file(key: &str, path: Option<&Path>) -> Result<(), ConfigError> {
    match path {
        None => Err(invalid(format!("{key} must be set for this preset"))),
        Some(p) if !p.is_file() => Err(invalid(format!("{key}: {} does not exist", p.display()))),
        Some(_) => Ok(()),
    }
}
