//! Analytic targets and initial data used by experiments and tests.

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{ControlPair, FieldPair};
use crate::geometry::{Discretization, Grid};
use crate::objective::Targets;

/// `0.5 + amplitude · tanh((x − center) / width)`.
pub fn tanh_profile(x: f64, center: f64, width: f64, amplitude: f64) -> f64 {
    0.5 + amplitude * ((x - center) / width).tanh()
}

/// A planar interface normal to the x axis whose center moves linearly in
/// time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingInterface {
    pub start_center: f64,
    pub end_center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for MovingInterface {
    fn default() -> Self {
        Self { start_center: 0.3, end_center: 0.7, width: 0.15, amplitude: 0.4 }
    }
}

impl MovingInterface {
    pub fn value(&self, x: f64, t: f64, final_time: f64) -> f64 {
        let center = self.start_center + (self.end_center - self.start_center) * t / final_time;
        tanh_profile(x, center, self.width, self.amplitude)
    }

    /// Tracking targets sampled from the moving profile; the terminal target
    /// is the final frame.
    pub fn targets(&self, disc: &Discretization) -> Targets {
        let t_end = disc.time().final_time();
        Targets::from_fn(disc, |x, _, t| self.value(x, t, t_end))
    }
}

/// Interface profile at a fixed center, e.g. as initial data.
pub fn tanh_field(grid: &Grid, center: f64, width: f64, amplitude: f64) -> FieldPair {
    FieldPair::from_fn(grid, |x, _| tanh_profile(x, center, width, amplitude))
}

/// Independent uniform samples in `[low, high)`.
pub fn random_field(grid: &Grid, seed: u64, low: f64, high: f64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FieldPair::new((0..grid.num_nodes()).map(|_| rng.random_range(low..high)).collect())
}

/// Control with independent uniform entries in `[-amplitude, amplitude)`,
/// e.g. as a probe direction.
pub fn random_control(disc: &Discretization, seed: u64, amplitude: f64) -> ControlPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ControlPair::zeros(disc);
    u.bulk.iter_mut().chain(u.surface.iter_mut()).for_each(|v| *v = rng.random_range(-amplitude..amplitude));
    u
}
