//! Field containers: a single bulk/surface pair, a time trajectory, and the
//! control pair.
//!
//! A [`FieldPair`] stores one value per bulk node; the surface component is
//! its restriction to the boundary cycle, so `y_Γ = y|_Γ` holds by
//! construction. Controls are different: the surface control is stored
//! independently of the bulk one.
//!
//! Controls are stored per time step. Slot `s` (for `s = 0..m`) drives the
//! implicit step `t_s → t_{s+1}` and is paired with quadrature weight `dt`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{weighted_dot, Discretization, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub bulk: Vec<f64>,
}

impl FieldPair {
    pub fn new(bulk: Vec<f64>) -> Self {
        Self { bulk }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { bulk: vec![value; grid.num_nodes()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { bulk: grid.coords().iter().map(|&[x, y]| f(x, y)).collect() }
    }

    pub fn trace(&self, grid: &Grid) -> Vec<f64> {
        grid.trace(&self.bulk)
    }

    pub fn min(&self) -> f64 {
        self.bulk.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.bulk.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Time-indexed sequence of bulk fields stored level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    nodes: usize,
    values: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(levels: usize, nodes: usize) -> Self {
        Self { nodes, values: vec![0.0; levels * nodes] }
    }

    pub fn from_levels(levels: &[Vec<f64>]) -> Self {
        let nodes = levels.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(levels.len() * nodes);
        for l in levels {
            assert_eq!(l.len(), nodes, "ragged trajectory");
            values.extend_from_slice(l);
        }
        Self { nodes, values }
    }

    pub fn levels(&self) -> usize {
        if self.nodes == 0 {
            0
        } else {
            self.values.len() / self.nodes
        }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.values[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.values[k * self.nodes..(k + 1) * self.nodes]
    }

    pub fn last(&self) -> &[f64] {
        self.level(self.levels() - 1)
    }

    pub fn snapshot(&self, k: usize) -> FieldPair {
        FieldPair::new(self.level(k).to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `self - other`, level by level.
    pub fn difference(&self, other: &Self) -> Self {
        assert_eq!(self.values.len(), other.values.len());
        Self { nodes: self.nodes, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        assert_eq!(self.values.len(), other.values.len());
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k ‖w^k‖` in L²(Ω)×L²(Γ): the discrete C⁰([0,T]; H) norm.
    pub fn max_level_norm(&self, grid: &Grid) -> f64 {
        (0..self.levels()).map(|k| grid.inner_pair(self.level(k), self.level(k)).sqrt()).fold(0.0, f64::max)
    }

    /// Space-time L²(Q)×L²(Σ) norm over levels `1..=m`.
    pub fn l2_norm(&self, grid: &Grid, dt: f64) -> f64 {
        (1..self.levels()).map(|k| dt * grid.inner_pair(self.level(k), self.level(k))).sum::<f64>().sqrt()
    }
}

/// Distributed control `u` and boundary control `u_Γ`, one slot per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    steps: usize,
    bulk_len: usize,
    surface_len: usize,
    pub bulk: Vec<f64>,
    pub surface: Vec<f64>,
}

impl ControlPair {
    pub fn zeros(disc: &Discretization) -> Self {
        Self::constant(disc, 0.0, 0.0)
    }

    pub fn constant(disc: &Discretization, bulk: f64, surface: f64) -> Self {
        let steps = disc.time().steps();
        let bulk_len = disc.grid().num_nodes();
        let surface_len = disc.grid().num_boundary();
        Self {
            steps,
            bulk_len,
            surface_len,
            bulk: vec![bulk; steps * bulk_len],
            surface: vec![surface; steps * surface_len],
        }
    }

    /// Builds a control from per-step closures over node coordinates and the
    /// step's end time `t_{s+1}`.
    pub fn from_fn(
        disc: &Discretization,
        bulk: impl Fn(f64, f64, f64) -> f64,
        surface: impl Fn(f64, f64, f64) -> f64,
    ) -> Self {
        let mut u = Self::zeros(disc);
        let coords = disc.grid().coords();
        let cycle = disc.grid().boundary_cycle();
        for s in 0..u.steps {
            let t = disc.time().time(s + 1);
            for (v, &[x, y]) in u.bulk_at_mut(s).iter_mut().zip(coords) {
                *v = bulk(x, y, t);
            }
            for (v, &g) in u.surface_at_mut(s).iter_mut().zip(cycle) {
                let [x, y] = coords[g];
                *v = surface(x, y, t);
            }
        }
        u
    }

    pub fn from_parts(disc: &Discretization, bulk: Vec<f64>, surface: Vec<f64>) -> Result<Self> {
        let mut u = Self::zeros(disc);
        Error::check_len(u.bulk.len(), bulk.len())?;
        Error::check_len(u.surface.len(), surface.len())?;
        u.bulk = bulk;
        u.surface = surface;
        Ok(u)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn bulk_len(&self) -> usize {
        self.bulk_len
    }

    pub fn surface_len(&self) -> usize {
        self.surface_len
    }

    pub fn bulk_at(&self, s: usize) -> &[f64] {
        &self.bulk[s * self.bulk_len..(s + 1) * self.bulk_len]
    }

    pub fn surface_at(&self, s: usize) -> &[f64] {
        &self.surface[s * self.surface_len..(s + 1) * self.surface_len]
    }

    pub fn bulk_at_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.bulk[s * self.bulk_len..(s + 1) * self.bulk_len]
    }

    pub fn surface_at_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.surface[s * self.surface_len..(s + 1) * self.surface_len]
    }

    pub fn check_shape(&self, disc: &Discretization) -> Result<()> {
        Error::check_len(disc.time().steps() * disc.grid().num_nodes(), self.bulk.len())?;
        Error::check_len(disc.time().steps() * disc.grid().num_boundary(), self.surface.len())
    }

    fn same_shape(&self, other: &Self) {
        assert_eq!(self.bulk.len(), other.bulk.len(), "control shapes differ");
        assert_eq!(self.surface.len(), other.surface.len(), "control shapes differ");
    }

    /// Nodewise combination of two controls of the same shape.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        self.same_shape(other);
        Self {
            bulk: self.bulk.iter().zip(&other.bulk).map(|(&a, &b)| f(a, b)).collect(),
            surface: self.surface.iter().zip(&other.surface).map(|(&a, &b)| f(a, b)).collect(),
            ..*self
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            bulk: self.bulk.iter().map(|&a| f(a)).collect(),
            surface: self.surface.iter().map(|&a| f(a)).collect(),
            ..*self
        }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Self) -> Self {
        self.zip_map(other, |x, y| x + a * y)
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.same_shape(other);
        for (x, y) in self.bulk.iter_mut().zip(&other.bulk) {
            *x += a * y;
        }
        for (x, y) in self.surface.iter_mut().zip(&other.surface) {
            *x += a * y;
        }
    }

    pub fn scale(&mut self, a: f64) {
        self.bulk.iter_mut().chain(self.surface.iter_mut()).for_each(|x| *x *= a);
    }

    /// The ℋ = L²(Q)×L²(Σ) inner product.
    pub fn dot(&self, other: &Self, disc: &Discretization) -> f64 {
        self.same_shape(other);
        let grid = disc.grid();
        let mut total = 0.0;
        for s in 0..self.steps {
            total += weighted_dot(grid.bulk_weights(), self.bulk_at(s), other.bulk_at(s));
            total += weighted_dot(grid.surface_weights(), self.surface_at(s), other.surface_at(s));
        }
        total * disc.dt()
    }

    pub fn norm(&self, disc: &Discretization) -> f64 {
        self.dot(self, disc).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.bulk.iter().chain(&self.surface).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.bulk.iter().chain(&self.surface).all(|v| v.is_finite())
    }
}
