//! The unit square, its boundary cycle, quadrature weights and the discrete
//! bulk/surface operators.
//!
//! Nodes are numbered `j * (n + 1) + i` for the node at `(i h, j h)`. The
//! boundary cycle starts at the origin and runs counterclockwise.
//!
//! The operators come from two quadratic forms: the bulk Dirichlet energy
//! summed over grid edges (edges lying on the boundary carry half weight) and
//! the surface Dirichlet energy summed over boundary segments. Their matrices
//! `A_bulk` and `A_surf` are symmetric and annihilate constants. The
//! strong-form operators are recovered by dividing by the lumped masses:
//! `L_bulk = W⁻¹ A_bulk`, `L_surf = S⁻¹ A_surf` and `B_flux = S⁻¹ A_bulk|_Γ`,
//! so the discrete Green identity
//! `Σ_interior w (L_bulk y) v + Σ_Γ s (B_flux y) v = vᵀ A_bulk y`
//! holds exactly.

use alloc::vec;
use alloc::vec::Vec;

use crate::sparse::{CsrMatrix, StepPattern};
use crate::{Error, Result};

/// Whether a bulk node lies inside the domain or on the boundary cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRole {
    /// Position among the interior nodes.
    Interior(usize),
    /// Position along the boundary cycle.
    Boundary(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    boundary_cycle: Vec<usize>,
    interior: Vec<usize>,
    roles: Vec<NodeRole>,
    bulk_weights: Vec<f64>,
    surface_weights: Vec<f64>,
}

impl Grid {
    /// Builds the grid with `n` cells per side.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("grid needs at least 2 cells per side"));
        }
        let h = 1.0 / n as f64;
        let side = n + 1;
        let index = |i: usize, j: usize| j * side + i;

        let coords = (0..side * side).map(|g| [(g % side) as f64 * h, (g / side) as f64 * h]).collect();

        let mut boundary_cycle = Vec::with_capacity(4 * n);
        boundary_cycle.extend((0..n).map(|i| index(i, 0)));
        boundary_cycle.extend((0..n).map(|j| index(n, j)));
        boundary_cycle.extend((1..=n).rev().map(|i| index(i, n)));
        boundary_cycle.extend((1..=n).rev().map(|j| index(0, j)));

        let mut roles = vec![NodeRole::Interior(usize::MAX); side * side];
        for (pos, &g) in boundary_cycle.iter().enumerate() {
            roles[g] = NodeRole::Boundary(pos);
        }
        let mut interior = Vec::with_capacity((n - 1) * (n - 1));
        for (g, role) in roles.iter_mut().enumerate() {
            if let NodeRole::Interior(slot) = role {
                *slot = interior.len();
                interior.push(g);
            }
        }

        let edge = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
        let bulk_weights = (0..side * side).map(|g| edge(g % side) * edge(g / side) * h * h).collect();
        let surface_weights = vec![h; 4 * n];

        Ok(Self { n, h, coords, boundary_cycle, interior, roles, bulk_weights, surface_weights })
    }

    /// Cells per side.
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_boundary(&self) -> usize {
        self.boundary_cycle.len()
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn boundary_cycle(&self) -> &[usize] {
        &self.boundary_cycle
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn role(&self, node: usize) -> NodeRole {
        self.roles[node]
    }

    pub fn bulk_weights(&self) -> &[f64] {
        &self.bulk_weights
    }

    pub fn surface_weights(&self) -> &[f64] {
        &self.surface_weights
    }

    /// Arclength of each boundary-cycle node measured from the origin.
    pub fn arclength(&self) -> Vec<f64> {
        (0..self.num_boundary()).map(|k| k as f64 * self.h).collect()
    }

    /// Restriction of a bulk field to the boundary cycle.
    pub fn trace(&self, bulk: &[f64]) -> Vec<f64> {
        self.boundary_cycle.iter().map(|&g| bulk[g]).collect()
    }

    /// Discrete L²(Ω) pairing.
    pub fn inner_bulk(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Error::check_len(self.num_nodes(), a.len())?;
        Error::check_len(self.num_nodes(), b.len())?;
        Ok(weighted_dot(&self.bulk_weights, a, b))
    }

    /// Discrete L²(Γ) pairing of two fields on the boundary cycle.
    pub fn inner_surface(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Error::check_len(self.num_boundary(), a.len())?;
        Error::check_len(self.num_boundary(), b.len())?;
        Ok(weighted_dot(&self.surface_weights, a, b))
    }

    /// L²(Ω)×L²(Γ) pairing of two bulk fields through their traces.
    pub(crate) fn inner_pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let bulk = weighted_dot(&self.bulk_weights, a, b);
        let surf: f64 = self
            .boundary_cycle
            .iter()
            .zip(&self.surface_weights)
            .map(|(&g, &s)| s * a[g] * b[g])
            .sum();
        bulk + surf
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Uniform time grid `t_k = k T / m`, `k = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAxis {
    final_time: f64,
    steps: usize,
}

impl TimeAxis {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time.is_finite() && final_time > 0.0) {
            return Err(Error::param("final time must be positive"));
        }
        if steps == 0 {
            return Err(Error::param("need at least one time step"));
        }
        Ok(Self { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, level: usize) -> f64 {
        if level == self.steps {
            self.final_time
        } else {
            level as f64 * self.dt()
        }
    }
}

/// Discrete operators of the coupled bulk/surface problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    /// Strong-form −Δ on bulk nodes (5-point stencil at interior nodes).
    pub l_bulk: CsrMatrix,
    /// −Δ_Γ on the boundary cycle (periodic second difference).
    pub l_surf: CsrMatrix,
    /// Normal derivative at boundary-cycle nodes, as a map from bulk fields.
    pub b_flux: CsrMatrix,
    /// Bulk Dirichlet-energy matrix `A_bulk`.
    pub bulk_stiffness: CsrMatrix,
    /// `A_bulk + A_surf` on bulk numbering.
    pub stiffness: CsrMatrix,
    /// Lumped mass `W + S` on bulk numbering.
    pub mass: Vec<f64>,
}

impl OperatorSet {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.cells();
        let h = grid.h();
        let nodes = grid.num_nodes();
        let nb = grid.num_boundary();

        let mut bulk = Vec::new();
        let add_edge = |trip: &mut Vec<(usize, usize, f64)>, a: usize, b: usize, w: f64| {
            trip.push((a, a, w));
            trip.push((b, b, w));
            trip.push((a, b, -w));
            trip.push((b, a, -w));
        };
        let rim = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
        for j in 0..=n {
            for i in 0..n {
                add_edge(&mut bulk, grid.node(i, j), grid.node(i + 1, j), rim(j));
            }
        }
        for i in 0..=n {
            for j in 0..n {
                add_edge(&mut bulk, grid.node(i, j), grid.node(i, j + 1), rim(i));
            }
        }
        let bulk_stiffness = CsrMatrix::from_triplets(nodes, nodes, bulk.clone());

        let cycle = grid.boundary_cycle();
        let mut surf_cycle = Vec::new();
        let mut surf_bulk = Vec::new();
        for k in 0..nb {
            let next = (k + 1) % nb;
            add_edge(&mut surf_cycle, k, next, 1.0 / (h * h));
            add_edge(&mut surf_bulk, cycle[k], cycle[next], 1.0 / h);
        }
        let l_surf = CsrMatrix::from_triplets(nb, nb, surf_cycle);

        let mut all = bulk;
        all.extend(surf_bulk);
        let stiffness = CsrMatrix::from_triplets(nodes, nodes, all);

        let w = grid.bulk_weights();
        let l_bulk = CsrMatrix::from_triplets(
            nodes,
            nodes,
            (0..nodes).flat_map(|r| bulk_stiffness.row(r).map(move |(c, v)| (r, c, v / w[r])).collect::<Vec<_>>()).collect(),
        );
        let s = grid.surface_weights();
        let b_flux = CsrMatrix::from_triplets(
            nb,
            nodes,
            cycle
                .iter()
                .enumerate()
                .flat_map(|(k, &g)| bulk_stiffness.row(g).map(move |(c, v)| (k, c, v / s[k])).collect::<Vec<_>>())
                .collect(),
        );

        let mut mass = w.to_vec();
        for (k, &g) in cycle.iter().enumerate() {
            mass[g] += s[k];
        }

        Self { l_bulk, l_surf, b_flux, bulk_stiffness, stiffness, mass }
    }
}

/// Grid, operators and time axis bundled with the shared step-matrix
/// pattern. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Discretization {
    grid: Grid,
    ops: OperatorSet,
    time: TimeAxis,
    pattern: StepPattern,
    bulk_load: Vec<f64>,
}

impl Discretization {
    pub fn new(grid: Grid, time: TimeAxis) -> Result<Self> {
        let ops = OperatorSet::new(&grid);
        let pattern = StepPattern::new(&ops.stiffness, &ops.mass, time.dt())?;
        let bulk_load = grid.bulk_weights().to_vec();
        Ok(Self { grid, ops, time, pattern, bulk_load })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ops(&self) -> &OperatorSet {
        &self.ops
    }

    pub fn time(&self) -> &TimeAxis {
        &self.time
    }

    pub fn dt(&self) -> f64 {
        self.time.dt()
    }

    pub(crate) fn pattern(&self) -> &StepPattern {
        &self.pattern
    }

    /// `W a + S a_Γ` on bulk numbering: the load of a bulk/surface source.
    pub(crate) fn load(&self, bulk: &[f64], surface: &[f64], out: &mut [f64]) {
        for ((o, &w), &a) in out.iter_mut().zip(&self.bulk_load).zip(bulk) {
            *o = w * a;
        }
        for ((&g, &s), &a) in self.grid.boundary_cycle.iter().zip(self.grid.surface_weights()).zip(surface) {
            out[g] += s * a;
        }
    }

    /// Diagonal shift `W c₁ + S c₂` for coefficient fields.
    pub(crate) fn shift(&self, c_bulk: &[f64], c_surface: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.num_nodes()];
        self.load(c_bulk, c_surface, &mut out);
        out
    }
}
