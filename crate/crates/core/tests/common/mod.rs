#![allow(dead_code)]

use acopt_core::presets::{random_field, tanh_field, MovingInterface};
use acopt_core::{ControlPair, ControlProblem, Discretization, Grid, Potential, TimeAxis, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn disc(n: usize, t: f64, m: usize) -> Discretization {
    Discretization::new(Grid::new(n).unwrap(), TimeAxis::new(t, m).unwrap()).unwrap()
}

/// Moving tanh interface tracking with box [-1, 1] and default weights.
pub fn tracking_problem(n: usize, m: usize) -> ControlProblem {
    let d = disc(n, 1.0, m);
    let targets = MovingInterface::default().targets(&d);
    let init = tanh_field(d.grid(), 0.3, 0.15, 0.4);
    let (lo, hi) = ControlProblem::constant_box(&d, -1.0, 1.0, -1.0, 1.0);
    ControlProblem::new(d, Potential::default(), Potential::default(), Weights::default(), targets, lo, hi, init).unwrap()
}

pub fn random_control(d: &Discretization, seed: u64, amplitude: f64) -> ControlPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = ControlPair::zeros(d);
    u.bulk.iter_mut().chain(u.surface.iter_mut()).for_each(|v| *v = rng.random_range(-amplitude..amplitude));
    u
}

pub fn random_init(d: &Discretization, seed: u64) -> acopt_core::FieldPair {
    random_field(d.grid(), seed, 0.2, 0.8)
}

/// Least-squares slope of log(err) against log(eps).
pub fn loglog_slope(eps: &[f64], err: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

pub fn problem(
    d: Discretization,
    pot: Potential,
    weights: Weights,
    targets: acopt_core::Targets,
    bounds: (f64, f64),
    init: acopt_core::FieldPair,
) -> ControlProblem {
    let (lo, hi) = ControlProblem::constant_box(&d, bounds.0, bounds.1, bounds.0, bounds.1);
    ControlProblem::new(d, pot.clone(), pot, weights, targets, lo, hi, init).unwrap()
}

pub fn weights(beta1: f64, beta2: f64, beta3: f64, beta5: f64, beta6: f64) -> Weights {
    Weights { beta1, beta2, beta3, beta5, beta6 }
}

/// Dense space-time system `A Y = B U + r` for levels `1..=m`, assembled
/// row by row from the strong-form operators: interior rows carry the bulk
/// Laplacian, boundary rows add the surface Laplacian and the normal flux.
/// Controls are ordered slot by slot, bulk block before surface block.
pub struct SpaceTime {
    pub a: nalgebra::DMatrix<f64>,
    pub b: nalgebra::DMatrix<f64>,
    /// Right-hand side contribution of the initial data.
    pub init: nalgebra::DVector<f64>,
}

impl SpaceTime {
    pub fn assemble(d: &Discretization, c_bulk: impl Fn(usize, usize) -> f64, c_surf: impl Fn(usize, usize) -> f64, init: &[f64]) -> Self {
        use nalgebra::{DMatrix, DVector};
        let g = d.grid();
        let (n, nb, m, dt) = (g.num_nodes(), g.num_boundary(), d.time().steps(), d.dt());
        let ops = d.ops();
        let (lb, ls, bf) = (ops.l_bulk.to_dense(), ops.l_surf.to_dense(), ops.b_flux.to_dense());
        let cycle = g.boundary_cycle();
        let mut slot = vec![None; n];
        for (k, &i) in cycle.iter().enumerate() {
            slot[i] = Some(k);
        }
        let per_step = n + nb;
        let mut a = DMatrix::<f64>::zeros(n * m, n * m);
        let mut b = DMatrix::<f64>::zeros(n * m, per_step * m);
        let mut r = DVector::<f64>::zeros(n * m);
        for s in 0..m {
            for i in 0..n {
                let row = s * n + i;
                let w = g.bulk_weights()[i];
                a[(row, row)] += w / dt + w * c_bulk(s, i);
                b[(row, s * per_step + i)] += w;
                if s == 0 {
                    r[row] += w / dt * init[i];
                } else {
                    a[(row, row - n)] -= w / dt;
                }
                match slot[i] {
                    None => {
                        for j in 0..n {
                            a[(row, s * n + j)] += w * lb[i][j];
                        }
                    }
                    Some(k) => {
                        let sw = g.surface_weights()[k];
                        a[(row, row)] += sw / dt + sw * c_surf(s, k);
                        b[(row, s * per_step + n + k)] += sw;
                        if s == 0 {
                            r[row] += sw / dt * init[i];
                        } else {
                            a[(row, row - n)] -= sw / dt;
                        }
                        for j in 0..n {
                            a[(row, s * n + j)] += sw * bf[k][j];
                        }
                        for (l, &jn) in cycle.iter().enumerate() {
                            a[(row, s * n + jn)] += sw * ls[k][l];
                        }
                    }
                }
            }
        }
        Self { a, b, init: r }
    }

    pub fn control_vector(u: &ControlPair) -> nalgebra::DVector<f64> {
        let m = u.steps();
        nalgebra::DVector::from_iterator(m * (u.bulk_len() + u.surface_len()), (0..m).flat_map(|s| u.bulk_at(s).iter().chain(u.surface_at(s)).copied()))
    }

    pub fn control_pair(d: &Discretization, v: &nalgebra::DVector<f64>) -> ControlPair {
        let mut u = ControlPair::zeros(d);
        let (n, nb) = (u.bulk_len(), u.surface_len());
        for s in 0..u.steps() {
            let base = s * (n + nb);
            u.bulk_at_mut(s).copy_from_slice(&v.as_slice()[base..base + n]);
            u.surface_at_mut(s).copy_from_slice(&v.as_slice()[base + n..base + n + nb]);
        }
        u
    }

    /// Levels `0..=m` from the stacked unknowns.
    pub fn levels(init: &[f64], y: &nalgebra::DVector<f64>) -> Vec<Vec<f64>> {
        let n = init.len();
        let mut out = vec![init.to_vec()];
        out.extend(y.as_slice().chunks(n).map(|c| c.to_vec()));
        out
    }
}

/// Unconstrained minimizer of the linear-quadratic problem with smooth
/// potentials `f = g = c·y(1−y)`, from the dense normal equations
/// `(Bᵀ A⁻ᵀ Q A⁻¹ B + R) U = Bᵀ A⁻ᵀ (q − Q A⁻¹ r)`.
pub fn linear_quadratic_optimum(
    d: &Discretization,
    c: f64,
    weights: &Weights,
    targets: &acopt_core::Targets,
    init: &acopt_core::FieldPair,
) -> ControlPair {
    use nalgebra::{DMatrix, DVector};
    let m = d.time().steps();
    let g = d.grid();
    let (nn, nb, dt) = (g.num_nodes(), g.num_boundary(), d.dt());
    let st = SpaceTime::assemble(d, |_, _| -2.0 * c, |_, _| -2.0 * c, &init.bulk);
    // f'(y) = c − 2c y: the constant part moves to the right-hand side
    let r = &st.init - &st.b * SpaceTime::control_vector(&ControlPair::constant(d, c, c));
    let mut q_diag = DVector::<f64>::zeros(nn * m);
    let mut q_vec = DVector::<f64>::zeros(nn * m);
    for s in 0..m {
        for i in 0..nn {
            let w = g.bulk_weights()[i];
            q_diag[s * nn + i] += dt * weights.beta1 * w;
            q_vec[s * nn + i] += dt * weights.beta1 * w * targets.z_q_at(s)[i];
        }
        for (k, &i) in g.boundary_cycle().iter().enumerate() {
            let sw = g.surface_weights()[k];
            q_diag[s * nn + i] += dt * weights.beta2 * sw;
            q_vec[s * nn + i] += dt * weights.beta2 * sw * targets.z_sigma_at(s)[k];
        }
    }
    let last = (m - 1) * nn;
    for i in 0..nn {
        let w = g.bulk_weights()[i];
        q_diag[last + i] += weights.beta3 * w;
        q_vec[last + i] += weights.beta3 * w * targets.z_t()[i];
    }
    for (k, &i) in g.boundary_cycle().iter().enumerate() {
        let sw = g.surface_weights()[k];
        q_diag[last + i] += weights.beta3 * sw;
        q_vec[last + i] += weights.beta3 * sw * targets.z_t()[i];
    }
    let r_diag = DVector::from_iterator(
        m * (nn + nb),
        (0..m).flat_map(|_| g.bulk_weights().iter().map(|w| dt * weights.beta5 * w).chain(g.surface_weights().iter().map(|s| dt * weights.beta6 * s))),
    );
    let lu = st.a.clone().lu();
    let s_map = lu.solve(&st.b).unwrap();
    let free = lu.solve(&r).unwrap();
    let q = DMatrix::from_diagonal(&q_diag);
    let hessian = s_map.transpose() * &q * &s_map + DMatrix::from_diagonal(&r_diag);
    let rhs = s_map.transpose() * (&q_vec - &q * &free);
    SpaceTime::control_pair(d, &hessian.lu().solve(&rhs).unwrap())
}
