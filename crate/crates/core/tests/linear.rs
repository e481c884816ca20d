mod common;

use acopt_core::linear::{solve_linear, solve_linear_backward, CoefficientFields, Linearization, Propagator};
use acopt_core::{ControlPair, Discretization, FieldPair, Potential, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_coefficients(d: &Discretization, seed: u64) -> CoefficientFields {
    let r = common::random_control(d, seed, 1.0);
    CoefficientFields::from_parts(d, r.bulk, r.surface).unwrap()
}

#[test]
fn matches_dense_space_time_solve() {
    let d = common::disc(4, 1.0, 3);
    for seed in 0..4 {
        let c = random_coefficients(&d, seed);
        let src = common::random_control(&d, 100 + seed, 2.0);
        let init = common::random_init(&d, 200 + seed);
        let traj = solve_linear(&d, &c, &src, &init).unwrap();
        let st = common::SpaceTime::assemble(&d, |s, i| c.bulk_at(s)[i], |s, k| c.surface_at(s)[k], &init.bulk);
        let rhs = &st.b * common::SpaceTime::control_vector(&src) + &st.init;
        let y = st.a.lu().solve(&rhs).expect("dense space-time system is singular");
        let oracle = common::SpaceTime::levels(&init.bulk, &y);
        for (k, level) in oracle.iter().enumerate() {
            for (a, b) in traj.level(k).iter().zip(level) {
                assert!((a - b).abs() <= 1e-10, "level {k}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn constant_data_follows_scalar_recursion() {
    let d = common::disc(6, 1.0, 10);
    let c = CoefficientFields::constant(&d, 1.0, 1.0);
    let traj = solve_linear(&d, &c, &ControlPair::constant(&d, 1.0, 1.0), &FieldPair::constant(d.grid(), 0.0)).unwrap();
    let dt = d.dt();
    let mut w = 0.0;
    for k in 1..=10 {
        w = (w + dt) / (1.0 + dt);
        assert!(traj.level(k).iter().all(|v| (v - w).abs() < 1e-13), "level {k}");
    }
}

#[test]
fn backward_sweep_scalar_recursions() {
    let d = common::disc(5, 1.0, 8);
    let m = d.time().steps();
    let terminal = FieldPair::constant(d.grid(), 0.7);
    let zero_loads = ControlPair::zeros(&d);
    let p = solve_linear_backward(&d, &CoefficientFields::zeros(&d), &zero_loads, &terminal).unwrap();
    assert!(p.values().iter().all(|v| (v - 0.7).abs() < 1e-13));
    let p = solve_linear_backward(&d, &CoefficientFields::constant(&d, 1.0, 1.0), &zero_loads, &terminal).unwrap();
    for s in 0..=m {
        let expected = 0.7 / (1.0 + d.dt()).powi((m - s) as i32);
        assert!(p.level(s).iter().all(|v| (v - expected).abs() < 1e-13), "level {s}");
    }
}

#[test]
fn solution_is_linear_in_data() {
    let d = common::disc(6, 0.5, 6);
    let c = random_coefficients(&d, 7);
    let (s1, s2) = (common::random_control(&d, 1, 1.0), common::random_control(&d, 2, 1.0));
    let (i1, i2) = (common::random_init(&d, 3), common::random_init(&d, 4));
    let (a, b) = (0.7, -1.3);
    let y1 = solve_linear(&d, &c, &s1, &i1).unwrap();
    let y2 = solve_linear(&d, &c, &s2, &i2).unwrap();
    let mut combo_src = s1.clone();
    combo_src.scale(a);
    combo_src.axpy(b, &s2);
    let combo_init = FieldPair::new(i1.bulk.iter().zip(&i2.bulk).map(|(x, y)| a * x + b * y).collect());
    let y = solve_linear(&d, &c, &combo_src, &combo_init).unwrap();
    for (k, v) in y.values().iter().enumerate() {
        let e = a * y1.values()[k] + b * y2.values()[k];
        assert!((v - e).abs() < 1e-12);
    }
}

/// With time-independent coefficients the backward sweep is the forward
/// sweep run on reversed loads.
#[test]
fn backward_sweep_is_time_reversed_forward() {
    let d = common::disc(5, 1.0, 7);
    let m = d.time().steps();
    let base = random_coefficients(&d, 11);
    let c = CoefficientFields::from_parts(&d, base.bulk_at(0).repeat(m), base.surface_at(0).repeat(m)).unwrap();
    let loads = common::random_control(&d, 12, 1.0);
    let mut reversed = ControlPair::zeros(&d);
    for s in 0..m {
        reversed.bulk_at_mut(s).copy_from_slice(loads.bulk_at(m - 1 - s));
        reversed.surface_at_mut(s).copy_from_slice(loads.surface_at(m - 1 - s));
    }
    let terminal = common::random_init(&d, 13);
    let back = solve_linear_backward(&d, &c, &loads, &terminal).unwrap();
    let fwd = solve_linear(&d, &c, &reversed, &terminal).unwrap();
    for s in 0..=m {
        for (a, b) in back.level(s).iter().zip(fwd.level(m - s)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

/// Σ ⟨g_s, φ^{s+1}⟩ + ⟨M T, φ^m⟩/dt = Σ ⟨f_s, p_s⟩ + ⟨M φ^0, p_0⟩/dt
#[test]
fn forward_and_backward_sweeps_are_dual() {
    let d = common::disc(8, 1.0, 20);
    let g = d.grid();
    let c = random_coefficients(&d, 21);
    let prop = Propagator::new(&d, &c).unwrap();
    let f = common::random_control(&d, 22, 1.0);
    let loads = common::random_control(&d, 23, 1.0);
    let init = common::random_init(&d, 24);
    let terminal = common::random_init(&d, 25);
    let phi = prop.forward(&f, &init.bulk).unwrap();
    let p = prop.backward(&loads, &terminal.bulk).unwrap();
    let pair = |bulk: &[f64], surf: &[f64], field: &[f64]| {
        g.inner_bulk(bulk, field).unwrap() + g.inner_surface(surf, &g.trace(field)).unwrap()
    };
    let dt = d.dt();
    let m = d.time().steps();
    let mut lhs = pair(&terminal.bulk, &g.trace(&terminal.bulk), phi.level(m)) / dt;
    let mut rhs = pair(&init.bulk, &g.trace(&init.bulk), p.level(0)) / dt;
    for s in 0..m {
        lhs += pair(loads.bulk_at(s), loads.surface_at(s), phi.level(s + 1));
        rhs += pair(f.bulk_at(s), f.surface_at(s), p.level(s));
    }
    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
}

#[test]
fn taylor_remainder_is_second_order() {
    let p = common::tracking_problem(8, 20);
    let d = p.disc();
    let u = common::random_control(d, 31, 0.5);
    let h = common::random_control(d, 32, 1.0);
    let y = p.solve_state(&u).unwrap().trajectory;
    let lin = Linearization::new(d, &y, p.pf(), p.pg()).unwrap();
    let xi = lin.tangent(&h).unwrap();
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let ye = p.solve_state(&u.add_scaled(e, &h)).unwrap().trajectory;
            let mut r = ye.difference(&y);
            r.axpy(-e, &xi);
            r.max_level_norm(d.grid())
        })
        .collect();
    let slope = common::loglog_slope(&eps, &err);
    assert!(slope >= 1.9, "slope {slope}, errors {err:?}");
}

/// (ξ_k(u + εh) − ξ_k(u)) / ε → η[h, k] at first order.
#[test]
fn second_derivative_matches_tangent_differences() {
    let p = common::tracking_problem(8, 10);
    let d = p.disc();
    let u = common::random_control(d, 41, 0.5);
    let h = common::random_control(d, 42, 1.0);
    let k = common::random_control(d, 43, 1.0);
    let tangent_at = |ctrl: &ControlPair, dir: &ControlPair| -> (Trajectory, Linearization<'_>) {
        let y = p.solve_state(ctrl).unwrap().trajectory;
        let lin = Linearization::new(d, &y, p.pf(), p.pg()).unwrap();
        (lin.tangent(dir).unwrap(), lin)
    };
    let (xi_k, lin) = tangent_at(&u, &k);
    let xi_h = lin.tangent(&h).unwrap();
    let eta = lin.second_derivative(&xi_h, &xi_k).unwrap();
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let (xi_e, _) = tangent_at(&u.add_scaled(e, &h), &k);
            let mut r = xi_e.difference(&xi_k);
            r.axpy(-e, &eta);
            r.max_level_norm(d.grid()) / e
        })
        .collect();
    let slope = common::loglog_slope(&eps, &err);
    assert!(slope >= 0.9, "slope {slope}, errors {err:?}");
}

#[test]
fn second_derivative_vanishes_for_quadratic_potentials() {
    let d = common::disc(6, 1.0, 5);
    let quad = Potential::smooth(3.0).unwrap();
    let y = Trajectory::from_levels(&vec![vec![0.4; d.grid().num_nodes()]; 6]);
    let lin = Linearization::new(&d, &y, &quad, &quad).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let phi = Trajectory::from_levels(&(0..6).map(|_| (0..d.grid().num_nodes()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect::<Vec<_>>());
    let eta = lin.second_derivative(&phi, &phi).unwrap();
    assert!(eta.values().iter().all(|v| *v == 0.0));
}

/// ‖ξ(u, h)‖ depends continuously on the linearization point.
#[test]
fn tangent_is_lipschitz_in_the_control() {
    let p = common::tracking_problem(8, 20);
    let d = p.disc();
    let h = common::random_control(d, 51, 1.0);
    let u = common::random_control(d, 52, 0.5);
    let v = common::random_control(d, 53, 0.5);
    let xi_at = |c: &ControlPair| {
        let y = p.solve_state(c).unwrap().trajectory;
        Linearization::new(d, &y, p.pf(), p.pg()).unwrap().tangent(&h).unwrap()
    };
    let mut ratios = Vec::new();
    for t in [1e-1, 1e-2, 1e-3] {
        let w = u.add_scaled(t, &v.add_scaled(-1.0, &u));
        let dx = xi_at(&w).difference(&xi_at(&u)).max_level_norm(d.grid());
        let du = w.add_scaled(-1.0, &u).max_abs();
        ratios.push(dx / du);
    }
    assert!(ratios.iter().all(|r| r.is_finite()));
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi <= 2.0 * lo, "{ratios:?}");
}

#[test]
fn zero_data_gives_zero_solutions() {
    let d = common::disc(4, 1.0, 4);
    let zero = ControlPair::zeros(&d);
    let w = solve_linear(&d, &CoefficientFields::zeros(&d), &zero, &FieldPair::constant(d.grid(), 0.0)).unwrap();
    assert!(w.values().iter().all(|v| *v == 0.0));
    let p = common::tracking_problem(4, 4);
    let y = p.solve_state(&common::random_control(p.disc(), 1, 0.5)).unwrap().trajectory;
    let lin = Linearization::new(p.disc(), &y, p.pf(), p.pg()).unwrap();
    let xi = lin.tangent(&ControlPair::zeros(p.disc())).unwrap();
    assert!(xi.values().iter().all(|v| *v == 0.0));
    let phi = lin.tangent(&common::random_control(p.disc(), 2, 1.0)).unwrap();
    let eta = lin.second_derivative(&xi, &phi).unwrap();
    assert!(eta.values().iter().all(|v| *v == 0.0));
}

/// Around y ≡ 0.5 the tangent of a constant direction solves
/// ξ' + f''(0.5) ξ = h with f''(0.5) = 4α − 2c = −2.
#[test]
fn tangent_at_symmetric_state_is_scalar() {
    let d = common::disc(6, 1.0, 10);
    let pot = Potential::default();
    let y = Trajectory::from_levels(&vec![vec![0.5; d.grid().num_nodes()]; 11]);
    let xi = Linearization::new(&d, &y, &pot, &pot).unwrap().tangent(&ControlPair::constant(&d, 0.3, 0.3)).unwrap();
    let dt = d.dt();
    let mut w = 0.0;
    for k in 1..=10 {
        w = (w / dt + 0.3) / (1.0 / dt - 2.0);
        assert!(xi.level(k).iter().all(|v| (v - w).abs() < 1e-12 * w.abs().max(1.0)), "level {k}");
    }
}

/// [S(u+εh+εk) − S(u+εh) − S(u+εk) + S(u)] / ε² → η[h, k] at first order.
#[test]
fn second_derivative_matches_mixed_state_difference() {
    let p = common::tracking_problem(8, 10);
    let d = p.disc();
    let u = common::random_control(d, 61, 0.5);
    let h = common::random_control(d, 62, 1.0);
    let k = common::random_control(d, 63, 1.0);
    let state = |c: &ControlPair| p.solve_state(c).unwrap().trajectory;
    let y = state(&u);
    let lin = Linearization::new(d, &y, p.pf(), p.pg()).unwrap();
    let eta = lin.second_derivative(&lin.tangent(&h).unwrap(), &lin.tangent(&k).unwrap()).unwrap();
    let eps = [1e-1, 5e-2, 2.5e-2, 1.25e-2];
    let err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let uh = u.add_scaled(e, &h);
            let mut mixed = state(&uh.add_scaled(e, &k)).difference(&state(&uh));
            mixed.axpy(-1.0, &state(&u.add_scaled(e, &k)));
            mixed.axpy(1.0, &y);
            mixed.axpy(-e * e, &eta);
            mixed.max_level_norm(d.grid()) / (e * e)
        })
        .collect();
    let slope = common::loglog_slope(&eps, &err);
    assert!(slope >= 0.9, "slope {slope}, errors {err:?}");
}
