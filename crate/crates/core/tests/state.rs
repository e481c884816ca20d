mod common;

use acopt_core::state::{energy, invariant_interval, solve_state};
use acopt_core::{ControlPair, FieldPair, NewtonOptions, Potential};

fn f_prime(alpha: f64, c: f64, y: f64) -> f64 {
    alpha * (y / (1.0 - y)).ln() + c * (1.0 - 2.0 * y)
}

/// Classical RK4 on y' = u − f'(y) with a fine fixed step.
fn ode_oracle(y0: f64, u: f64, t: f64) -> f64 {
    let rhs = |y: f64| u - f_prime(1.0, 3.0, y);
    let steps = 200_000;
    let h = t / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * h * k1);
        let k3 = rhs(y + 0.5 * h * k2);
        let k4 = rhs(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    y
}

#[test]
fn constant_data_tracks_scalar_ode_at_first_order() {
    let pot = Potential::default();
    let t_end = 0.5;
    let exact = ode_oracle(0.3, 0.8, t_end);
    let mut errors = Vec::new();
    for m in [25, 50, 100] {
        let d = common::disc(4, t_end, m);
        let sol = solve_state(&d, &pot, &pot, &ControlPair::constant(&d, 0.8, 0.8), &FieldPair::constant(d.grid(), 0.3), &NewtonOptions::default()).unwrap();
        let last = sol.trajectory.last();
        assert!(last.iter().all(|v| (v - last[0]).abs() < 1e-12), "state stays spatially constant");
        let err = (last[0] - exact).abs();
        assert!(err <= d.dt(), "m={m}: error {err}");
        errors.push(err);
    }
    for pair in errors.windows(2) {
        let ratio = pair[0] / pair[1];
        assert!((1.7..2.3).contains(&ratio), "error ratio {ratio}");
    }
}

fn potential_value(alpha: f64, c: f64, y: f64) -> f64 {
    alpha * (y * y.ln() + (1.0 - y) * (1.0 - y).ln()) + c * y * (1.0 - y)
}

/// Re-sums the energy edge by edge from the grid coordinates.
fn energy_oracle(n: usize, y: &[f64]) -> f64 {
    let h = 1.0 / n as f64;
    let at = |i: usize, j: usize| y[j * (n + 1) + i];
    let on_edge = |k: usize| k == 0 || k == n;
    let mut e = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            if i < n {
                let weight = if on_edge(j) { 0.5 } else { 1.0 };
                let d = at(i + 1, j) - at(i, j);
                e += 0.5 * weight * d * d;
                if on_edge(j) {
                    e += 0.5 * d * d / h;
                }
            }
            if j < n {
                let weight = if on_edge(i) { 0.5 } else { 1.0 };
                let d = at(i, j + 1) - at(i, j);
                e += 0.5 * weight * d * d;
                if on_edge(i) {
                    e += 0.5 * d * d / h;
                }
            }
            let cell = |k: usize| if on_edge(k) { 0.5 * h } else { h };
            e += cell(i) * cell(j) * potential_value(1.0, 3.0, at(i, j));
            let boundary_weight = if on_edge(i) || on_edge(j) { h } else { 0.0 };
            e += boundary_weight * potential_value(1.0, 3.0, at(i, j));
        }
    }
    e
}

#[test]
fn energy_matches_independent_resummation() {
    let pot = Potential::default();
    for (n, seed) in [(3, 1), (8, 2), (16, 3)] {
        let d = common::disc(n, 1.0, 1);
        let y = common::random_init(&d, seed);
        let e = energy(&d, &pot, &pot, &y).unwrap();
        let oracle = energy_oracle(n, &y.bulk);
        assert!((e - oracle).abs() <= 1e-12 * oracle.abs().max(1.0), "n={n}: {e} vs {oracle}");
    }
}

#[test]
fn energy_of_constant_minimizer() {
    let pot = Potential::default();
    // f' is increasing on (0, 0.07) near the lower well; bisect f' = 0 there
    let (mut lo, mut hi) = (1e-6, 0.2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_prime(1.0, 3.0, mid) < 0.0 { lo = mid } else { hi = mid }
    }
    let d = common::disc(8, 1.0, 1);
    let e = energy(&d, &pot, &pot, &FieldPair::constant(d.grid(), lo)).unwrap();
    let expected = 5.0 * potential_value(1.0, 3.0, lo);
    assert!((e - expected).abs() < 1e-12);
    assert!(matches!(energy(&d, &pot, &pot, &FieldPair::constant(d.grid(), 1.0)), Err(acopt_core::Error::Domain { .. })));
}

#[test]
fn zero_control_dissipates_energy() {
    let pot = Potential::default();
    let d = common::disc(16, 1.0, 100);
    for init in [common::random_init(&d, 5), acopt_core::presets::tanh_field(d.grid(), 0.4, 0.1, 0.45)] {
        let sol = solve_state(&d, &pot, &pot, &ControlPair::zeros(&d), &init, &NewtonOptions::default()).unwrap();
        let energies: Vec<f64> = (0..=100).map(|k| energy(&d, &pot, &pot, &sol.trajectory.snapshot(k)).unwrap()).collect();
        let worst = energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        assert!(worst <= 1e-10, "energy increase {worst}");
        assert!(energies[100] < energies[0]);
    }
}

#[test]
fn bounded_controls_respect_invariant_interval() {
    let pot = Potential::default();
    let (lo, hi) = invariant_interval(&pot, &pot, 1.0, 0.2, 0.8).unwrap();
    assert!(0.0 < lo && lo <= 0.2 && 0.8 <= hi && hi < 1.0);
    let d = common::disc(8, 1.0, 20);
    for seed in 0..5 {
        let u = common::random_control(&d, seed, 1.0);
        let sol = solve_state(&d, &pot, &pot, &u, &common::random_init(&d, 50 + seed), &NewtonOptions::default()).unwrap();
        assert!(sol.trajectory.min() >= lo && sol.trajectory.max() <= hi);
        assert_eq!(sol.diagnostics.clamp_events, 0);
        assert!(!sol.diagnostics.bounds_warning());
    }
}

#[test]
fn large_controls_push_toward_the_endpoints() {
    let pot = Potential::default();
    let d = common::disc(4, 4.0, 40);
    let init = FieldPair::constant(d.grid(), 0.5);
    let sol = solve_state(&d, &pot, &pot, &ControlPair::constant(&d, 15.0, 15.0), &init, &NewtonOptions::default()).unwrap();
    let (_, hi) = invariant_interval(&pot, &pot, 15.0, 0.5, 0.5).unwrap();
    assert!(sol.trajectory.max() < 1.0 && sol.trajectory.max() <= hi);
    assert!(sol.trajectory.max() > 1.0 - 1e-7);
    // the equilibrium for u = 50 lies within 1e-9 of the endpoint
    let err = solve_state(&d, &pot, &pot, &ControlPair::constant(&d, 50.0, 50.0), &init, &NewtonOptions::default()).unwrap_err();
    assert!(matches!(err, acopt_core::Error::NewtonFailure { step: 1, .. }), "{err:?}");
}

#[test]
fn state_difference_is_controlled_by_control_difference() {
    let p = common::tracking_problem(8, 20);
    let d = p.disc();
    let mut ratios: Vec<f64> = (0..20)
        .map(|k| {
            let (u1, u2) = (common::random_control(d, 2 * k, 1.0), common::random_control(d, 2 * k + 1, 1.0));
            let y1 = p.solve_state(&u1).unwrap().trajectory;
            let y2 = p.solve_state(&u2).unwrap().trajectory;
            y1.difference(&y2).max_level_norm(d.grid()) / u1.add_scaled(-1.0, &u2).norm(d)
        })
        .collect();
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[9] + ratios[10]);
    assert!(ratios[19] < 10.0 * median, "{ratios:?}");
}
