//! Double-well potentials `f = f₁ + f₂` with the logarithmic singular part
//! `f₁(y) = α [y ln y + (1−y) ln(1−y)]` and smooth part `f₂(y) = c y (1−y)`.
//!
//! Arguments inside `[0, ε_g) ∪ (1−ε_g, 1]` are clamped to the guarded
//! interval and counted; arguments outside `[0, 1]` are rejected. With
//! `α = 0` the potential is the smooth quadratic `c y (1−y)` on the whole
//! real line and nothing is clamped.

use core::sync::atomic::{AtomicUsize, Ordering};

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub const DEFAULT_EPS_GUARD: f64 = 1e-9;

#[derive(Debug)]
pub struct Potential {
    alpha: f64,
    c: f64,
    eps_guard: f64,
    clamps: AtomicUsize,
}

impl Clone for Potential {
    fn clone(&self) -> Self {
        Self {
            alpha: self.alpha,
            c: self.c,
            eps_guard: self.eps_guard,
            clamps: AtomicUsize::new(self.clamp_count()),
        }
    }
}

impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.c == other.c && self.eps_guard == other.eps_guard
    }
}

impl Default for Potential {
    /// `α = 1`, `c = 3`: a double well with minima near 0.07 and 0.93.
    fn default() -> Self {
        Self::logarithmic(1.0, 3.0).expect("default coefficients are valid")
    }
}

impl Potential {
    pub fn new(alpha: f64, c: f64, eps_guard: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::param(format!("alpha must be finite and nonnegative, got {alpha}")));
        }
        if !c.is_finite() {
            return Err(Error::param("smooth coefficient must be finite"));
        }
        if !(eps_guard > 0.0 && eps_guard < 0.5) {
            return Err(Error::param(format!("eps_guard must lie in (0, 0.5), got {eps_guard}")));
        }
        Ok(Self { alpha, c, eps_guard, clamps: AtomicUsize::new(0) })
    }

    pub fn logarithmic(alpha: f64, c: f64) -> Result<Self> {
        if alpha <= 0.0 {
            return Err(Error::param("logarithmic potential needs alpha > 0"));
        }
        Self::new(alpha, c, DEFAULT_EPS_GUARD)
    }

    /// The quadratic `c y (1−y)` without singular part.
    pub fn smooth(c: f64) -> Result<Self> {
        Self::new(0.0, c, DEFAULT_EPS_GUARD)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eps_guard(&self) -> f64 {
        self.eps_guard
    }

    /// Whether the logarithmic part is present, confining arguments to (0,1).
    pub fn is_singular(&self) -> bool {
        self.alpha > 0.0
    }

    pub fn clamp_count(&self) -> usize {
        self.clamps.load(Ordering::Relaxed)
    }

    pub fn reset_clamps(&self) {
        self.clamps.store(0, Ordering::Relaxed);
    }

    /// Lower and upper guard, or infinite bounds for the smooth variant.
    pub fn guard_interval(&self) -> (f64, f64) {
        if self.is_singular() {
            (self.eps_guard, 1.0 - self.eps_guard)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        }
    }

    fn admit(&self, y: f64) -> Result<f64> {
        if y.is_nan() {
            return Err(Error::InvalidArgument("potential evaluated at NaN".into()));
        }
        if !self.is_singular() {
            return if y.is_finite() { Ok(y) } else { Err(Error::Domain { value: y }) };
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Domain { value: y });
        }
        let (lo, hi) = self.guard_interval();
        if y < lo || y > hi {
            self.clamps.fetch_add(1, Ordering::Relaxed);
            Ok(y.clamp(lo, hi))
        } else {
            Ok(y)
        }
    }

    /// Derivative of the given order (0 to 3) of `f₁ + f₂`.
    pub fn eval(&self, order: usize, y: f64) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidArgument(format!("derivative order {order} not available")));
        }
        let y = self.admit(y)?;
        Ok(self.singular_at(order, y) + self.smooth_at(order, y))
    }

    pub fn value(&self, y: f64) -> Result<f64> {
        self.eval(0, y)
    }

    pub fn d1(&self, y: f64) -> Result<f64> {
        self.eval(1, y)
    }

    pub fn d2(&self, y: f64) -> Result<f64> {
        self.eval(2, y)
    }

    pub fn d3(&self, y: f64) -> Result<f64> {
        self.eval(3, y)
    }

    /// Derivative of the singular part `f₁` only.
    pub fn singular(&self, order: usize, y: f64) -> Result<f64> {
        if order > 3 {
            return Err(Error::InvalidArgument(format!("derivative order {order} not available")));
        }
        let y = self.admit(y)?;
        Ok(self.singular_at(order, y))
    }

    fn singular_at(&self, order: usize, y: f64) -> f64 {
        if !self.is_singular() {
            return 0.0;
        }
        let a = self.alpha;
        let z = 1.0 - y;
        match order {
            0 => a * (y * y.ln() + z * z.ln()),
            1 => a * (y / z).ln(),
            2 => a / (y * z),
            _ => a * (2.0 * y - 1.0) / (y * y * z * z),
        }
    }

    fn smooth_at(&self, order: usize, y: f64) -> f64 {
        let c = self.c;
        match order {
            0 => c * y * (1.0 - y),
            1 => c * (1.0 - 2.0 * y),
            2 => -2.0 * c,
            _ => 0.0,
        }
    }
}

/// Outcome of [`check_assumptions`].
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// Fitted constants in `|f₁'(r)| ≤ M₁ + M₂ |g₁'(r)|`; infinite when no
    /// finite `M₂` fits.
    pub m1: f64,
    pub m2: f64,
    pub growth_bound_holds: bool,
    pub f_convex: bool,
    pub g_convex: bool,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.growth_bound_holds && self.f_convex && self.g_convex
    }
}

/// Samples of (0,1): log-spaced toward both endpoints plus a uniform sweep,
/// all inside both potentials' guard intervals.
fn assumption_samples(eps: f64) -> (Vec<f64>, Vec<f64>) {
    let mut tail = Vec::new();
    let mut k = 3.0;
    while 10f64.powf(-k) >= eps {
        let r = 10f64.powf(-k);
        tail.push(r);
        tail.push(1.0 - r);
        k += 0.25;
    }
    let bulk = (1..100).map(|i| i as f64 / 100.0).collect();
    (tail, bulk)
}

/// Fits the growth bound of the singular parts and checks their convexity on
/// sampled points. Report only; never fails.
pub fn check_assumptions(pf: &Potential, pg: &Potential) -> AssumptionReport {
    let eps = pf.eps_guard().max(pg.eps_guard()).max(1e-12);
    let (tail, bulk) = assumption_samples(eps);
    let abs_d1 = |p: &Potential, r: f64| p.singular_at(1, r).abs();

    let mut m2: f64 = 0.0;
    let mut unbounded = false;
    for &r in &tail {
        let (a, b) = (abs_d1(pf, r), abs_d1(pg, r));
        if b > 0.0 {
            m2 = m2.max(a / b);
        } else if a > 0.0 {
            unbounded = true;
        }
    }
    // The ratio must level off toward the endpoints; a ratio still growing at
    // the extreme samples has no finite M₂.
    let extreme = |r: f64| {
        let b = abs_d1(pg, r);
        if b > 0.0 { abs_d1(pf, r) / b } else { f64::INFINITY }
    };
    if let (Some(&last), Some(&prev)) = (tail.iter().rev().nth(1), tail.iter().rev().nth(3)) {
        let (q1, q0) = (extreme(last), extreme(prev));
        if q1.is_finite() && q0.is_finite() && q1 > q0 * (1.0 + 1e-3) && q1 - q0 > 1e-12 {
            unbounded = true;
        }
    }

    let (m1, m2, holds) = if unbounded || !m2.is_finite() {
        (f64::INFINITY, f64::INFINITY, false)
    } else {
        let m1 = tail
            .iter()
            .chain(&bulk)
            .map(|&r| (abs_d1(pf, r) - m2 * abs_d1(pg, r)).max(0.0))
            .fold(0.0, f64::max);
        (m1, m2, true)
    };

    let convex = |p: &Potential| {
        !p.is_singular() || tail.iter().chain(&bulk).all(|&r| p.singular_at(2, r) > 0.0)
    };
    AssumptionReport { m1, m2, growth_bound_holds: holds, f_convex: convex(pf), g_convex: convex(pg) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_pair() -> Potential {
        Potential::logarithmic(1.0, 3.0).unwrap()
    }

    #[test]
    fn first_derivative_reference_values() {
        let p = Potential::logarithmic(1.0, 0.0).unwrap();
        assert_eq!(p.d1(0.5).unwrap(), 0.0);
        let e = core::f64::consts::E;
        assert!((p.d1(e / (1.0 + e)).unwrap() - 1.0).abs() < 1e-14);
        assert!((p.d2(0.5).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn minimizers_match_bisection() {
        // Roots of ln(y/(1-y)) + 3(1-2y) = 0 away from 1/2, by plain bisection.
        let g = |y: f64| (y / (1.0 - y)).ln() + 3.0 * (1.0 - 2.0 * y);
        let bisect = |mut a: f64, mut b: f64| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if g(a) * g(m) <= 0.0 { b = m } else { a = m }
            }
            0.5 * (a + b)
        };
        let left = bisect(1e-6, 0.4);
        let right = bisect(0.6, 1.0 - 1e-6);
        assert!((left + right - 1.0).abs() < 1e-12);
        let p = default_pair();
        assert!(p.d1(left).unwrap().abs() < 1e-12);
        assert!(p.d2(left).unwrap() > 0.0);
        assert!(p.value(left).unwrap() < p.value(0.5).unwrap());
        // minima of f, not maxima: neighbouring values are larger
        assert!(p.value(left + 1e-3).unwrap() > p.value(left).unwrap());
        assert!(p.value(left - 1e-3).unwrap() > p.value(left).unwrap());
    }

    #[test]
    fn rejects_nan_and_out_of_range() {
        let p = default_pair();
        assert!(matches!(p.d1(f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(matches!(p.d1(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(p.d1(1.5), Err(Error::Domain { .. })));
        assert!(p.eval(4, 0.5).is_err());
    }

    #[test]
    fn clamps_near_endpoints_and_counts() {
        let p = default_pair();
        assert_eq!(p.clamp_count(), 0);
        let at_zero = p.d1(0.0).unwrap();
        let at_guard = p.d1(p.eps_guard()).unwrap();
        assert_eq!(at_zero, at_guard);
        assert!(p.d1(1.0).unwrap() > 0.0);
        assert_eq!(p.clamp_count(), 2);
        p.reset_clamps();
        assert_eq!(p.clamp_count(), 0);
    }

    #[test]
    fn singular_derivative_diverges_at_endpoints() {
        let p = Potential::logarithmic(1.0, 0.0).unwrap();
        for eps in [1e-3, 1e-5, 1e-8] {
            assert!(p.d1(eps).unwrap() < -(1.0 / eps).ln() / 2.0);
            assert!(p.d1(1.0 - eps).unwrap() > (1.0 / eps).ln() / 2.0);
        }
    }

    #[test]
    fn finite_differences_match_next_derivative() {
        let p = default_pair();
        for order in 0..3 {
            for &y in &[0.2, 0.5, 0.8] {
                let exact = p.eval(order + 1, y).unwrap();
                let err = |step: f64| {
                    let fd = (p.eval(order, y + step).unwrap() - p.eval(order, y - step).unwrap()) / (2.0 * step);
                    (fd - exact).abs()
                };
                let (e1, e2) = (err(1e-2), err(5e-3));
                if e1 > 1e-10 {
                    let rate = (e1 / e2).log2();
                    assert!(rate > 1.9, "order {order} at {y}: rate {rate}");
                } else {
                    assert!(e2 < 1e-9);
                }
            }
        }
    }

    #[test]
    fn symmetric_first_derivative() {
        let p = default_pair();
        for i in 1..50 {
            let y = i as f64 / 50.0;
            assert!((p.d1(y).unwrap() + p.d1(1.0 - y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_part_is_convex() {
        let p = default_pair();
        let n = 10_000;
        for i in 0..=n {
            let y = p.eps_guard() + (1.0 - 2.0 * p.eps_guard()) * i as f64 / n as f64;
            assert!(p.singular(2, y).unwrap() > 0.0);
        }
    }

    #[test]
    fn assumption_report_identical_potentials() {
        let r = check_assumptions(&default_pair(), &default_pair());
        assert!(r.passed());
        assert!(r.m1.abs() < 1e-12);
        assert!((r.m2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_report_scaled_alpha() {
        let f = Potential::logarithmic(2.0, 3.0).unwrap();
        let g = Potential::logarithmic(1.0, 3.0).unwrap();
        let r = check_assumptions(&f, &g);
        assert!(r.passed());
        assert!((r.m2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_report_fails_without_singular_surface_part() {
        let f = Potential::logarithmic(1.0, 3.0).unwrap();
        let g = Potential::smooth(3.0).unwrap();
        let r = check_assumptions(&f, &g);
        assert!(!r.growth_bound_holds);
        assert!(!r.passed());
    }

    #[test]
    fn smooth_variant_accepts_any_real() {
        let p = Potential::smooth(-0.5).unwrap();
        assert_eq!(p.d2(3.0).unwrap(), 1.0);
        assert_eq!(p.d3(-2.0).unwrap(), 0.0);
        assert_eq!(p.clamp_count(), 0);
    }
}
