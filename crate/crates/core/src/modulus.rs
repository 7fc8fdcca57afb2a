//! Moduli of continuity, the two regularity integrals that control the
//! approximation constants, and boundary data on a curve.
//!
//! For a modulus `w` the two quantities of interest are
//!
//! * `C'(x)  = (1/w(x)) * integral_0^x w(t)/t dt` (the Dini integral), and
//! * `C''(x) = (x/w(x)) * integral_x^X w(t)/t^2 dt`, truncated at a domain
//!   diameter `X`.
//!
//! Both are computed by per-cell Gauss-Legendre on dyadic cells;
//! [`Modulus::verify_regularity`] takes suprema over a log grid and flags
//! divergence by the growth rate at the small end (for `w(t) = t` the second
//! integral grows like `log(X/x)` and is flagged).

use crate::geometry::{Curve, Point3};
use crate::quadrature::gauss_legendre_01;
use crate::scalar::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Modulus of continuity. `PowerLog` is the monotone envelope of
/// `t^alpha * (1 + ln(1/t))`, which increases up to `t* = e^(1 - 1/alpha)`
/// and is frozen at its maximum beyond it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Modulus<T> {
    Power { alpha: T },
    PowerLog { alpha: T },
}

impl<T: Real> Modulus<T> {
    pub fn power(alpha: T) -> Self {
        assert!(
            alpha > T::zero() && alpha <= T::one(),
            "power modulus needs 0 < alpha <= 1"
        );
        Modulus::Power { alpha }
    }

    pub fn power_log(alpha: T) -> Self {
        assert!(
            alpha > T::zero() && alpha < T::one(),
            "power-log modulus needs 0 < alpha < 1"
        );
        Modulus::PowerLog { alpha }
    }

    /// The stationary point of the raw power-log profile.
    fn power_log_knee(alpha: T) -> T {
        (T::one() - T::one() / alpha).exp()
    }

    pub fn eval(&self, t: T) -> T {
        let t = t.max(T::zero());
        if t == T::zero() {
            return T::zero();
        }
        match *self {
            Modulus::Power { alpha } => t.powf(alpha),
            Modulus::PowerLog { alpha } => {
                let knee = Self::power_log_knee(alpha);
                let s = t.min(knee);
                s.powf(alpha) * (T::one() + (T::one() / s).ln())
            }
        }
    }

    /// `integral_0^x w(t)/t dt`, by dyadic cells descending from `x` with
    /// 8-point Gauss-Legendre per cell; the geometric tail is extrapolated
    /// from the last cell ratio and must fall below `rel_tol` of the
    /// accumulated value.
    pub fn f_star(&self, x: T, rel_tol: T) -> T {
        assert!(x > T::zero());
        let gl: Vec<(T, T)> = gauss_legendre_01(8);
        let mut acc = T::zero();
        let mut hi = x;
        let mut prev_cell = T::infinity();
        for _ in 0..1100 {
            let lo = hi * T::of(0.5);
            let len = hi - lo;
            let mut cell = T::zero();
            for &(u, w) in &gl {
                let t = lo + len * u;
                cell += w * self.eval(t) / t;
            }
            cell *= len;
            acc += cell;
            if prev_cell.is_finite() && prev_cell > T::zero() {
                let ratio = cell / prev_cell;
                if ratio < T::of(0.999) {
                    let tail = cell * ratio / (T::one() - ratio);
                    if tail <= rel_tol * acc {
                        return acc + tail;
                    }
                }
            }
            prev_cell = cell;
            hi = lo;
        }
        acc
    }

    /// `integral_x^xmax w(t)/t^2 dt` by dyadic cells ascending from `x`.
    fn kernel_tail(&self, x: T, x_max: T) -> T {
        let gl: Vec<(T, T)> = gauss_legendre_01(8);
        let mut acc = T::zero();
        let mut lo = x;
        while lo < x_max {
            let hi = (lo * T::of(2.0)).min(x_max);
            let len = hi - lo;
            let mut cell = T::zero();
            for &(u, w) in &gl {
                let t = lo + len * u;
                cell += w * self.eval(t) / (t * t);
            }
            acc += cell * len;
            lo = hi;
        }
        acc
    }

    /// `C'(x)`: the Dini integral normalized by `w(x)`.
    pub fn c_prime_at(&self, x: T) -> T {
        self.f_star(x, T::of(1e-12)) / self.eval(x)
    }

    /// `C''(x)`: the truncated second regularity integral normalized by
    /// `w(x)/x`.
    pub fn c_dprime_at(&self, x: T, x_max: T) -> T {
        x * self.kernel_tail(x, x_max) / self.eval(x)
    }

    /// Suprema of `C'` and `C''` over a log grid on `[x_min, x_max]`, with
    /// divergence flags from the per-decade growth at the small end.
    pub fn verify_regularity(&self, x_min: T, x_max: T, per_decade: usize) -> RegularityReport<T> {
        assert!(x_min > T::zero() && x_min < x_max);
        assert!(per_decade >= 1);
        let decades = (x_max / x_min).as_f64().log10();
        let steps = (decades * per_decade as f64).ceil() as usize;
        let mut c_prime = T::zero();
        let mut c_dprime = T::zero();
        for i in 0..=steps {
            let f = (i as f64) / (steps as f64);
            let x = x_min * (x_max / x_min).powf(T::of(f));
            c_prime = c_prime.max(self.c_prime_at(x));
            c_dprime = c_dprime.max(self.c_dprime_at(x, x_max));
        }
        // Growth per decade at the small end; a convergent integral flattens
        // out while a log-divergent one keeps a constant positive slope.
        let x2 = x_min * T::of(100.0);
        let slope_prime = (self.c_prime_at(x_min) - self.c_prime_at(x2)) / T::of(2.0);
        let slope_dprime =
            (self.c_dprime_at(x_min, x_max) - self.c_dprime_at(x2, x_max)) / T::of(2.0);
        let threshold = |v: T| T::of(0.02) * v.max(T::one());
        RegularityReport {
            c_prime,
            c_dprime,
            c_prime_diverges: slope_prime > threshold(c_prime),
            c_dprime_diverges: slope_dprime > threshold(c_dprime),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RegularityReport<T> {
    pub c_prime: T,
    pub c_dprime: T,
    pub c_prime_diverges: bool,
    pub c_dprime_diverges: bool,
}

impl<T> RegularityReport<T> {
    pub fn ok(&self) -> bool {
        !self.c_prime_diverges && !self.c_dprime_diverges
    }
}

/// Scalar data on a curve, evaluated at curve points.
#[derive(Clone)]
pub struct BoundaryData<T> {
    name: String,
    func: Arc<dyn Fn(Point3<T>) -> T + Send + Sync>,
}

impl<T: Real> BoundaryData<T> {
    pub fn new(name: impl Into<String>, func: impl Fn(Point3<T>) -> T + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
        }
    }

    #[inline]
    pub fn eval(&self, p: Point3<T>) -> T {
        (self.func)(p)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Least `M` with `|f(p) - f(q)| <= M * w(|p - q|)` over a sampled pair
    /// family: uniform random pairs plus dyadic-scale close pairs (which is
    /// where Hölder quotients peak).
    pub fn holder_seminorm(
        &self,
        curve: &Curve<T>,
        modulus: &Modulus<T>,
        pairs: usize,
        seed: u64,
    ) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = curve.total_length();
        let mut sup = T::zero();
        let consider = |s1: T, s2: T, sup: &mut T| {
            let p1 = curve.point_at_clamped(s1);
            let p2 = curve.point_at_clamped(s2);
            let chord = p1.dist(p2);
            let w = modulus.eval(chord);
            if w > T::zero() {
                let q = (self.eval(p1) - self.eval(p2)).abs() / w;
                if q > *sup {
                    *sup = q;
                }
            }
        };
        let scales = 40usize;
        for _ in 0..(pairs / (scales + 1)).max(1) {
            let s1 = T::of(rng.gen::<f64>()) * total;
            let s2 = T::of(rng.gen::<f64>()) * total;
            consider(s1, s2, &mut sup);
            for j in 0..scales {
                let gap = total * T::exp2i(-(j as i32)) * T::of(rng.gen::<f64>());
                consider(s1, (s1 + gap).min(total), &mut sup);
            }
        }
        sup
    }
}

/// Built-in boundary data for the CLI and the test fixtures. `alpha` is used
/// by the power-law profiles.
pub fn builtin_boundary<T: Real>(name: &str, alpha: T) -> Option<BoundaryData<T>> {
    match name {
        "coordinate" => Some(BoundaryData::new("coordinate", |p: Point3<T>| p.x)),
        "constant" => Some(BoundaryData::new("constant", |_: Point3<T>| T::one())),
        "abs_sqrt" => Some(BoundaryData::new("abs_sqrt", |p: Point3<T>| {
            p.x.abs().sqrt()
        })),
        "abs_power" => Some(BoundaryData::new("abs_power", move |p: Point3<T>| {
            p.x.abs().powf(alpha)
        })),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin_curve;

    #[test]
    fn power_eval_and_monotonicity() {
        let w = Modulus::power(0.5f64);
        assert_eq!(w.eval(0.0), 0.0);
        assert!((w.eval(0.25) - 0.5).abs() < 1e-15);
        let wl = Modulus::power_log(0.5f64);
        let mut prev = 0.0;
        for i in 1..=1000 {
            let t = i as f64 / 1000.0 * 2.0;
            let v = wl.eval(t);
            assert!(v >= prev - 1e-15, "power-log envelope dips at t={t}");
            prev = v;
        }
    }

    #[test]
    fn doubling_property() {
        for w in [Modulus::power(0.3f64), Modulus::power(0.9), Modulus::power_log(0.5)] {
            for i in 1..200 {
                let t = i as f64 * 1e-3;
                assert!(w.eval(2.0 * t) <= 2.0 * w.eval(t) + 1e-14);
            }
        }
    }

    #[test]
    fn power_log_plateaus_past_knee() {
        let alpha = 0.5f64;
        let w = Modulus::power_log(alpha);
        let knee = (1.0 - 1.0 / alpha).exp();
        let peak = knee.powf(alpha) * (1.0 + (1.0 / knee).ln());
        assert!((w.eval(knee) - peak).abs() < 1e-14);
        assert!((w.eval(2.0 * knee) - peak).abs() < 1e-14);
        assert!(w.eval(0.9 * knee) < peak);
    }

    #[test]
    fn f_star_matches_power_closed_form() {
        for alpha in [0.3f64, 0.5, 0.9] {
            let w = Modulus::power(alpha);
            for x in [1e-6f64, 0.37, 1.0, 2.5] {
                let got = w.f_star(x, 1e-13);
                let exact = x.powf(alpha) / alpha;
                assert!(
                    (got - exact).abs() <= 1e-10 * exact,
                    "alpha={alpha}, x={x}: {got} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn f_star_matches_power_log_closed_form_below_knee() {
        // For x below the knee the envelope equals the raw profile on the
        // whole integration range and integrates in closed form:
        // x^a * (1/a + ln(1/x)/a + 1/a^2).
        let alpha = 0.5f64;
        let w = Modulus::power_log(alpha);
        for x in [0.05f64, 0.1, 0.3] {
            let got = w.f_star(x, 1e-13);
            let exact = x.powf(alpha)
                * (1.0 / alpha + (1.0 / x).ln() / alpha + 1.0 / (alpha * alpha));
            assert!(
                (got - exact).abs() <= 1e-9 * exact,
                "x={x}: {got} vs {exact}"
            );
        }
    }

    #[test]
    fn regularity_constants_for_power_moduli() {
        // C' = 1/alpha exactly; C'' -> 1/(1-alpha) as the grid reaches far
        // below the truncation scale.
        let w = Modulus::power(0.5f64);
        let rep = w.verify_regularity(1e-12, 1.0, 4);
        assert!(rep.ok());
        assert!((rep.c_prime - 2.0).abs() <= 1e-6, "c' = {}", rep.c_prime);
        assert!((rep.c_dprime - 2.0).abs() <= 1e-5, "c'' = {}", rep.c_dprime);

        // Slow convergence case: (x/X)^(1-alpha) with alpha = 0.9 needs a
        // grid down to 1e-30 to get within a percent.
        let w = Modulus::power(0.9f64);
        let rep = w.verify_regularity(1e-30, 1.0, 2);
        assert!(rep.ok(), "alpha=0.9 must not be flagged divergent");
        assert!(
            (rep.c_prime - 1.0 / 0.9).abs() <= 1e-6,
            "c' = {}",
            rep.c_prime
        );
        assert!((rep.c_dprime - 10.0).abs() <= 0.2, "c'' = {}", rep.c_dprime);
    }

    #[test]
    fn lipschitz_modulus_is_flagged_divergent() {
        // w(t) = t: the second integral is log-divergent, the first is fine.
        let w = Modulus::power(1.0f64);
        let rep = w.verify_regularity(1e-12, 1.0, 2);
        assert!(!rep.c_prime_diverges);
        assert!((rep.c_prime - 1.0).abs() <= 1e-6);
        assert!(rep.c_dprime_diverges, "log divergence must be detected");
        assert!(!rep.ok());
    }

    #[test]
    fn holder_seminorm_of_sqrt_profile() {
        // f = sqrt(|x|) on the segment: |f(p)-f(q)| <= sqrt(|p-q|) with
        // equality approached at pairs straddling zero, so the seminorm is
        // 1 (and must not be overestimated).
        let curve = Curve::build(builtin_curve("segment").unwrap(), 1e-9).unwrap();
        let f = builtin_boundary::<f64>("abs_sqrt", 0.5).unwrap();
        let m = Modulus::power(0.5);
        let sup = f.holder_seminorm(&curve, &m, 60_000, 17);
        assert!(sup <= 1.0 + 1e-9, "seminorm {sup} exceeds 1");
        assert!(sup >= 0.95, "seminorm {sup} misses the near-extremal pairs");
    }

    #[test]
    fn holder_seminorm_of_coordinate_under_sqrt_modulus_small_scale() {
        // f = x under w = sqrt(t): quotient sqrt(t) -> sup at the largest
        // gap; on the segment the diameter is 2 so the seminorm is sqrt(2).
        let curve = Curve::build(builtin_curve("segment").unwrap(), 1e-9).unwrap();
        let f = builtin_boundary::<f64>("coordinate", 0.5).unwrap();
        let m = Modulus::power(0.5);
        let sup = f.holder_seminorm(&curve, &m, 40_000, 3);
        assert!((sup - 2f64.sqrt()).abs() <= 2e-2, "seminorm {sup}");
    }
}
