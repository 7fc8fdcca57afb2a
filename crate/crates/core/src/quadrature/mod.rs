//! Quadrature: Gauss-Legendre line rules, sphere and ball mean rules, an
//! adaptive octree mesh over exclusion regions, and Newtonian potential
//! evaluation over such meshes.

mod ball;
mod octree;
mod potential;
mod sphere;

pub use ball::BallRule;
pub use octree::{Cell, DensityMesh, Exclusion, MeshError, OctreeMesh, OctreeParams};
pub use potential::{potential, potential_ref, sphere_mean, NearFieldRule, SplitPlan};
pub use sphere::SphereRule;

use crate::scalar::Real;

/// Gauss-Legendre nodes and weights on `[0, 1]`, exact for polynomials of
/// degree `2m - 1`. Roots are found by Newton iteration on the Legendre
/// polynomial in double precision and then converted.
pub fn gauss_legendre_01<T: Real>(m: usize) -> Vec<(T, T)> {
    assert!(m >= 1);
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        // Initial guess (Abramowitz & Stegun 22.16.6), then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..64 {
            let (p, dp) = legendre_and_deriv(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((T::of(0.5 * (x + 1.0)), T::of(0.5 * w)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Legendre polynomial `P_m` and its derivative at `x`, by the three-term
/// recurrence.
fn legendre_and_deriv(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0f64, x);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_matches_published_two_and_three_point_rules() {
        let r2: Vec<(f64, f64)> = gauss_legendre_01(2);
        let x = 0.5 - 0.5 / 3f64.sqrt();
        assert!((r2[0].0 - x).abs() < 1e-15);
        assert!((r2[1].0 - (1.0 - x)).abs() < 1e-15);
        assert!((r2[0].1 - 0.5).abs() < 1e-15);

        let r3: Vec<(f64, f64)> = gauss_legendre_01(3);
        assert!((r3[1].0 - 0.5).abs() < 1e-15);
        assert!((r3[0].0 - 0.5 * (1.0 - (0.6f64).sqrt())).abs() < 1e-15);
        assert!((r3[1].1 - 4.0 / 9.0).abs() < 1e-15);
        assert!((r3[0].1 - 5.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn gl_monomial_exactness() {
        for m in 1..=20usize {
            let rule: Vec<(f64, f64)> = gauss_legendre_01(m);
            let wsum: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-14, "m={m} weight sum {wsum}");
            for p in 0..=(2 * m - 1) {
                let approx: f64 = rule.iter().map(|&(x, w)| w * x.powi(p as i32)).sum();
                let exact = 1.0 / (p as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 2e-14,
                    "m={m}, x^{p}: {approx} vs {exact}"
                );
            }
        }
    }
}
