//! Mean-value quadrature on the unit sphere.
//!
//! Low degrees use the classical octahedron/cube point sets (6, 14, and 26
//! points, exact through degrees 3, 5, and 7); higher degrees fall back to a
//! Gauss-Legendre x uniform-azimuth product grid. Weights are normalized so
//! the rule computes the *mean* over the sphere (weights sum to one).

use super::gauss_legendre_01;
use crate::geometry::Vec3;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct SphereRule<T> {
    points: Vec<(Vec3<T>, T)>,
    degree: usize,
}

impl<T: Real> SphereRule<T> {
    /// Smallest built-in rule exact for spherical polynomials of the given
    /// total degree.
    pub fn degree(d: usize) -> Self {
        match d {
            0..=3 => Self::octahedron_6(),
            4..=5 => Self::points_14(),
            6..=7 => Self::points_26(),
            _ => Self::product_gauss(d / 2 + 1),
        }
    }

    fn octahedron_6() -> Self {
        let w = T::of(1.0 / 6.0);
        let points = axis_points().into_iter().map(|p| (p, w)).collect();
        Self { points, degree: 3 }
    }

    fn points_14() -> Self {
        let mut points: Vec<(Vec3<T>, T)> = axis_points()
            .into_iter()
            .map(|p| (p, T::of(1.0 / 15.0)))
            .collect();
        points.extend(corner_points().into_iter().map(|p| (p, T::of(3.0 / 40.0))));
        Self { points, degree: 5 }
    }

    fn points_26() -> Self {
        let mut points: Vec<(Vec3<T>, T)> = axis_points()
            .into_iter()
            .map(|p| (p, T::of(1.0 / 21.0)))
            .collect();
        points.extend(edge_points().into_iter().map(|p| (p, T::of(4.0 / 105.0))));
        points.extend(corner_points().into_iter().map(|p| (p, T::of(9.0 / 280.0))));
        Self { points, degree: 7 }
    }

    /// Product rule: `m`-point Gauss-Legendre in cos(theta) times `2m`
    /// equally spaced azimuths; exact through degree `2m - 1`.
    pub fn product_gauss(m: usize) -> Self {
        let gl: Vec<(T, T)> = gauss_legendre_01(m);
        let nphi = 2 * m;
        let mut points = Vec::with_capacity(m * nphi);
        let wphi = T::of(1.0 / nphi as f64);
        for &(x, w) in &gl {
            let u = x * T::of(2.0) - T::one(); // cos(theta) in [-1, 1]
            let s = (T::one() - u * u).max(T::zero()).sqrt();
            for k in 0..nphi {
                let phi = T::of(std::f64::consts::TAU * (k as f64 + 0.5) / nphi as f64);
                points.push((Vec3::new(s * phi.cos(), s * phi.sin(), u), w * wphi));
            }
        }
        Self {
            points,
            degree: 2 * m - 1,
        }
    }

    #[inline]
    pub fn points(&self) -> &[(Vec3<T>, T)] {
        &self.points
    }

    #[inline]
    pub fn exact_degree(&self) -> usize {
        self.degree
    }

    /// Mean of `f` over the unit sphere.
    pub fn mean(&self, mut f: impl FnMut(Vec3<T>) -> T) -> T {
        let mut acc = T::zero();
        for &(p, w) in &self.points {
            acc += f(p) * w;
        }
        acc
    }
}

fn axis_points<T: Real>() -> Vec<Vec3<T>> {
    let o = T::one();
    let z = T::zero();
    vec![
        Vec3::new(o, z, z),
        Vec3::new(-o, z, z),
        Vec3::new(z, o, z),
        Vec3::new(z, -o, z),
        Vec3::new(z, z, o),
        Vec3::new(z, z, -o),
    ]
}

fn corner_points<T: Real>() -> Vec<Vec3<T>> {
    let c = T::of(1.0 / 3f64.sqrt());
    let mut v = Vec::with_capacity(8);
    for &sx in &[T::one(), -T::one()] {
        for &sy in &[T::one(), -T::one()] {
            for &sz in &[T::one(), -T::one()] {
                v.push(Vec3::new(c * sx, c * sy, c * sz));
            }
        }
    }
    v
}

fn edge_points<T: Real>() -> Vec<Vec3<T>> {
    let c = T::of(1.0 / 2f64.sqrt());
    let z = T::zero();
    let mut v = Vec::with_capacity(12);
    for &(a, b) in &[(T::one(), T::one()), (T::one(), -T::one()), (-T::one(), T::one()), (-T::one(), -T::one())] {
        v.push(Vec3::new(c * a, c * b, z));
        v.push(Vec3::new(c * a, z, c * b));
        v.push(Vec3::new(z, c * a, c * b));
    }
    v
}
