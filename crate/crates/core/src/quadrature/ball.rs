//! Mean-value quadrature over balls: a radial Gauss-Legendre rule with the
//! `3 r^2` volume weight folded into the weights, crossed with a sphere rule.

use super::{gauss_legendre_01, SphereRule};
use crate::geometry::{Point3, Vec3};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct BallRule<T> {
    /// Offsets within the unit ball and mean weights (summing to one).
    points: Vec<(Vec3<T>, T)>,
    degree: usize,
}

impl<T: Real> BallRule<T> {
    /// Rule exact for polynomials of the given total degree. The radial
    /// factor integrates `3 r^2 g(r)` with `deg g <= d`, which needs
    /// `2m - 1 >= d + 2` Gauss-Legendre points.
    pub fn degree(d: usize) -> Self {
        let m = (d + 4) / 2; // ceil((d + 3) / 2)
        let radial: Vec<(T, T)> = gauss_legendre_01(m);
        let sphere = SphereRule::degree(d);
        let three = T::of(3.0);
        let mut points = Vec::with_capacity(m * sphere.points().len());
        for &(r, wr) in &radial {
            let w_shell = wr * three * r * r;
            for &(s, ws) in sphere.points() {
                points.push((s * r, w_shell * ws));
            }
        }
        Self { points, degree: d }
    }

    #[inline]
    pub fn points(&self) -> &[(Vec3<T>, T)] {
        &self.points
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn exact_degree(&self) -> usize {
        self.degree
    }

    /// Mean of `f` over the ball of the given center and radius.
    pub fn mean(&self, center: Point3<T>, radius: T, mut f: impl FnMut(Point3<T>) -> T) -> T {
        let mut acc = T::zero();
        for &(o, w) in &self.points {
            acc += f(center + o * radius) * w;
        }
        acc
    }
}
