//! Polyline curves in R^3 with chord-arc certification, arclength
//! parameterization, accelerated distance queries, and the dyadic node /
//! cover combinatorics the extension and approximant are built on.

mod cover;
mod curve;
pub mod io;

pub use cover::{sigma_shell, CellRef, CoverError, CoverMembership, DyadicCover};
pub use curve::{
    builtin_curve, segment_distance, Curve, CurveError, Nearest, DEFAULT_PAIR_BUDGET,
};

use crate::scalar::Real;
use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn to(self, other: Point3<T>) -> Vec3<T> {
        Vec3::new(other.x - self.x, other.y - self.y, other.z - self.z)
    }

    #[inline]
    pub fn dist2(self, other: Point3<T>) -> T {
        self.to(other).norm2()
    }

    #[inline]
    pub fn dist(self, other: Point3<T>) -> T {
        self.dist2(other).sqrt()
    }

    #[inline]
    pub fn lerp(self, other: Point3<T>, t: T) -> Point3<T> {
        self + self.to(other) * t
    }

    #[inline]
    pub fn as_vec(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, other: Vec3<T>) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    #[inline]
    pub fn cross(self, other: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    #[inline]
    pub fn norm2(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm2().sqrt()
    }

    /// Unit vector; returns `None` for vectors shorter than `tiny`.
    pub fn normalized(self, tiny: T) -> Option<Vec3<T>> {
        let n = self.norm();
        if n <= tiny {
            None
        } else {
            Some(self / n)
        }
    }

    #[inline]
    pub fn as_point(self) -> Point3<T> {
        Point3::new(self.x, self.y, self.z)
    }
}

impl<T: Real> Add<Vec3<T>> for Point3<T> {
    type Output = Point3<T>;
    #[inline]
    fn add(self, v: Vec3<T>) -> Point3<T> {
        Point3::new(self.x + v.x, self.y + v.y, self.z + v.z)
    }
}

impl<T: Real> Sub<Vec3<T>> for Point3<T> {
    type Output = Point3<T>;
    #[inline]
    fn sub(self, v: Vec3<T>) -> Point3<T> {
        Point3::new(self.x - v.x, self.y - v.y, self.z - v.z)
    }
}

impl<T: Real> Sub<Point3<T>> for Point3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn sub(self, p: Point3<T>) -> Vec3<T> {
        p.to(self)
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn add(self, o: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn sub(self, o: Vec3<T>) -> Vec3<T> {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn mul(self, s: T) -> Vec3<T> {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn div(self, s: T) -> Vec3<T> {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Vec3<T>;
    #[inline]
    fn neg(self) -> Vec3<T> {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug)]
pub struct Aabb<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn of_points<'a>(pts: impl IntoIterator<Item = &'a Point3<T>>) -> Option<Self>
    where
        T: 'a,
    {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in it {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.min.z = bb.min.z.min(p.z);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
            bb.max.z = bb.max.z.max(p.z);
        }
        Some(bb)
    }

    pub fn inflate(mut self, m: T) -> Self {
        let v = Vec3::new(m, m, m);
        self.min = self.min - v;
        self.max = self.max + v;
        self
    }

    pub fn center(&self) -> Point3<T> {
        self.min.lerp(self.max, T::of(0.5))
    }

    pub fn contains(&self, p: Point3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn diag(&self) -> T {
        self.min.dist(self.max)
    }

    /// Half-width of the smallest cube centered at `center()` containing the box.
    pub fn cube_half(&self) -> T {
        let c = self.center();
        let dx = (self.max.x - c.x).abs();
        let dy = (self.max.y - c.y).abs();
        let dz = (self.max.z - c.z).abs();
        dx.max(dy).max(dz)
    }
}
