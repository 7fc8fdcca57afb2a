//! Newtonian potential of a density mesh: `(1/4pi) * integral of rho / |x-y|`.
//!
//! Far cells contribute as point masses at their centers. Cells too close to
//! the evaluation point are split recursively (reusing the parent density at
//! the subcell centers); at the split-depth limit a cell is closed with the
//! potential of the uniform ball of equal volume, which is exact for the
//! self-term as the cell shrinks and keeps the integrand finite even when
//! the evaluation point is inside the cell.

use super::octree::{Cell, DensityMesh};
use super::SphereRule;
use crate::geometry::Point3;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct NearFieldRule<T> {
    /// A cell is "far" once `size <= theta_near * distance`.
    pub theta_near: T,
    /// Additional split levels granted to near cells.
    pub max_split: u32,
}

impl<T: Real> Default for NearFieldRule<T> {
    fn default() -> Self {
        Self {
            theta_near: T::of(0.3),
            max_split: 4,
        }
    }
}

#[inline]
fn inv_4pi<T: Real>() -> T {
    T::of(0.25 / std::f64::consts::PI)
}

/// Point-mass kernel with the equal-volume-ball closure for evaluation
/// points inside the ball.
#[inline]
fn kernel_contribution<T: Real>(mass: T, vol: T, r: T) -> T {
    let a = (vol * T::of(3.0 / (4.0 * std::f64::consts::PI))).cbrt();
    if r >= a {
        mass / r
    } else {
        // Uniform ball of radius a: potential profile 2*pi*rho*(a^2 - r^2/3),
        // expressed through mass = rho * vol.
        let rho = mass / vol;
        rho * T::of(2.0 * std::f64::consts::PI) * (a * a - r * r / T::of(3.0))
    }
}

fn cell_contribution<T: Real>(
    cell: &Cell<T>,
    rho: T,
    x: Point3<T>,
    rule: &NearFieldRule<T>,
    splits_left: u32,
) -> T {
    let r = cell.center.dist(x);
    if cell.size() <= rule.theta_near * r {
        return rho * cell.volume() / r;
    }
    if splits_left == 0 {
        return kernel_contribution(rho * cell.volume(), cell.volume(), r);
    }
    let h = cell.half * T::of(0.5);
    let mut acc = T::zero();
    for i in 0..8usize {
        let sx = if i & 1 == 0 { -h } else { h };
        let sy = if i & 2 == 0 { -h } else { h };
        let sz = if i & 4 == 0 { -h } else { h };
        let sub = Cell {
            center: Point3::new(cell.center.x + sx, cell.center.y + sy, cell.center.z + sz),
            half: h,
            depth: cell.depth + 1,
        };
        acc += cell_contribution(&sub, rho, x, rule, splits_left - 1);
    }
    acc
}

/// Newtonian potential of the mesh at `x`.
pub fn potential<T: Real>(mesh: &DensityMesh<T>, rule: &NearFieldRule<T>, x: Point3<T>) -> T {
    let mut acc = T::zero();
    for (cell, rho) in mesh.cells() {
        acc += cell_contribution(cell, *rho, x, rule, rule.max_split);
    }
    acc * inv_4pi()
}

/// A near-field decomposition frozen at a reference point: every piece is a
/// point mass, so the evaluated field is exactly a finite sum of `1/r`
/// kernels and is exactly harmonic away from the piece centers. Intended for
/// evaluation points outside the source support.
pub struct SplitPlan<T> {
    pieces: Vec<(Point3<T>, T)>,
}

impl<T: Real> SplitPlan<T> {
    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn eval(&self, x: Point3<T>) -> T {
        let mut acc = T::zero();
        for &(c, m) in &self.pieces {
            acc += m / c.dist(x);
        }
        acc * inv_4pi()
    }
}

fn collect_pieces<T: Real>(
    cell: &Cell<T>,
    rho: T,
    x_ref: Point3<T>,
    rule: &NearFieldRule<T>,
    splits_left: u32,
    out: &mut Vec<(Point3<T>, T)>,
) {
    let r = cell.center.dist(x_ref);
    if cell.size() <= rule.theta_near * r || splits_left == 0 {
        out.push((cell.center, rho * cell.volume()));
        return;
    }
    let h = cell.half * T::of(0.5);
    for i in 0..8usize {
        let sx = if i & 1 == 0 { -h } else { h };
        let sy = if i & 2 == 0 { -h } else { h };
        let sz = if i & 4 == 0 { -h } else { h };
        let sub = Cell {
            center: Point3::new(cell.center.x + sx, cell.center.y + sy, cell.center.z + sz),
            half: h,
            depth: cell.depth + 1,
        };
        collect_pieces(&sub, rho, x_ref, rule, splits_left - 1, out);
    }
}

/// Freeze the near-field decomposition for evaluations near `x_ref`.
pub fn potential_ref<T: Real>(
    mesh: &DensityMesh<T>,
    rule: &NearFieldRule<T>,
    x_ref: Point3<T>,
) -> SplitPlan<T> {
    let mut pieces = Vec::with_capacity(mesh.len());
    for (cell, rho) in mesh.cells() {
        collect_pieces(cell, *rho, x_ref, rule, rule.max_split, &mut pieces);
    }
    SplitPlan { pieces }
}

/// Mean of `f` over the sphere of the given center and radius.
pub fn sphere_mean<T: Real>(
    rule: &SphereRule<T>,
    center: Point3<T>,
    radius: T,
    mut f: impl FnMut(Point3<T>) -> T,
) -> T {
    let mut acc = T::zero();
    for &(s, w) in rule.points() {
        acc += f(center + s * radius) * w;
    }
    acc
}
