//! Dyadic node families on a curve and the nested neighborhood covers they
//! generate.
//!
//! Level `n` places `2^n + 1` equal-arclength nodes on the curve; the level
//! cover is the union of closed balls of radius `2 * lambda(n)` around them,
//! where `lambda(n) = 2^-n * total_length`. Covers shrink as `n` grows (each
//! level-`n+1` ball lies inside some level-`n` ball), which is what makes
//! [`DyadicCover::cover_level`] a binary search. The difference of two
//! consecutive covers is the level shell; points in it sit at a distance
//! between `0.75 * lambda(n)` and `2 * lambda(n)` from the curve.

use super::curve::{Curve, CurveError};
use super::Point3;
use crate::scalar::Real;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum CoverError {
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Index of a first-hit cell: node `k` of level `level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CellRef {
    pub level: usize,
    pub k: usize,
}

/// Where a point sits relative to level `n` of the cover hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoverMembership {
    /// Inside the level-`n` cover.
    pub in_tilde: bool,
    /// Inside the level-`n` cover but outside the level-`n+1` cover.
    pub in_shell: bool,
    /// First-hit cell index at level `n` (smallest `k` whose ball contains
    /// the point), when inside the level-`n` cover.
    pub cell: Option<usize>,
}

/// The shell index of a positive distance: the unique `n` with
/// `2^(n-1) < d <= 2^n`.
pub fn sigma_shell<T: Real>(d: T) -> i32 {
    debug_assert!(d > T::zero(), "sigma_shell needs d > 0");
    let mut n = d.as_f64().log2().ceil() as i32;
    // Fix up boundary roundoff so the defining inequalities hold exactly.
    while T::exp2i(n - 1) >= d {
        n -= 1;
    }
    while T::exp2i(n) < d {
        n += 1;
    }
    n
}

/// Equal-arclength dyadic nodes for levels `0..=n_max`, with cover, shell,
/// and first-hit cell queries.
pub struct DyadicCover<T> {
    curve: Arc<Curve<T>>,
    n_max: usize,
    nodes: Vec<Vec<Point3<T>>>,
}

impl<T: Real> DyadicCover<T> {
    pub fn new(curve: Arc<Curve<T>>, n_max: usize) -> Result<Self, CoverError> {
        let mut nodes = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            nodes.push(curve.subdivide(n)?);
        }
        Ok(Self { curve, n_max, nodes })
    }

    #[inline]
    pub fn curve(&self) -> &Arc<Curve<T>> {
        &self.curve
    }

    #[inline]
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Level spacing `2^-n * total_length`.
    #[inline]
    pub fn lambda(&self, n: usize) -> T {
        self.curve.level_scale(n)
    }

    /// Ball radius of the level cover, `2 * lambda(n)`.
    #[inline]
    pub fn cover_radius(&self, n: usize) -> T {
        self.lambda(n) * T::of(2.0)
    }

    #[inline]
    pub fn nodes(&self, n: usize) -> &[Point3<T>] {
        &self.nodes[n]
    }

    #[inline]
    pub fn node(&self, n: usize, k: usize) -> Point3<T> {
        self.nodes[n][k]
    }

    /// Arclength of node `k` at level `n`.
    #[inline]
    pub fn node_arc(&self, n: usize, k: usize) -> T {
        self.curve.total_length() * T::of(k as f64) / T::of((1u64 << n) as f64)
    }

    /// Smallest `k` whose level-`n` ball contains `p` (closed, with a 1e-12
    /// relative slack on the radius).
    pub fn first_hit(&self, n: usize, p: Point3<T>) -> Option<usize> {
        let near = self.curve.nearest(p);
        self.first_hit_at(n, p, near.dist, near.arc)
    }

    fn first_hit_at(&self, n: usize, p: Point3<T>, d: T, foot_arc: T) -> Option<usize> {
        let r = self.cover_radius(n) * (T::one() + T::of(1e-12));
        if d > r {
            return None;
        }
        let pts = &self.nodes[n];
        if pts.len() <= 64 {
            return pts.iter().position(|m| m.dist(p) <= r);
        }
        // Any node whose ball contains p has arclength within
        // C0 * (2*lambda(n) + d) of the foot of p (chord-arc bound applied
        // to the node and the foot).
        let c0 = self.curve.chord_arc_constant();
        let lam = self.lambda(n);
        let w = c0 * (self.cover_radius(n) + d) * T::of(1.25) + lam;
        let lo = ((foot_arc - w) / lam).floor().as_f64().max(0.0) as usize;
        let hi = (((foot_arc + w) / lam).ceil().as_f64() as usize).min(pts.len() - 1);
        (lo..=hi).find(|&k| pts[k].dist(p) <= r)
    }

    /// Whether `p` lies in the level-`n` cover.
    #[inline]
    pub fn in_cover(&self, n: usize, p: Point3<T>) -> bool {
        self.first_hit(n, p).is_some()
    }

    /// Deepest level (up to `n_max`) whose cover contains `p`, found by
    /// binary search over the nested levels.
    pub fn cover_level(&self, p: Point3<T>) -> Option<usize> {
        let near = self.curve.nearest(p);
        let hit = |n: usize| self.first_hit_at(n, p, near.dist, near.arc).is_some();
        if !hit(0) {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.n_max);
        if hit(hi) {
            return Some(hi);
        }
        // Invariant: hit(lo) && !hit(hi).
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if hit(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Level-`n` membership of `p`. Needs `n < n_max` so that the shell (the
    /// set difference against level `n+1`) is defined.
    pub fn membership(&self, n: usize, p: Point3<T>) -> CoverMembership {
        assert!(n < self.n_max, "membership needs n < n_max");
        let near = self.curve.nearest(p);
        let cell = self.first_hit_at(n, p, near.dist, near.arc);
        let in_tilde = cell.is_some();
        let in_next = self.first_hit_at(n + 1, p, near.dist, near.arc).is_some();
        CoverMembership {
            in_tilde,
            in_shell: in_tilde && !in_next,
            cell,
        }
    }

    /// First-hit cell of `p` at its own cover depth: the level-`n` shell cell
    /// for points in a shell, capped at `n_max` for points deeper than the
    /// finest cover.
    pub fn owning_cell(&self, p: Point3<T>) -> Option<CellRef> {
        let near = self.curve.nearest(p);
        let level = self.cover_level(p)?;
        let k = self
            .first_hit_at(level, p, near.dist, near.arc)
            .expect("cover_level certifies membership");
        Some(CellRef { level, k })
    }

    /// First-hit coarse cell two levels up: smallest `k` with `p` inside the
    /// ball of radius `2 * lambda(n-2)` around node `k` of level `n-2`.
    pub fn beta_cell(&self, n: usize, p: Point3<T>) -> Option<usize> {
        assert!(n >= 2, "beta cells exist for n >= 2");
        self.first_hit(n - 2, p)
    }
}
