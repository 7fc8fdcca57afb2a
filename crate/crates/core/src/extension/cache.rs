//! Lazily materialized field caches on distance-banded lattices.
//!
//! Evaluating the extension fields exactly means nested ball averages whose
//! cost multiplies at every stage. The caches break that nesting: each field
//! is tabulated on a lattice whose spacing tracks the distance to the curve
//! (spacing `theta * 2^(b-1)` on the dyadic band `2^(b-1) < d <= 2^b`), and
//! evaluated by tricubic Catmull-Rom interpolation over a 4x4x4 corner
//! block. Catmull-Rom is C1 across cell faces and reproduces quadratics, so
//! finite differences of cached fields stay usable for gradient and
//! Laplacian estimates.
//!
//! Corner values are pure functions of position, so the cached field is
//! deterministic regardless of materialization order or thread count. Leaf
//! blocks and corners are interned in concurrent maps; values near the curve
//! are clamped to a floor band to keep the lattice population finite as
//! `d -> 0`.

use crate::geometry::{sigma_shell, Point3};
use crate::scalar::Real;
use dashmap::DashMap;
use std::sync::Arc;

type Key = (i32, i64, i64, i64);

pub struct LatticeCache<T> {
    theta: T,
    floor_band: i32,
    leaves: DashMap<Key, Arc<[T; 64]>>,
    corners: DashMap<Key, T>,
}

impl<T: Real> LatticeCache<T> {
    /// `theta` is the spacing-to-distance ratio (cells are never coarser
    /// than `theta * d`); `floor_dist` clamps the refinement as `d -> 0`.
    pub fn new(theta: T, floor_dist: T) -> Self {
        assert!(theta > T::zero() && floor_dist > T::zero());
        Self {
            theta,
            floor_band: sigma_shell(floor_dist),
            leaves: DashMap::new(),
            corners: DashMap::new(),
        }
    }

    #[inline]
    fn band(&self, d: T) -> i32 {
        if d <= T::zero() {
            self.floor_band
        } else {
            sigma_shell(d).max(self.floor_band)
        }
    }

    #[inline]
    fn spacing(&self, band: i32) -> T {
        self.theta * T::exp2i(band - 1)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn corner_count(&self) -> usize {
        self.corners.len()
    }

    /// Interpolated value of the cached field at `p`. `d` is the distance of
    /// `p` to the curve (a nearby value is fine: it only selects the band).
    /// `exact` supplies field values at lattice corners on cache misses.
    ///
    /// Near a band boundary the two adjacent lattices are blended linearly
    /// in log-distance, so the returned field is continuous across bands
    /// (each lattice alone would jump by its interpolation error there,
    /// which difference quotients then amplify by the inverse step).
    pub fn eval(&self, p: Point3<T>, d: T, exact: &impl Fn(Point3<T>) -> T) -> T {
        const BLEND_HALF_WIDTH: f64 = 0.1; // in log2(distance)
        let lo = self.band(d);
        if d > T::zero() {
            let u = d.as_f64().log2();
            let edge = u.round();
            let s = (u - edge) / (2.0 * BLEND_HALF_WIDTH) + 0.5;
            if (0.0..1.0).contains(&s) {
                // bands meet at 2^edge: below it band `edge`, above `edge+1`
                let (ba, bb) = (
                    (edge as i32).max(self.floor_band),
                    (edge as i32 + 1).max(self.floor_band),
                );
                if ba != bb {
                    let va = self.eval_on(ba, p, exact);
                    let vb = self.eval_on(bb, p, exact);
                    return va + (vb - va) * T::of(s);
                }
            }
        }
        self.eval_on(lo, p, exact)
    }

    fn eval_on(&self, band: i32, p: Point3<T>, exact: &impl Fn(Point3<T>) -> T) -> T {
        let h = self.spacing(band);
        let (ux, uy, uz) = (p.x / h, p.y / h, p.z / h);
        let (fx, fy, fz) = (ux.floor(), uy.floor(), uz.floor());
        let key = (
            band,
            fx.as_f64() as i64,
            fy.as_f64() as i64,
            fz.as_f64() as i64,
        );
        let block = match self.leaves.get(&key) {
            Some(b) => b.clone(),
            None => {
                let b = Arc::new(self.materialize(key, h, exact));
                self.leaves.insert(key, b.clone());
                b
            }
        };
        tricubic(&block, ux - fx, uy - fy, uz - fz)
    }

    fn materialize(&self, key: Key, h: T, exact: &impl Fn(Point3<T>) -> T) -> [T; 64] {
        let (band, i, j, k) = key;
        let mut block = [T::zero(); 64];
        for (idx, slot) in block.iter_mut().enumerate() {
            let di = (idx / 16) as i64 - 1;
            let dj = ((idx / 4) % 4) as i64 - 1;
            let dk = (idx % 4) as i64 - 1;
            let ckey = (band, i + di, j + dj, k + dk);
            let v = match self.corners.get(&ckey) {
                Some(v) => *v,
                None => {
                    let q = Point3::new(
                        T::of((i + di) as f64) * h,
                        T::of((j + dj) as f64) * h,
                        T::of((k + dk) as f64) * h,
                    );
                    let v = exact(q);
                    self.corners.insert(ckey, v);
                    v
                }
            };
            *slot = v;
        }
        block
    }
}

/// Catmull-Rom cubic through `f[-1], f[0], f[1], f[2]` evaluated at
/// `t in [0, 1]` (between `f[0]` and `f[1]`).
#[inline]
fn cr1<T: Real>(fm: T, f0: T, f1: T, f2: T, t: T) -> T {
    let half = T::of(0.5);
    let c1 = (f1 - fm) * half;
    let c2 = fm - f0 * T::of(2.5) + f1 * T::of(2.0) - f2 * half;
    let c3 = (f0 - f1) * T::of(1.5) + (f2 - fm) * half;
    f0 + t * (c1 + t * (c2 + t * c3))
}

#[inline]
fn tricubic<T: Real>(block: &[T; 64], tx: T, ty: T, tz: T) -> T {
    let mut yz = [T::zero(); 4];
    for ix in 0..4 {
        let mut zs = [T::zero(); 4];
        for iy in 0..4 {
            let base = ix * 16 + iy * 4;
            zs[iy] = cr1(block[base], block[base + 1], block[base + 2], block[base + 3], tz);
        }
        yz[ix] = cr1(zs[0], zs[1], zs[2], zs[3], ty);
    }
    cr1(yz[0], yz[1], yz[2], yz[3], tx)
}
