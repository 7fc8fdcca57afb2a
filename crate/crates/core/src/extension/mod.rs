//! Smooth extension of boundary data from the curve into space.
//!
//! Boundary values live on the curve; everything downstream (the corrected
//! potential, the error estimates) needs a field defined on all of R^3 whose
//! local regularity is governed by the data's modulus of continuity and the
//! distance to the curve. The construction is a staircase-then-mollify
//! pipeline:
//!
//!  1. `g`: snap a point to its owning cover cell and take the data value at
//!     that cell's node — piecewise constant, jumps of size `omega(cell)`.
//!  2. `g1`: average `g` over a ball of radius `d/8` (true distance).
//!  3. `g2`, `g0`: two more averages at radius `r* = d0/8`, where `d0` is the
//!     doubly ball-averaged smoothed distance. Each stage smooths the jumps
//!     of the previous one while moving values by at most `O(omega(d))`.
//!  4. `f0 = psi * g0`, a radial quintic-smoothstep cutoff that truncates the
//!     field near a sphere of radius `3 * diameter` so that it is compactly
//!     supported.
//!
//! Exact evaluation nests three quadrature rules (tens of milliseconds per
//! point); production evaluation goes through [`LatticeCache`] fields that
//! tabulate each stage once per lattice corner. The exact route is kept as
//! the oracle the caches are tested against.

mod cache;

pub use cache::LatticeCache;

use crate::geometry::{DyadicCover, Point3, Vec3};
use crate::modulus::BoundaryData;
use crate::quadrature::BallRule;
use crate::scalar::Real;
use crate::smooth_distance::{RadiusRule, SmoothDistance};
use std::sync::Arc;

/// Distance multiple past which every averaging stage provably sees only
/// zeros: the cover reaches `2L`, each stage extends the reach by its
/// averaging radius, and `d0 <= 1.15 d` bounds the averaged radii.
const SUPPORT_FACTOR: f64 = 3.12;

#[derive(Clone, Copy, Debug)]
pub struct CacheOpts<T> {
    /// Lattice spacing as a fraction of the band's base distance. The
    /// default 1/2 keeps fine-band populations (which grow like
    /// `theta^-3 * 2^n_max`) affordable; the coarser interpolation shows up
    /// only in the constants of the field bounds, not in their scaling.
    pub theta: T,
    /// Refinement floor: bands never get finer than this distance scale.
    /// Defaults to `0.75 * lambda(n_max)` of the cover, which floors the
    /// lattice at the band of the finest cover scale.
    pub floor: Option<T>,
}

#[derive(Clone, Copy, Debug)]
pub struct ExtensionOpts<T> {
    /// Ball-rule degree for the inner averaging stages (`g1`, `d2`, `d0`).
    pub inner_degree: usize,
    /// Ball-rule degree for the final `g0` average.
    pub outer_degree: usize,
    pub radius_rule: RadiusRule,
    /// `None` disables caching: every evaluation runs the full nested
    /// quadrature (slow; meant for oracle comparisons).
    pub cache: Option<CacheOpts<T>>,
}

impl<T: Real> Default for ExtensionOpts<T> {
    fn default() -> Self {
        Self {
            inner_degree: 3,
            outer_degree: 5,
            radius_rule: RadiusRule::ShellKeyed,
            cache: Some(CacheOpts {
                theta: T::of(0.5),
                floor: None,
            }),
        }
    }
}

struct FieldCaches<T> {
    d2: LatticeCache<T>,
    g1: LatticeCache<T>,
    g2: LatticeCache<T>,
    g0: LatticeCache<T>,
}

pub struct Extension<T> {
    cover: Arc<DyadicCover<T>>,
    data: BoundaryData<T>,
    sd: SmoothDistance<T>,
    inner: BallRule<T>,
    outer: BallRule<T>,
    centroid: Point3<T>,
    /// Radial cutoff: `psi = 1` inside `r0 - width`, `0` outside `r0`.
    r0: T,
    width: T,
    /// Distance to the curve beyond which `g0` is identically zero.
    support_d: T,
    caches: Option<FieldCaches<T>>,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CacheStats {
    pub leaves: [usize; 4],
    pub corners: [usize; 4],
}

impl<T: Real> Extension<T> {
    pub fn new(cover: Arc<DyadicCover<T>>, data: BoundaryData<T>, opts: ExtensionOpts<T>) -> Self {
        let curve = cover.curve().clone();
        let sd = SmoothDistance::new(curve.clone(), opts.inner_degree, opts.radius_rule);
        let total = curve.total_length();
        let diam = curve.diameter();
        let r0 = T::of(3.0) * diam;
        let width = total.min(r0 * T::of(0.5));
        let caches = opts.cache.map(|c| {
            let floor = c
                .floor
                .unwrap_or_else(|| cover.lambda(cover.n_max()) * T::of(0.75));
            FieldCaches {
                d2: LatticeCache::new(c.theta, floor),
                g1: LatticeCache::new(c.theta, floor),
                g2: LatticeCache::new(c.theta, floor),
                g0: LatticeCache::new(c.theta, floor),
            }
        });
        Self {
            cover,
            data,
            sd,
            inner: BallRule::degree(opts.inner_degree),
            outer: BallRule::degree(opts.outer_degree),
            centroid: curve.centroid(),
            r0,
            width,
            support_d: T::of(SUPPORT_FACTOR) * total,
            caches,
        }
    }

    pub fn cover(&self) -> &Arc<DyadicCover<T>> {
        &self.cover
    }

    pub fn data(&self) -> &BoundaryData<T> {
        &self.data
    }

    pub fn smooth_distance(&self) -> &SmoothDistance<T> {
        &self.sd
    }

    pub fn dist(&self, p: Point3<T>) -> T {
        self.cover.curve().dist(p)
    }

    /// Outer radius of the compact support of `f0` around the centroid.
    pub fn outer_radius(&self) -> T {
        self.r0
    }

    /// Width of the smoothstep band `[outer_radius - width, outer_radius]`.
    pub fn cutoff_width(&self) -> T {
        self.width
    }

    /// Center of the radial cutoff (the arclength centroid of the curve).
    pub fn cutoff_center(&self) -> Point3<T> {
        self.centroid
    }

    /// Distance to the curve beyond which the averaged field is exactly zero.
    pub fn support_distance(&self) -> T {
        self.support_d
    }

    pub fn is_cached(&self) -> bool {
        self.caches.is_some()
    }

    /// Cell-snapped data: the value at the node of the owning cover cell,
    /// zero outside the coarsest cover.
    pub fn eval_g(&self, q: Point3<T>) -> T {
        match self.cover.owning_cell(q) {
            Some(cell) => self.data.eval(self.cover.node(cell.level, cell.k)),
            None => T::zero(),
        }
    }

    fn g1_exact_at(&self, q: Point3<T>, d: T) -> T {
        let r = d * T::of(0.125);
        self.inner.mean(q, r, |y| self.eval_g(y))
    }

    fn r_star_exact(&self, q: Point3<T>, d: T) -> T {
        self.sd.d0_at(q, d) * T::of(0.125)
    }

    fn g2_exact(&self, q: Point3<T>) -> T {
        let d = self.dist(q);
        let r = self.r_star_exact(q, d);
        self.inner.mean(q, r, |y| {
            let dy = self.dist(y);
            self.g1_exact_at(y, dy)
        })
    }

    fn g0_exact(&self, p: Point3<T>) -> T {
        let d = self.dist(p);
        let r = self.r_star_exact(p, d);
        self.outer.mean(p, r, |y| self.g2_exact(y))
    }

    fn d2_cached(&self, c: &FieldCaches<T>, y: Point3<T>, hint: T) -> T {
        c.d2.eval(y, hint, &|q| self.sd.d2(q))
    }

    /// `r* = d0 / 8` with the inner `d2` values taken from the cache.
    fn r_star_cached(&self, c: &FieldCaches<T>, p: Point3<T>, d: T) -> T {
        let r = self.sd.radius_of(d);
        let d0 = self.inner.mean(p, r, |y| self.d2_cached(c, y, d));
        d0 * T::of(0.125)
    }

    fn g1_cached(&self, c: &FieldCaches<T>, y: Point3<T>, hint: T) -> T {
        c.g1.eval(y, hint, &|q| {
            let dq = self.dist(q);
            self.g1_exact_at(q, dq)
        })
    }

    fn g2_cached(&self, c: &FieldCaches<T>, q: Point3<T>, hint: T) -> T {
        c.g2.eval(q, hint, &|corner| {
            let dc = self.dist(corner);
            let r = self.r_star_cached(c, corner, dc);
            self.inner.mean(corner, r, |y| self.g1_cached(c, y, dc))
        })
    }

    fn g0_cached(&self, c: &FieldCaches<T>, p: Point3<T>, hint: T) -> T {
        c.g0.eval(p, hint, &|corner| {
            let dc = self.dist(corner);
            let r = self.r_star_cached(c, corner, dc);
            self.outer.mean(corner, r, |y| self.g2_cached(c, y, dc))
        })
    }

    /// Triple-averaged field before the radial cutoff.
    pub fn eval_g0(&self, p: Point3<T>) -> T {
        let d = self.dist(p);
        if d > self.support_d {
            return T::zero();
        }
        match &self.caches {
            Some(c) => self.g0_cached(c, p, d),
            None => self.g0_exact(p),
        }
    }

    /// Radial cutoff factor: 1 on the inner ball, quintic smoothstep down to
    /// 0 at `outer_radius`.
    pub fn psi(&self, p: Point3<T>) -> T {
        let rho = self.centroid.dist(p);
        let lo = self.r0 - self.width;
        if rho <= lo {
            return T::one();
        }
        if rho >= self.r0 {
            return T::zero();
        }
        let u = (rho - lo) / self.width;
        let u2 = u * u;
        let u3 = u2 * u;
        T::one()
            - (T::of(10.0) * u3 - T::of(15.0) * u3 * u + T::of(6.0) * u3 * u2)
    }

    /// The compactly supported extension field.
    pub fn eval_f0(&self, p: Point3<T>) -> T {
        let d = self.dist(p);
        if d > self.support_d {
            return T::zero();
        }
        let psi = self.psi(p);
        if psi == T::zero() {
            return T::zero();
        }
        let g0 = match &self.caches {
            Some(c) => self.g0_cached(c, p, d),
            None => self.g0_exact(p),
        };
        psi * g0
    }

    /// Central-difference gradient. The default step `d/32` resolves the
    /// field's own variation scale; on the cached path the result carries
    /// interpolation noise of the same order as the field error.
    pub fn gradient_f0(&self, p: Point3<T>, step: Option<T>) -> Vec3<T> {
        let d = self.dist(p);
        let h = step.unwrap_or(d / T::of(32.0)).max(T::of(1e-9));
        let two_h = T::of(2.0) * h;
        let dx = (self.eval_f0(Point3::new(p.x + h, p.y, p.z))
            - self.eval_f0(Point3::new(p.x - h, p.y, p.z)))
            / two_h;
        let dy = (self.eval_f0(Point3::new(p.x, p.y + h, p.z))
            - self.eval_f0(Point3::new(p.x, p.y - h, p.z)))
            / two_h;
        let dz = (self.eval_f0(Point3::new(p.x, p.y, p.z + h))
            - self.eval_f0(Point3::new(p.x, p.y, p.z - h)))
            / two_h;
        Vec3::new(dx, dy, dz)
    }

    /// Seven-point finite-difference Laplacian (diagnostic; integrals of the
    /// Laplacian over cells should use [`Extension::flux_integral`]).
    pub fn laplacian_f0(&self, p: Point3<T>, step: Option<T>) -> T {
        let d = self.dist(p);
        let h = step.unwrap_or(d / T::of(32.0)).max(T::of(1e-9));
        let c = self.eval_f0(p);
        let mut acc = T::zero();
        for axis in 0..3 {
            let mut e = [T::zero(); 3];
            e[axis] = h;
            let plus = self.eval_f0(Point3::new(p.x + e[0], p.y + e[1], p.z + e[2]));
            let minus = self.eval_f0(Point3::new(p.x - e[0], p.y - e[1], p.z - e[2]));
            acc += plus + minus - T::of(2.0) * c;
        }
        acc / (h * h)
    }

    /// Integral of `Lap f0` over the cube of half-width `half` at `center`,
    /// in divergence form: face area times a central-difference normal flux
    /// at each face center. Equal-size neighbor cells share their face
    /// evaluations with opposite signs, so summing over a region telescopes
    /// the interior noise away and leaves boundary terms only.
    pub fn flux_integral(&self, center: Point3<T>, half: T) -> T {
        let q = half * T::of(0.5);
        let area = T::of(4.0) * half * half;
        let mut acc = T::zero();
        for axis in 0..3 {
            let mut e = [T::zero(); 3];
            e[axis] = T::one();
            let probe = |s: T| {
                Point3::new(
                    center.x + e[0] * s,
                    center.y + e[1] * s,
                    center.z + e[2] * s,
                )
            };
            let flux_plus =
                (self.eval_f0(probe(half + q)) - self.eval_f0(probe(half - q))) / (T::of(2.0) * q);
            let flux_minus = (self.eval_f0(probe(-(half - q))) - self.eval_f0(probe(-(half + q))))
                / (T::of(2.0) * q);
            acc += flux_plus - flux_minus;
        }
        area * acc
    }

    pub fn cache_stats(&self) -> CacheStats {
        match &self.caches {
            None => CacheStats::default(),
            Some(c) => CacheStats {
                leaves: [
                    c.d2.leaf_count(),
                    c.g1.leaf_count(),
                    c.g2.leaf_count(),
                    c.g0.leaf_count(),
                ],
                corners: [
                    c.d2.corner_count(),
                    c.g1.corner_count(),
                    c.g2.corner_count(),
                    c.g0.corner_count(),
                ],
            },
        }
    }
}
