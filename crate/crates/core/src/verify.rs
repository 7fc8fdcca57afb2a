//! Empirical measurement of the approximation quality: sup errors along the
//! curve, gradient sups over dyadic shells, sphere-mean harmonicity
//! residuals, the Newtonian representation identity on test fields with
//! known Laplacian, increment reconstruction through a family of
//! approximants, gradient-decay diagnostics for the extension, and the
//! second-difference sharpness harness.
//!
//! Everything here is a finite, explicitly seeded sample computation: the
//! same inputs and seed reproduce the same bytes. Measurements are
//! max-reductions over sample sets, so evaluation order does not affect the
//! result; loops run sequentially.

use crate::approximant::Approximant;
use crate::extension::Extension;
use crate::geometry::{Curve, Point3, Vec3};
use crate::modulus::{BoundaryData, Modulus};
use crate::quadrature::{
    potential, sphere_mean, Cell, DensityMesh, Exclusion, MeshError, NearFieldRule, OctreeMesh,
    OctreeParams, SphereRule,
};
use crate::scalar::Real;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("no points accepted in the shell {inner}..{outer} around the curve")]
    EmptyShell { inner: f64, outer: f64 },
    #[error("no scale in the family admits the pair separation {sep} (need sep <= scale/2)")]
    NoAdmissibleScale { sep: f64 },
    #[error("scale and expansion sequences differ in length ({scales} vs {expansions})")]
    MismatchedSequences { scales: usize, expansions: usize },
    #[error("expansion factor {lambda} at step {ell} must exceed 4")]
    ExpansionTooSmall { ell: usize, lambda: f64 },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// One measured level of the decay study.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayRecord<T> {
    pub level: usize,
    /// The construction scale of this level: `2^(1-level)` on a curve of
    /// length 2, so the dyadic scale `2^-n` is the record at `level = n+1`.
    pub delta: T,
    /// Sup of `|v - f|` over arclength-uniform curve samples.
    pub sup_error: T,
    /// Sup of the FD gradient norm over the shell `delta/2 < d <= delta`.
    pub shell_gradient: T,
    /// `sup_error / omega(delta)`.
    pub normalized_error: T,
    /// `shell_gradient * delta / omega(delta)`.
    pub normalized_gradient: T,
    /// Relative sphere-mean residual over tube samples.
    pub harmonicity: T,
    /// Gradient-decay diagnostic of the extension at this level.
    pub alpha: T,
    /// Wall-clock seconds for this level (excluded from CSV output).
    pub runtime_s: f64,
}

/// Full decay study: per-level records plus the inputs that produced them.
#[derive(Clone, Debug, Serialize)]
pub struct DecayReport<T> {
    pub curve: String,
    pub boundary: String,
    pub modulus: String,
    pub theta_mass: f64,
    pub seed: u64,
    pub curve_samples: usize,
    pub shell_samples: usize,
    pub harmonicity_samples: usize,
    pub alpha_samples: usize,
    pub records: Vec<DecayRecord<T>>,
    pub total_runtime_s: f64,
}

/// One step of the sharpness study.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SharpnessRecord<T> {
    /// Position in the supplied sequences.
    pub ell: usize,
    pub delta: T,
    pub lambda: T,
    /// `sqrt(lambda / 2)`: how far the expanded neighborhood reaches in
    /// units of `delta`.
    pub amplitude: T,
    /// `lambda * delta / 2`: radius of the expanded neighborhood.
    pub radius: T,
    /// `amplitude * delta`: where the second difference is probed.
    pub offset: T,
    /// Second-difference growth `2 * integral_0^offset omega(t)/t dt`.
    pub lower: T,
    /// What a gradient bound `omega(delta)/delta` on the expanded
    /// neighborhood would permit: `(kappa*C2' + 4*C1') * omega(delta)`.
    pub upper: T,
    pub ratio: T,
}

#[derive(Clone, Debug, Serialize)]
pub struct SharpnessReport<T> {
    pub records: Vec<SharpnessRecord<T>>,
    /// First position where the lower bound exceeds the upper bound, i.e.
    /// where a gradient bound on the expanded neighborhood becomes
    /// impossible.
    pub first_violation: Option<usize>,
    /// When no violation occurs in the supplied range: the position where a
    /// log-linear fit of the ratios crosses 1 (absent when the ratios do not
    /// grow).
    pub crossing_estimate: Option<f64>,
    pub c1p: f64,
    pub c2p: f64,
    pub kappa: f64,
}

/// Hypothetical constants for the sharpness harness: `c1p` scales the
/// sup-error bound, `c2p` the shell-gradient bound, and `kappa` is the
/// interior derivative-estimate constant that converts a boundary gradient
/// bound into one on the expanded neighborhood.
#[derive(Clone, Copy, Debug)]
pub struct SharpnessOpts<T> {
    pub c1p: T,
    pub c2p: T,
    pub kappa: T,
}

impl<T: Real> Default for SharpnessOpts<T> {
    fn default() -> Self {
        Self {
            c1p: T::one(),
            c2p: T::one(),
            kappa: T::of(3.0),
        }
    }
}

/// Sup of `|v - f|` over `samples` arclength-uniform points on the curve.
pub fn sup_error<T: Real>(ap: &Approximant<T>, data: &BoundaryData<T>, samples: usize) -> T {
    let curve = ap.extension().cover().curve();
    let total = curve.total_length();
    let m = samples.max(2);
    let mut sup = T::zero();
    for i in 0..m {
        let s = total * T::of(i as f64 / (m - 1) as f64);
        let p = curve.point_at_clamped(s);
        sup = sup.max((ap.eval(p) - data.eval(p)).abs());
    }
    sup
}

/// Uniform rejection samples from the shell `inner < dist(p, curve) <= outer`
/// inside the curve's bounding box inflated by `outer`.
fn sample_shell<T: Real>(
    curve: &Curve<T>,
    inner: T,
    outer: T,
    samples: usize,
    seed: u64,
) -> Result<Vec<Point3<T>>, VerifyError> {
    let bb = curve.bbox().inflate(outer);
    let span = bb.max - bb.min;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(samples);
    let cap = samples.saturating_mul(100_000);
    let mut draws = 0usize;
    while pts.len() < samples && draws < cap {
        draws += 1;
        let p = bb.min
            + Vec3::new(
                span.x * T::of(rng.gen::<f64>()),
                span.y * T::of(rng.gen::<f64>()),
                span.z * T::of(rng.gen::<f64>()),
            );
        let d = curve.dist(p);
        if d > inner && d <= outer {
            pts.push(p);
        }
        // A degenerate window never accepts; bail before burning the budget.
        if draws == 1_000_000 && pts.is_empty() {
            break;
        }
    }
    if pts.len() < samples {
        return Err(VerifyError::EmptyShell {
            inner: inner.as_f64(),
            outer: outer.as_f64(),
        });
    }
    Ok(pts)
}

fn fd_gradient<T: Real>(mut f: impl FnMut(Point3<T>) -> T, p: Point3<T>, h: T) -> Vec3<T> {
    let two_h = h + h;
    let ex = Vec3::new(h, T::zero(), T::zero());
    let ey = Vec3::new(T::zero(), h, T::zero());
    let ez = Vec3::new(T::zero(), T::zero(), h);
    Vec3::new(
        (f(p + ex) - f(p - ex)) / two_h,
        (f(p + ey) - f(p - ey)) / two_h,
        (f(p + ez) - f(p - ez)) / two_h,
    )
}

/// Sup of the FD gradient norm of `v` over uniform samples of the region
/// `inner < dist <= outer`.
pub fn gradient_sup<T: Real>(
    ap: &Approximant<T>,
    inner: T,
    outer: T,
    samples: usize,
    seed: u64,
) -> Result<T, VerifyError> {
    let curve = ap.extension().cover().curve().clone();
    let pts = sample_shell(&curve, inner, outer, samples, seed)?;
    let h = outer * T::of(1.0 / 64.0);
    let mut sup = T::zero();
    for &p in &pts {
        sup = sup.max(fd_gradient(|q| ap.eval(q), p, h).norm());
    }
    Ok(sup)
}

/// Gradient sup over the shell `delta/2 < dist <= delta`.
pub fn shell_gradient<T: Real>(
    ap: &Approximant<T>,
    delta: T,
    samples: usize,
    seed: u64,
) -> Result<T, VerifyError> {
    gradient_sup(ap, delta * T::of(0.5), delta, samples, seed)
}

/// Gradient sup over the inner region `dist <= delta/2`. A harmonic `v`
/// obeys the maximum principle, so this should not exceed the shell sup by
/// more than quadrature noise.
pub fn inner_gradient<T: Real>(
    ap: &Approximant<T>,
    delta: T,
    samples: usize,
    seed: u64,
) -> Result<T, VerifyError> {
    gradient_sup(ap, T::zero(), delta * T::of(0.5), samples, seed)
}

/// Distance from `p` to the nearest field source of the approximant: the
/// carve-surface quadrature points and the correction cell supports.
fn source_distance<T: Real>(ap: &Approximant<T>, p: Point3<T>) -> T {
    let mut d = T::infinity();
    for s in ap.surface() {
        d = d.min(p.dist(s.y));
    }
    for (cell, _) in ap.chi_mesh().cells() {
        let dx = (p.x - cell.center.x).abs() - cell.half;
        let dy = (p.y - cell.center.y).abs() - cell.half;
        let dz = (p.z - cell.center.z).abs() - cell.half;
        let off = Vec3::new(dx.max(T::zero()), dy.max(T::zero()), dz.max(T::zero()));
        d = d.min(off.norm());
    }
    d
}

/// Max relative sphere-mean residual of the approximant over tube samples
/// (`dist <= scale`). Each sample gets a sphere of radius a tenth of its
/// distance to the nearest field source, over which the frozen point-mass
/// form of `v` is exactly harmonic; residuals are normalized by the sample
/// sup of `|v|` plus the local magnitude.
pub fn harmonicity_residual<T: Real>(
    ap: &Approximant<T>,
    samples: usize,
    seed: u64,
) -> Result<T, VerifyError> {
    let curve = ap.extension().cover().curve().clone();
    let pts = sample_shell(&curve, T::zero(), ap.scale(), samples, seed)?;
    let rule = SphereRule::product_gauss(6);
    let mut pairs = Vec::with_capacity(pts.len());
    let mut amp = T::zero();
    for &p in &pts {
        debug_assert!(ap.region().contains(p), "tube sample left the carved region");
        let r = T::of(0.1) * source_distance(ap, p);
        let plan = ap.frozen(p);
        let center = plan.eval(p);
        let mean = sphere_mean(&rule, p, r, |q| plan.eval(q));
        amp = amp.max(center.abs());
        pairs.push((center, mean));
    }
    let mut worst = T::zero();
    for (center, mean) in pairs {
        worst = worst.max((mean - center).abs() / (center.abs() + amp).max(T::of(1e-30)));
    }
    Ok(worst)
}

/// A smooth compactly supported field with a known Laplacian, for exercising
/// the potential identity `f = -N[laplacian f]`.
pub struct SmoothField<T> {
    name: String,
    support_radius: T,
    value: Box<dyn Fn(Point3<T>) -> T + Send + Sync>,
    laplacian: Box<dyn Fn(Point3<T>) -> T + Send + Sync>,
}

impl<T: Real> SmoothField<T> {
    pub fn new(
        name: impl Into<String>,
        support_radius: T,
        value: impl Fn(Point3<T>) -> T + Send + Sync + 'static,
        laplacian: impl Fn(Point3<T>) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            support_radius,
            value: Box::new(value),
            laplacian: Box::new(laplacian),
        }
    }

    /// `exp(-|p|^2)`, whose Laplacian is `(4|p|^2 - 6) exp(-|p|^2)`; both
    /// fall below 1e-14 outside radius 6.
    pub fn gaussian() -> Self {
        Self::new(
            "gaussian",
            T::of(6.0),
            |p: Point3<T>| (-(p - Point3::origin()).norm2()).exp(),
            |p: Point3<T>| {
                let r2 = (p - Point3::origin()).norm2();
                (T::of(4.0) * r2 - T::of(6.0)) * (-r2).exp()
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support_radius(&self) -> T {
        self.support_radius
    }

    pub fn value(&self, p: Point3<T>) -> T {
        (self.value)(p)
    }

    pub fn laplacian(&self, p: Point3<T>) -> T {
        (self.laplacian)(p)
    }
}

/// Octree of the field's Laplacian over its support cube, refined so every
/// cell is at most `theta` times its distance to the nearest target (with a
/// floor `size <= floor` around the targets themselves).
pub fn representation_mesh<T: Real>(
    field: &SmoothField<T>,
    theta: T,
    floor: T,
    targets: &[Point3<T>],
) -> Result<DensityMesh<T>, MeshError> {
    assert!(!targets.is_empty(), "need at least one target to refine around");
    let radius = field.support_radius();
    let root = Cell::cube(Point3::origin(), radius);
    let target_dist = |p: Point3<T>| {
        let mut d = T::infinity();
        for &t in targets {
            d = d.min(p.dist(t));
        }
        d
    };
    let sqrt3 = T::of(3f64.sqrt());
    let refine = |c: &Cell<T>| {
        if target_dist(c.center) - sqrt3 * c.half > radius {
            return false;
        }
        c.size() > (theta * target_dist(c.center)).max(floor)
    };
    let exclude = |_: &Cell<T>| Exclusion::Outside;
    let mesh = OctreeMesh::build(root, &OctreeParams::default(), &refine, &exclude)?;
    // Center sampling leaves a second-order mass error on every cell; the
    // 2x2x2 Gauss average is exact through cubics and removes it.
    let g = T::one() / sqrt3;
    let cells = mesh
        .leaves()
        .iter()
        .map(|&c| {
            let mut acc = T::zero();
            for i in 0..8usize {
                let sx = if i & 1 == 0 { -g } else { g };
                let sy = if i & 2 == 0 { -g } else { g };
                let sz = if i & 4 == 0 { -g } else { g };
                let q = Point3::new(
                    c.center.x + sx * c.half,
                    c.center.y + sy * c.half,
                    c.center.z + sz * c.half,
                );
                acc += field.laplacian(q);
            }
            (c, acc * T::of(0.125))
        })
        .collect();
    Ok(DensityMesh::from_cells(cells))
}

/// Max over targets of `|f(M) + N[laplacian f](M)| / (|f(M)| + eps)`. For a
/// field vanishing at infinity the exact potential of its Laplacian is `-f`,
/// so the residual is pure quadrature error.
pub fn representation_check<T: Real>(
    field: &SmoothField<T>,
    mesh: &DensityMesh<T>,
    rule: &NearFieldRule<T>,
    targets: &[Point3<T>],
) -> T {
    let eps = T::of(1e-12);
    let mut worst = T::zero();
    for &m0 in targets {
        let f = field.value(m0);
        let n = potential(mesh, rule, m0);
        worst = worst.max((f + n).abs() / (f.abs() + eps));
    }
    worst
}

/// Bound on `|f(M2) - f(M1)|` reconstructed from an approximant family:
/// twice the sup error of the chosen member plus a 32-point line quadrature
/// of the FD directional derivative of `v` along the segment. Entries are
/// `(scale, approximant, sup_error at that scale)`; the smallest scale with
/// `|M1M2| <= scale/2` is used.
pub fn reconstruct_increment<T: Real>(
    family: &[(T, &Approximant<T>, T)],
    m1: Point3<T>,
    m2: Point3<T>,
) -> Result<T, VerifyError> {
    let sep = m1.dist(m2);
    if sep == T::zero() {
        return Ok(T::zero());
    }
    let mut best: Option<&(T, &Approximant<T>, T)> = None;
    for entry in family {
        if sep <= entry.0 * T::of(0.5) {
            best = match best {
                Some(b) if b.0 <= entry.0 => Some(b),
                _ => Some(entry),
            };
        }
    }
    let (delta, ap, err) = best.ok_or(VerifyError::NoAdmissibleScale { sep: sep.as_f64() })?;
    let dir = (m2 - m1) * (T::one() / sep);
    let h = *delta * T::of(1.0 / 128.0);
    let gl: Vec<(T, T)> = crate::quadrature::gauss_legendre_01(32);
    let mut integral = T::zero();
    for &(u, w) in &gl {
        let p = m1 + (m2 - m1) * u;
        let deriv = (ap.eval(p + dir * h) - ap.eval(p - dir * h)) / (h + h);
        integral += w * deriv;
    }
    integral *= sep;
    Ok(T::of(2.0) * *err + integral.abs())
}

/// Both sides of the second-difference obstruction for hypothetical
/// constants. For each step: a harmonic approximant with sup error
/// `c1p * omega(delta)` and gradient bound `c2p * omega(delta)/delta` on the
/// neighborhood expanded by `lambda` would keep second differences of the
/// data below `upper = (kappa*c2p + 4*c1p) * omega(delta)` at offset
/// `x = sqrt(lambda/2) * delta`; the data's actual growth there is
/// `lower = 2 * integral_0^x omega(t)/t dt`. Once `lower > upper` the
/// gradient bound is impossible.
pub fn sharpness_harness<T: Real>(
    m: &Modulus<T>,
    deltas: &[T],
    lambdas: &[T],
    opts: SharpnessOpts<T>,
) -> Result<SharpnessReport<T>, VerifyError> {
    if deltas.len() != lambdas.len() {
        return Err(VerifyError::MismatchedSequences {
            scales: deltas.len(),
            expansions: lambdas.len(),
        });
    }
    let mut records = Vec::with_capacity(deltas.len());
    let mut first_violation = None;
    for (ell, (&delta, &lambda)) in deltas.iter().zip(lambdas).enumerate() {
        if !(lambda > T::of(4.0)) {
            return Err(VerifyError::ExpansionTooSmall {
                ell,
                lambda: lambda.as_f64(),
            });
        }
        let amplitude = (lambda * T::of(0.5)).sqrt();
        let radius = lambda * delta * T::of(0.5);
        let offset = amplitude * delta;
        let lower = T::of(2.0) * m.f_star(offset, T::of(1e-12));
        let upper = (opts.kappa * opts.c2p + T::of(4.0) * opts.c1p) * m.eval(delta);
        let ratio = lower / upper;
        if first_violation.is_none() && lower > upper {
            first_violation = Some(ell);
        }
        records.push(SharpnessRecord {
            ell,
            delta,
            lambda,
            amplitude,
            radius,
            offset,
            lower,
            upper,
            ratio,
        });
    }
    let crossing_estimate = if first_violation.is_none() {
        extrapolate_crossing(&records)
    } else {
        None
    };
    Ok(SharpnessReport {
        records,
        first_violation,
        crossing_estimate,
        c1p: opts.c1p.as_f64(),
        c2p: opts.c2p.as_f64(),
        kappa: opts.kappa.as_f64(),
    })
}

/// Least-squares fit of `ln ratio` against the step index; the crossing of
/// ratio 1 is where the fit hits zero. Absent when the fit does not grow.
fn extrapolate_crossing<T: Real>(records: &[SharpnessRecord<T>]) -> Option<f64> {
    if records.len() < 2 {
        return None;
    }
    let n = records.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for r in records {
        let x = r.ell as f64;
        let y = r.ratio.as_f64().ln();
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    if slope <= 1e-9 {
        return None;
    }
    Some(-intercept / slope)
}

/// Gradient-decay diagnostic of the extension: for each level, the sup of
/// `|grad f0| * dist` over samples of the outer boundary of the level's
/// node-ball union.
pub fn alpha_decay<T: Real>(
    ext: &Extension<T>,
    levels: &[usize],
    samples: usize,
    seed: u64,
) -> Vec<(usize, T)> {
    let cover = ext.cover();
    let curve = cover.curve();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(levels.len());
    for &n in levels {
        assert!(n <= cover.n_max(), "level {n} beyond the cover depth");
        let radius = cover.cover_radius(n);
        let nodes = cover.nodes(n);
        let mut alpha = T::zero();
        let mut accepted = 0usize;
        let cap = samples.saturating_mul(10_000);
        let mut draws = 0usize;
        while accepted < samples && draws < cap {
            draws += 1;
            let k = rng.gen_range(0..nodes.len());
            let u = loop {
                let v = Vec3::new(
                    T::of(rng.gen::<f64>() * 2.0 - 1.0),
                    T::of(rng.gen::<f64>() * 2.0 - 1.0),
                    T::of(rng.gen::<f64>() * 2.0 - 1.0),
                );
                if v.norm2() <= T::one() {
                    if let Some(unit) = v.normalized(T::of(1e-12)) {
                        break unit;
                    }
                }
            };
            let p = nodes[k] + u * radius;
            // On the union boundary iff no ball contains it strictly.
            let threshold = radius * T::of(1.0 - 1e-9);
            if nodes.iter().any(|&q| p.dist(q) < threshold) {
                continue;
            }
            accepted += 1;
            let g = ext.gradient_f0(p, None).norm();
            alpha = alpha.max(g * curve.dist(p));
        }
        out.push((n, alpha));
    }
    out
}
