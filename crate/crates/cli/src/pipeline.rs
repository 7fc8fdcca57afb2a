//! Builds the configured experiment and writes its reports.
//!
//! One level of a decay run: dyadic cover resolved two levels past the
//! target scale, extension of the boundary data, carved approximant, then
//! the four measurements (curve sup error, shell gradient sup, sphere-mean
//! harmonicity, gradient-decay diagnostic). CSV output carries no wall-clock
//! fields, so a rerun with the same config and seed is byte-identical; the
//! JSON report carries the full metadata including runtimes.

use crate::config::{
    BoundarySpec, ConfigError, CurveSpec, ExperimentConfig, ModulusSpec, SharpnessConfig,
};
use harmtube_core::approximant::{Approximant, ApproximantOpts, BuildError};
use harmtube_core::extension::{Extension, ExtensionOpts};
use harmtube_core::geometry::builtin_curve;
use harmtube_core::modulus::{builtin_boundary, BoundaryData, Modulus};
use harmtube_core::quadrature::MeshError;
use harmtube_core::verify::{
    alpha_decay, harmonicity_residual, shell_gradient, sharpness_harness, DecayRecord,
    DecayReport, SharpnessOpts, SharpnessReport, VerifyError,
};
use harmtube_core::{Curve3d, DyadicCover3d, Point3d};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("level {level} infeasible: {reason}")]
    Infeasible { level: usize, reason: String },
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 3 for configuration problems, 4 for infeasible
    /// levels, 5 for exhausted budgets, 1 otherwise. (2 is reserved for
    /// completed runs whose acceptance bands fail.)
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Infeasible { .. } => 4,
            CliError::Budget(_) => 5,
            CliError::Write { .. } => 1,
        }
    }
}

pub fn build_curve(spec: &CurveSpec, tol: f64) -> Result<Arc<Curve3d>, CliError> {
    let verts = match spec {
        CurveSpec::Builtin(name) => builtin_curve(name).ok_or_else(|| {
            ConfigError::Invalid(format!(
                "unknown builtin curve {name:?} (have: segment, quarter_circle, helix)"
            ))
        })?,
        CurveSpec::Path(path) => read_vertex_csv(path)?,
    };
    let curve = Curve3d::build(verts, tol)
        .map_err(|e| ConfigError::Invalid(format!("curve rejected: {e}")))?;
    Ok(Arc::new(curve))
}

fn read_vertex_csv(path: &Path) -> Result<Vec<Point3d>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut verts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let mut next = |what: &str| {
            cols.next()
                .ok_or_else(|| {
                    ConfigError::Invalid(format!("{}:{}: missing {what}", path.display(), i + 1))
                })?
                .parse::<f64>()
                .map_err(|e| {
                    ConfigError::Invalid(format!("{}:{}: bad {what}: {e}", path.display(), i + 1))
                })
        };
        verts.push(Point3d::new(next("x")?, next("y")?, next("z")?));
    }
    Ok(verts)
}

pub fn build_boundary(
    spec: &BoundarySpec,
    curve: &Arc<Curve3d>,
) -> Result<BoundaryData<f64>, CliError> {
    match spec {
        BoundarySpec::Builtin { name, alpha } => {
            builtin_boundary(name, *alpha).ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "unknown builtin boundary {name:?} (have: abs_sqrt, abs_power, coordinate, constant)"
                ))
                .into()
            })
        }
        BoundarySpec::Tabulated(path) => {
            let table = read_value_table(path)?;
            let curve = curve.clone();
            Ok(BoundaryData::new(
                format!("tabulated:{}", path.display()),
                move |p| {
                    let arc = curve.nearest(p).arc;
                    interp_table(&table, arc)
                },
            ))
        }
    }
}

fn read_value_table(path: &Path) -> Result<Vec<(f64, f64)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, v) = line.split_once(',').ok_or_else(|| {
            ConfigError::Invalid(format!(
                "{}:{}: expected arclength,value",
                path.display(),
                i + 1
            ))
        })?;
        let parse = |s: &str, what: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                ConfigError::Invalid(format!("{}:{}: bad {what}: {e}", path.display(), i + 1))
            })
        };
        rows.push((parse(a, "arclength")?, parse(v, "value")?));
    }
    if rows.len() < 2 {
        return Err(ConfigError::Invalid(format!(
            "{}: need at least two arclength,value rows",
            path.display()
        )));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows)
}

fn interp_table(table: &[(f64, f64)], arc: f64) -> f64 {
    let n = table.len();
    if arc <= table[0].0 {
        return table[0].1;
    }
    if arc >= table[n - 1].0 {
        return table[n - 1].1;
    }
    let i = table.partition_point(|row| row.0 <= arc);
    let (a0, v0) = table[i - 1];
    let (a1, v1) = table[i];
    let t = if a1 > a0 { (arc - a0) / (a1 - a0) } else { 0.0 };
    v0 + (v1 - v0) * t
}

pub fn build_modulus(spec: &ModulusSpec) -> Result<Modulus<f64>, CliError> {
    match *spec {
        ModulusSpec::Power(alpha) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "power modulus exponent {alpha} outside (0, 1]"
                ))
                .into());
            }
            Ok(Modulus::power(alpha))
        }
        ModulusSpec::PowerLog(alpha) => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "power-log modulus exponent {alpha} outside (0, 1)"
                ))
                .into());
            }
            Ok(Modulus::power_log(alpha))
        }
    }
}

fn map_build_error(level: usize, e: BuildError) -> CliError {
    match e {
        BuildError::Mesh(MeshError::Budget { limit }) => {
            CliError::Budget(format!("level {level}: octree visited {limit} cells"))
        }
        other => CliError::Infeasible {
            level,
            reason: other.to_string(),
        },
    }
}

fn map_verify_error(level: usize, e: VerifyError) -> CliError {
    CliError::Infeasible {
        level,
        reason: e.to_string(),
    }
}

/// Distinct deterministic sub-seed per level and measurement.
fn subseed(base: u64, level: usize, tag: u64) -> u64 {
    base ^ (level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ tag.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

const BAND_RATIO: f64 = 4.0;
const HARMONICITY_CAP: f64 = 1e-3;

pub struct RunOutcome {
    pub report: DecayReport<f64>,
    /// First acceptance band the report misses, if any.
    pub violation: Option<String>,
}

#[derive(Serialize)]
struct Tolerances {
    band_ratio: f64,
    harmonicity: f64,
}

#[derive(Serialize)]
struct DecayDocument<'a> {
    config: &'a ExperimentConfig,
    effective_seed: u64,
    tolerances: Tolerances,
    report: &'a DecayReport<f64>,
}

/// One row per curve sample and level, for plotting the field against the
/// data.
struct FieldRow {
    level: usize,
    arc: f64,
    p: Point3d,
    f: f64,
    v: f64,
}

pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    seed: u64,
) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let total_t0 = Instant::now();
    let curve = build_curve(&cfg.curve, cfg.curve_tol)?;
    let modulus = build_modulus(&cfg.modulus)?;
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();

    let mut records = Vec::with_capacity(levels.len());
    let mut field_rows = Vec::new();
    for &n in &levels {
        let t0 = Instant::now();
        let cover = DyadicCover3d::new(curve.clone(), n + 2).map_err(|e| CliError::Infeasible {
            level: n,
            reason: e.to_string(),
        })?;
        let data = build_boundary(&cfg.boundary, &curve)?;
        let ext = Arc::new(Extension::new(
            Arc::new(cover),
            data,
            ExtensionOpts::default(),
        ));
        let opts = ApproximantOpts {
            c1: cfg.c1,
            theta_mass: cfg.theta,
            ..ApproximantOpts::default()
        };
        let ap = Approximant::build(&ext, &modulus, n, &opts).map_err(|e| map_build_error(n, e))?;
        // Records are keyed by the construction scale: the level-n field is
        // the approximant at scale delta = lambda(n), its shell is
        // delta/2 < d <= delta, and both norms divide by omega(delta).
        let delta = ap.scale();

        let data = ext.data();
        let total = curve.total_length();
        let m = cfg.samples.curve.max(2);
        let mut sup = 0.0f64;
        for i in 0..m {
            let arc = total * i as f64 / (m - 1) as f64;
            let p = curve.point_at_clamped(arc);
            let f = data.eval(p);
            let v = ap.eval(p);
            sup = sup.max((v - f).abs());
            field_rows.push(FieldRow {
                level: n,
                arc,
                p,
                f,
                v,
            });
        }

        let g = shell_gradient(&ap, delta, cfg.samples.shell, subseed(seed, n, 1))
            .map_err(|e| map_verify_error(n, e))?;
        let h = harmonicity_residual(&ap, cfg.samples.harmonicity, subseed(seed, n, 2))
            .map_err(|e| map_verify_error(n, e))?;
        let alpha = alpha_decay(&ext, &[n], cfg.samples.alpha, subseed(seed, n, 3))[0].1;

        let w = modulus.eval(delta);
        records.push(DecayRecord {
            level: n,
            delta,
            sup_error: sup,
            shell_gradient: g,
            normalized_error: sup / w,
            normalized_gradient: g * delta / w,
            harmonicity: h,
            alpha,
            runtime_s: t0.elapsed().as_secs_f64(),
        });
    }

    let report = DecayReport {
        curve: curve_label(&cfg.curve),
        boundary: boundary_label(&cfg.boundary),
        modulus: format!("{:?}", modulus),
        theta_mass: cfg.theta,
        seed,
        curve_samples: cfg.samples.curve,
        shell_samples: cfg.samples.shell,
        harmonicity_samples: cfg.samples.harmonicity,
        alpha_samples: cfg.samples.alpha,
        records,
        total_runtime_s: total_t0.elapsed().as_secs_f64(),
    };

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.to_owned(),
        source,
    })?;
    write_file(&out_dir.join("decay.csv"), &decay_csv(&report))?;
    write_file(&out_dir.join("field_samples.csv"), &field_csv(&field_rows))?;
    let doc = DecayDocument {
        config: cfg,
        effective_seed: seed,
        tolerances: Tolerances {
            band_ratio: BAND_RATIO,
            harmonicity: HARMONICITY_CAP,
        },
        report: &report,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serialization");
    write_file(&out_dir.join("decay.json"), &json)?;

    let violation = band_violation(&report);
    Ok(RunOutcome { report, violation })
}

fn curve_label(spec: &CurveSpec) -> String {
    match spec {
        CurveSpec::Builtin(name) => name.clone(),
        CurveSpec::Path(path) => path.display().to_string(),
    }
}

fn boundary_label(spec: &BoundarySpec) -> String {
    match spec {
        BoundarySpec::Builtin { name, .. } => name.clone(),
        BoundarySpec::Tabulated(path) => format!("tabulated:{}", path.display()),
    }
}

/// First acceptance band the report misses: the normalized error and
/// gradient columns must each stay within a max/min ratio of `BAND_RATIO`
/// across levels, and every harmonicity residual below `HARMONICITY_CAP`.
pub fn band_violation(report: &DecayReport<f64>) -> Option<String> {
    let ratio_of = |vals: Vec<f64>, what: &str| -> Option<String> {
        if vals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Some(format!("{what} has a non-finite or non-positive entry"));
        }
        let max = vals.iter().cloned().fold(f64::MIN, f64::max);
        let min = vals.iter().cloned().fold(f64::MAX, f64::min);
        if vals.len() >= 2 && max / min > BAND_RATIO {
            return Some(format!(
                "{what} band {min:.3e}..{max:.3e} exceeds ratio {BAND_RATIO}"
            ));
        }
        None
    };
    let r = &report.records;
    if let Some(v) = ratio_of(r.iter().map(|x| x.normalized_error).collect(), "E/omega") {
        return Some(v);
    }
    if let Some(v) = ratio_of(
        r.iter().map(|x| x.normalized_gradient).collect(),
        "G*delta/omega",
    ) {
        return Some(v);
    }
    for x in r {
        if !(x.harmonicity <= HARMONICITY_CAP) {
            return Some(format!(
                "harmonicity residual {:.3e} at level {} exceeds {HARMONICITY_CAP}",
                x.harmonicity, x.level
            ));
        }
    }
    None
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn decay_csv(report: &DecayReport<f64>) -> String {
    let mut s = String::from(
        "level,delta,sup_error,shell_gradient,normalized_error,normalized_gradient,harmonicity,alpha\n",
    );
    for r in &report.records {
        // No wall-clock columns here: reruns must be byte-identical.
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level,
            fmt(r.delta),
            fmt(r.sup_error),
            fmt(r.shell_gradient),
            fmt(r.normalized_error),
            fmt(r.normalized_gradient),
            fmt(r.harmonicity),
            fmt(r.alpha)
        );
    }
    s
}

fn field_csv(rows: &[FieldRow]) -> String {
    let mut s = String::from("level,arclength,x,y,z,data,field,error\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level,
            fmt(r.arc),
            fmt(r.p.x),
            fmt(r.p.y),
            fmt(r.p.z),
            fmt(r.f),
            fmt(r.v),
            fmt(r.v - r.f)
        );
    }
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

#[derive(Serialize)]
struct SharpnessDocument<'a> {
    config: &'a SharpnessConfig,
    report: &'a SharpnessReport<f64>,
}

pub fn run_sharpness(
    cfg: &SharpnessConfig,
    out_dir: &Path,
) -> Result<SharpnessReport<f64>, CliError> {
    cfg.validate()?;
    let modulus = build_modulus(&cfg.modulus)?;
    let reg = modulus.verify_regularity(1e-6, 1.0, 8);
    if !reg.ok() {
        return Err(ConfigError::Invalid(format!(
            "modulus fails the regularity conditions (Dini sup {:.3e}{}, kernel sup {:.3e}{}); \
             the second-difference obstruction needs both integrals bounded",
            reg.c_prime,
            if reg.c_prime_diverges { " diverging" } else { "" },
            reg.c_dprime,
            if reg.c_dprime_diverges { " diverging" } else { "" },
        ))
        .into());
    }
    let (deltas, lambdas) = cfg.sequences();
    let opts = SharpnessOpts {
        c1p: cfg.c1p,
        c2p: cfg.c2p,
        kappa: cfg.kappa,
    };
    let report = sharpness_harness(&modulus, &deltas, &lambdas, opts)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
        path: out_dir.to_owned(),
        source,
    })?;
    let mut csv = String::from("ell,delta,lambda,amplitude,radius,offset,lower,upper,ratio,violated\n");
    for r in &report.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            r.ell,
            fmt(r.delta),
            fmt(r.lambda),
            fmt(r.amplitude),
            fmt(r.radius),
            fmt(r.offset),
            fmt(r.lower),
            fmt(r.upper),
            fmt(r.ratio),
            r.lower > r.upper
        );
    }
    write_file(&out_dir.join("sharpness.csv"), &csv)?;
    let doc = SharpnessDocument {
        config: cfg,
        report: &report,
    };
    let json = serde_json::to_string_pretty(&doc).expect("report serialization");
    write_file(&out_dir.join("sharpness.json"), &json)?;
    Ok(report)
}
