//! JSON experiment configuration. A single file describes the whole run so
//! experiments are reproducible; command-line flags only override the seed
//! and the output directory.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Where the curve vertices come from: a named builtin or a CSV of
/// `x,y,z` rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSpec {
    Builtin(String),
    Path(PathBuf),
}

/// Boundary data on the curve: a named builtin (with its power where it has
/// one) or a CSV of `arclength,value` rows interpolated linearly.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Builtin {
        name: String,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Tabulated(PathBuf),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusSpec {
    Power(f64),
    PowerLog(f64),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleCounts {
    /// Arclength-uniform curve points for the sup error.
    pub curve: usize,
    /// Rejection samples per shell for the gradient sup.
    pub shell: usize,
    /// Tube points for the sphere-mean harmonicity residual.
    pub harmonicity: usize,
    /// Outer-boundary points per level for the gradient-decay diagnostic.
    pub alpha: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            curve: 500,
            shell: 500,
            harmonicity: 200,
            alpha: 200,
        }
    }
}

fn default_alpha() -> f64 {
    0.5
}

fn default_theta() -> f64 {
    0.8
}

fn default_seed() -> u64 {
    17
}

fn default_curve_tol() -> f64 {
    1e-9
}

/// Configuration of a decay run: build the approximant at each level and
/// measure errors, gradients, harmonicity, and decay diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub curve: CurveSpec,
    #[serde(default = "default_curve_tol")]
    pub curve_tol: f64,
    pub boundary: BoundarySpec,
    pub modulus: ModulusSpec,
    pub levels: Vec<usize>,
    /// Whitney ratio of the source mesh (cell size over curve distance).
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Correction-ball radius multiple; absent means calibrated.
    #[serde(default)]
    pub c1: Option<usize>,
    #[serde(default)]
    pub samples: SampleCounts,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.levels.is_empty() {
            return Err(ConfigError::Invalid("levels list is empty".into()));
        }
        if let Some(&n) = self.levels.iter().find(|&&n| n < 3) {
            return Err(ConfigError::Invalid(format!(
                "level {n} too shallow: correction balls sit two levels up, so levels start at 3"
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "theta {} outside (0, 1]",
                self.theta
            )));
        }
        if !(self.curve_tol > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "curve_tol {} must be positive",
                self.curve_tol
            )));
        }
        let s = &self.samples;
        if s.curve < 2 || s.shell == 0 || s.harmonicity == 0 || s.alpha == 0 {
            return Err(ConfigError::Invalid(
                "sample counts must be positive (curve needs at least 2)".into(),
            ));
        }
        Ok(())
    }
}

fn default_steps() -> usize {
    8
}

fn one() -> f64 {
    1.0
}

fn default_kappa() -> f64 {
    3.0
}

/// Configuration of a sharpness run. When the sequences are absent the
/// defaults are `delta_l = 4^-l` and `lambda_l = 2^(l+3)` for `l = 1..=steps`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessConfig {
    pub modulus: ModulusSpec,
    #[serde(default)]
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "one")]
    pub c1p: f64,
    #[serde(default = "one")]
    pub c2p: f64,
    /// Interior derivative-estimate constant converting the shell gradient
    /// bound into one on the expanded neighborhood.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl SharpnessConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.deltas, &self.lambdas) {
            (Some(d), Some(l)) if d.len() != l.len() => {
                return Err(ConfigError::Invalid(format!(
                    "deltas and lambdas differ in length ({} vs {})",
                    d.len(),
                    l.len()
                )))
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(ConfigError::Invalid(
                    "deltas and lambdas must be given together".into(),
                ))
            }
            _ => {}
        }
        if self.deltas.is_none() && self.steps == 0 {
            return Err(ConfigError::Invalid("steps must be positive".into()));
        }
        Ok(())
    }

    /// The sequences to run: explicit ones, or the default dyadic family.
    pub fn sequences(&self) -> (Vec<f64>, Vec<f64>) {
        match (&self.deltas, &self.lambdas) {
            (Some(d), Some(l)) => (d.clone(), l.clone()),
            _ => {
                let deltas = (1..=self.steps).map(|l| 4f64.powi(-(l as i32))).collect();
                let lambdas = (1..=self.steps)
                    .map(|l| 2f64.powi(l as i32 + 3))
                    .collect();
                (deltas, lambdas)
            }
        }
    }
}
