//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generate::GeneratorSpec;
use super::io::MapFile;
use super::DriverError;
use crate::scheduler::{derive_constants, SchedulerParams, DEFAULT_N_CAP};

/// A rotation component: a decimal or a quadratic-irrational tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaComponent {
    Value(f64),
    Tag(String),
}

impl AlphaComponent {
    pub fn value(&self) -> Result<f64, DriverError> {
        match self {
            AlphaComponent::Value(v) => Ok(*v),
            AlphaComponent::Tag(t) => parse_alpha_tag(t),
        }
    }
}

/// `golden` = (√5 - 1)/2, `silver` = √2 - 1, `sqrtN-M` = √N - M, or a
/// decimal literal.
pub fn parse_alpha_tag(tag: &str) -> Result<f64, DriverError> {
    let t = tag.trim();
    let bad = || DriverError::Config(format!("unknown α tag {t:?}"));
    match t {
        "golden" => return Ok((5f64.sqrt() - 1.0) / 2.0),
        "silver" => return Ok(2f64.sqrt() - 1.0),
        _ => {}
    }
    if let Some(rest) = t.strip_prefix("sqrt") {
        let (n, m) = rest.split_once('-').ok_or_else(bad)?;
        let n: u32 = n.parse().map_err(|_| bad())?;
        let m: u32 = m.parse().map_err(|_| bad())?;
        let root = (n as f64).sqrt();
        if root.fract() == 0.0 {
            return Err(DriverError::Config(format!("√{n} is rational")));
        }
        return Ok(root - m as f64);
    }
    t.parse::<f64>().map_err(|_| bad())
}

/// Parses a comma-separated list of α components.
pub fn parse_alpha_list(text: &str) -> Result<Vec<f64>, DriverError> {
    text.split(',').map(parse_alpha_tag).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Value(f64),
    /// Only `"auto"`: the best γ on the verified ball.
    Auto(String),
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec::Auto("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaSpec {
    pub components: Vec<AlphaComponent>,
    pub tau: f64,
    #[serde(default)]
    pub gamma: GammaSpec,
    /// Radius `K` of the Diophantine check; defaults to the largest `N` the
    /// run can schedule.
    #[serde(default)]
    pub dc_radius: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerTable {
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_mu")]
    pub mu: f64,
    #[serde(default = "d_nu")]
    pub nu: f64,
    #[serde(rename = "N1", default = "d_n1")]
    pub n1: usize,
}

fn d_sigma() -> f64 {
    0.5
}
fn d_lambda() -> f64 {
    3.0
}
fn d_mu() -> f64 {
    7.5
}
fn d_nu() -> f64 {
    2.0
}
fn d_n1() -> usize {
    8
}

impl Default for SchedulerTable {
    fn default() -> Self {
        SchedulerTable {
            sigma: d_sigma(),
            lambda: d_lambda(),
            mu: d_mu(),
            nu: d_nu(),
            n1: d_n1(),
        }
    }
}

/// `"default"` or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchedulerSpec {
    Preset(String),
    Table(SchedulerTable),
}

impl Default for SchedulerSpec {
    fn default() -> Self {
        SchedulerSpec::Preset("default".into())
    }
}

impl SchedulerSpec {
    pub fn table(&self) -> Result<SchedulerTable, DriverError> {
        match self {
            SchedulerSpec::Preset(p) if p == "default" => Ok(SchedulerTable::default()),
            SchedulerSpec::Preset(p) => Err(DriverError::Config(format!(
                "unknown scheduler preset {p:?}"
            ))),
            SchedulerSpec::Table(t) => Ok(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MapSource {
    Inline { map: MapFile },
    File { path: PathBuf },
    Generator { spec: GeneratorSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub eps_stop: f64,
    pub max_iters: usize,
    /// Allowed mismatch between the stored product and a recomputation from
    /// the individual steps.
    #[serde(default = "d_residual")]
    pub residual_tol: f64,
}

fn d_residual() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSettings {
    /// `C` in the smallness condition `C γ N^a ε₀ < 1`.
    #[serde(default = "d_one")]
    pub smallness_constant: f64,
    /// `C_post` in the drift bound.
    #[serde(default = "d_c_post")]
    pub c_post: f64,
    /// Absolute slack added to the drift bound.
    #[serde(default = "d_floor")]
    pub drift_floor: f64,
    /// Truncation orders are `min(N_n, degree_cap)`.
    #[serde(default = "d_degree_cap")]
    pub degree_cap: usize,
    /// Overflow guard for the schedule itself.
    #[serde(default = "d_n_cap")]
    pub n_cap: usize,
}

fn d_one() -> f64 {
    1.0
}
fn d_c_post() -> f64 {
    10.0
}
fn d_floor() -> f64 {
    1e-12
}
fn d_degree_cap() -> usize {
    128
}
fn d_n_cap() -> usize {
    DEFAULT_N_CAP
}

impl Default for StepSettings {
    fn default() -> Self {
        StepSettings {
            smallness_constant: d_one(),
            c_post: d_c_post(),
            drift_floor: d_floor(),
            degree_cap: d_degree_cap(),
            n_cap: d_n_cap(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub chain: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub final_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: AlphaSpec,
    #[serde(default)]
    pub scheduler: SchedulerSpec,
    pub map: MapSource,
    pub tolerances: Tolerances,
    #[serde(default)]
    pub step: StepSettings,
    #[serde(default)]
    pub output: OutputPaths,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, DriverError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Maps `path` against `base_dir` unless it is absolute.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        if !(self.tolerances.eps_stop > 0.0) {
            return bad("eps_stop must be positive".into());
        }
        if self.tolerances.max_iters < 1 {
            return bad("max_iters must be >= 1".into());
        }
        let d = self.alpha.components.len();
        if !(d == 1 || d == 2) {
            return bad(format!("α must have 1 or 2 components, got {d}"));
        }
        if let GammaSpec::Auto(s) = &self.alpha.gamma {
            if s != "auto" {
                return bad(format!("gamma must be a number or \"auto\", got {s:?}"));
            }
        }
        if self.step.degree_cap < 1 {
            return bad("degree_cap must be >= 1".into());
        }
        self.alpha_values()?;
        self.scheduler_params()?;
        Ok(())
    }

    pub fn alpha_values(&self) -> Result<Vec<f64>, DriverError> {
        self.alpha
            .components
            .iter()
            .map(AlphaComponent::value)
            .collect()
    }

    pub fn scheduler_params(&self) -> Result<SchedulerParams, DriverError> {
        let t = self.scheduler.table()?;
        Ok(derive_constants(
            self.alpha.tau,
            self.alpha.components.len(),
            t.sigma,
            t.lambda,
            t.mu,
            t.nu,
            t.n1,
        )?)
    }
}
