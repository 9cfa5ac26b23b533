//! Batch runner for the full scheme: repeated KAM steps with a growing
//! truncation order, the running conjugacy product, traces and oracles.

pub mod config;
pub mod generate;
pub mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arithmetic::{ArithmeticError, DiophantineVector};
use crate::kam_step::{self, PosterioriReport, StepConfig, StepDiagnostics, StepError};
use crate::par;
use crate::scheduler::{schedule_n, SchedulerError, SchedulerParams};
use crate::spectral::{compose, reduce_mod_one, Grid, NormMethod, SpectralError, TorusMapLift};

use config::{ExperimentConfig, GammaSpec, MapSource};
use generate::GenerateError;
use io::{ChainFile, MapFile, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Arithmetic(#[from] ArithmeticError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error("chain residual {residual:.3e} exceeds {bound:.3e}")]
    ResidualTooLarge { residual: f64, bound: f64 },
}

impl DriverError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DriverError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
    DriftObstruction,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Converged => 0,
            Status::MaxIters => 2,
            Status::Diverged => 3,
            Status::DriftObstruction => 4,
        }
    }
}

pub const TRACE_HEADER: &str =
    "n,N,eps0,eps_s0,drift,drift_bound,env_eps0,env_eps_s0,phi_norm0,accepted";

/// One attempted step. `eps0`, `eps_s0` and the envelopes refer to the map
/// entering the step; `drift` and `drift_bound` to the map it produced.
/// Fields a rejected attempt never computed are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    #[serde(rename = "N")]
    pub n_trunc: usize,
    pub eps0: f64,
    pub eps_s0: f64,
    pub drift: f64,
    pub drift_bound: f64,
    pub env_eps0: f64,
    pub env_eps_s0: f64,
    pub phi_norm0: f64,
    pub accepted: bool,
}

impl TraceRow {
    pub fn above_envelope(&self) -> bool {
        self.eps0 > self.env_eps0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormTrace {
    pub rows: Vec<TraceRow>,
}

impl NormTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
                r.n,
                r.n_trunc,
                r.eps0,
                r.eps_s0,
                r.drift,
                r.drift_bound,
                r.env_eps0,
                r.env_eps_s0,
                r.phi_norm0,
                r.accepted
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DriverError> {
        let mut lines = text.lines();
        if lines.next() != Some(TRACE_HEADER) {
            return Err(DriverError::Format("trace header mismatch".into()));
        }
        let bad = |line: &str| DriverError::Format(format!("bad trace row {line:?}"));
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 10 {
                return Err(bad(line));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
            rows.push(TraceRow {
                n: f[0].parse().map_err(|_| bad(line))?,
                n_trunc: f[1].parse().map_err(|_| bad(line))?,
                eps0: num(2)?,
                eps_s0: num(3)?,
                drift: num(4)?,
                drift_bound: num(5)?,
                env_eps0: num(6)?,
                env_eps_s0: num(7)?,
                phi_norm0: num(8)?,
                accepted: f[9].parse().map_err(|_| bad(line))?,
            });
        }
        Ok(NormTrace { rows })
    }
}

/// The step conjugacies `φ_1, …, φ_n` and their product `φ_n ∘ … ∘ φ_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugacyChain {
    pub steps: Vec<TorusMapLift>,
    pub composed: TorusMapLift,
    /// `‖φ_n - Id‖₀`.
    pub step_norms: Vec<f64>,
    /// Degree the product is projected to.
    pub degree: usize,
}

impl ConjugacyChain {
    pub fn new(dim: usize, degree: usize) -> Self {
        ConjugacyChain {
            steps: Vec::new(),
            composed: TorusMapLift::identity(dim),
            step_norms: Vec::new(),
            degree,
        }
    }

    pub fn push(&mut self, phi: TorusMapLift) -> Result<(), SpectralError> {
        let target = self.degree.max(phi.degree());
        self.composed = compose(&phi, &self.composed, target)?.map;
        self.step_norms
            .push(phi.displacement_norm(0, NormMethod::GridSup).value);
        self.steps.push(phi);
        Ok(())
    }

    /// Recomputes the product from `steps` and returns its distance to
    /// `composed`.
    pub fn composition_defect(&self) -> Result<f64, SpectralError> {
        let dim = self.composed.dim();
        let mut acc = TorusMapLift::identity(dim);
        for phi in &self.steps {
            acc = compose(phi, &acc, self.degree.max(phi.degree()))?.map;
        }
        Ok(acc.max_diff(&self.composed))
    }

    pub fn verify_composition(&self, tol: f64) -> Result<f64, DriverError> {
        let residual = self.composition_defect()?;
        if residual > tol {
            return Err(DriverError::ResidualTooLarge {
                residual,
                bound: tol,
            });
        }
        Ok(residual)
    }

    pub fn to_file(&self) -> ChainFile {
        ChainFile {
            schema_version: SCHEMA_VERSION,
            steps: self.steps.iter().map(MapFile::from_map).collect(),
            composed: MapFile::from_map(&self.composed),
            step_norms: self.step_norms.clone(),
        }
    }

    pub fn from_file(file: &ChainFile) -> Result<Self, DriverError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(DriverError::Format(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        let steps = file
            .steps
            .iter()
            .map(MapFile::to_map)
            .collect::<Result<Vec<_>, _>>()?;
        let composed = file.composed.to_map()?;
        if file.step_norms.len() != steps.len() {
            return Err(DriverError::Format(
                "one step norm per step expected".into(),
            ));
        }
        Ok(ConjugacyChain {
            degree: composed.degree(),
            steps,
            composed,
            step_norms: file.step_norms.clone(),
        })
    }
}

/// `sup_x |Φ(F₁(x)) - Φ(x) - α|` reduced mod 1, by direct evaluation on a
/// uniform grid.
pub fn conjugacy_residual(phi: &TorusMapLift, f1: &TorusMapLift, alpha: &[f64]) -> f64 {
    let dim = f1.dim();
    let deg = phi.degree().max(f1.degree()).max(1);
    let n = (4 * deg + 4).min(if dim == 1 { 8192 } else { 128 });
    let grid = Grid::new(dim, n);
    par::max_range(grid.len(), |j| {
        let x = grid.node(j);
        let lhs = phi.evaluate(&f1.evaluate(&x));
        let rhs = phi.evaluate(&x);
        lhs.iter()
            .zip(&rhs)
            .zip(alpha)
            .map(|((l, r), a)| reduce_mod_one(l - r - a).abs())
            .fold(0.0, f64::max)
    })
}

/// The product of the chain, checked against `Φ∘F₁ = R_α∘Φ` to
/// `10·eps_stop`.
pub fn compose_chain(
    chain: &ConjugacyChain,
    f1: &TorusMapLift,
    alpha: &[f64],
    eps_stop: f64,
) -> Result<TorusMapLift, DriverError> {
    if chain.steps.is_empty() {
        return Err(DriverError::Format("empty chain".into()));
    }
    let residual = conjugacy_residual(&chain.composed, f1, alpha);
    let bound = 10.0 * eps_stop;
    if !(residual <= bound) {
        return Err(DriverError::ResidualTooLarge { residual, bound });
    }
    Ok(chain.composed.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub status: Status,
    pub steps_accepted: usize,
    pub alpha: DiophantineVector,
    pub params: SchedulerParams,
    /// Order used for the grid-sup `eps_s0` column.
    pub s_report: u32,
    /// Fourier-weighted `‖f - R_α‖` at order `ceil(s₀)`, initial and final.
    pub eps_s0_weighted_initial: f64,
    pub eps_s0_weighted_final: f64,
    /// Whether the initial weighted `s₀`-norm was below `N₁^b`.
    pub admitted: bool,
    pub eps0_initial: f64,
    pub eps0_final: f64,
    /// `sup|Φ∘F₁ - Φ - α|` of the final product.
    pub conjugacy_residual: f64,
    /// Distance between the stored product and a recomputation.
    pub composition_defect: f64,
    /// Steps whose `eps0` exceeded `N^{-γ₀}`.
    pub above_envelope: Vec<usize>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub posteriori: Vec<PosterioriReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub chain: ConjugacyChain,
    pub trace: NormTrace,
    pub summary: RunSummary,
    pub initial_map: TorusMapLift,
    pub final_map: TorusMapLift,
}

/// Truncation order of step `n`, capped at `degree_cap`; the cap is also used
/// once the schedule itself overflows.
pub fn step_order(p: &SchedulerParams, n: usize, degree_cap: usize, n_cap: usize) -> usize {
    schedule_n(p.n1, p.sigma, n, n_cap)
        .map(|v| v.min(degree_cap))
        .unwrap_or(degree_cap)
}

pub fn load_initial_map(
    cfg: &ExperimentConfig,
    alpha: &[f64],
) -> Result<TorusMapLift, DriverError> {
    let f = match &cfg.map {
        MapSource::Inline { map } => map.to_map()?,
        MapSource::File { path } => io::import_map(&cfg.resolve(path))?,
        MapSource::Generator { spec } => generate::make_test_map(spec, alpha)?,
    };
    if f.dim() != alpha.len() {
        return Err(DriverError::Config(format!(
            "map has d = {}, α has {} components",
            f.dim(),
            alpha.len()
        )));
    }
    Ok(f)
}

pub fn diophantine_vector(
    cfg: &ExperimentConfig,
    radius: usize,
) -> Result<DiophantineVector, DriverError> {
    let alpha = cfg.alpha_values()?;
    Ok(match cfg.alpha.gamma {
        GammaSpec::Auto(_) => DiophantineVector::with_best_gamma(&alpha, cfg.alpha.tau, radius)?,
        GammaSpec::Value(g) => DiophantineVector::verified(&alpha, g, cfg.alpha.tau, radius)?,
    })
}

fn weighted_eps(f: &TorusMapLift, alpha: &DiophantineVector, s: u32) -> f64 {
    f.distance_to_rotation(alpha.alpha(), s, NormMethod::FourierWeighted)
}

/// Runs the scheme. Only configuration problems are errors; every numerical
/// failure ends the run with a status.
pub fn run_scheme(cfg: &ExperimentConfig) -> Result<RunOutcome, DriverError> {
    cfg.validate()?;
    let params = cfg.scheduler_params()?;
    let st = &cfg.step;
    let max_iters = cfg.tolerances.max_iters;
    let orders: Vec<usize> = (1..=max_iters + 1)
        .map(|n| step_order(&params, n, st.degree_cap, st.n_cap))
        .collect();
    let largest = orders[..max_iters].iter().copied().max().unwrap_or(1);
    let radius = cfg.alpha.dc_radius.unwrap_or(largest);
    if radius < largest {
        return Err(DriverError::Config(format!(
            "dc_radius {radius} is below the largest scheduled N = {largest}"
        )));
    }
    let alpha = diophantine_vector(cfg, radius)?;
    let f1 = load_initial_map(cfg, alpha.alpha())?;

    let s0 = params.s0.ceil() as u32;
    let s_report = s0.min(10);
    let eps_s0_weighted_initial = weighted_eps(&f1, &alpha, s0);
    let admitted = eps_s0_weighted_initial < (params.n1 as f64).powf(params.b);

    let step_cfg = |target: usize| StepConfig {
        smallness_constant: st.smallness_constant,
        target_degree: Some(target),
        orders: vec![0, s_report],
    };
    let chain_degree = st.degree_cap.max(f1.degree());
    let mut chain = ConjugacyChain::new(f1.dim(), chain_degree);
    let mut trace = NormTrace::default();
    let mut diagnostics = Vec::new();
    let mut posteriori = Vec::new();
    let mut f = f1.clone();
    let mut status = Status::MaxIters;

    'steps: for n in 1..=max_iters {
        let mut n_used = orders[n - 1];
        let mut retried = false;
        let eps0 = kam_step::eps(&f, &alpha, 0);
        let eps_s0 = kam_step::eps(&f, &alpha, s_report);
        loop {
            let x = n_used as f64;
            let mut row = TraceRow {
                n,
                n_trunc: n_used,
                eps0,
                eps_s0,
                drift: f64::NAN,
                drift_bound: f64::NAN,
                env_eps0: x.powf(-params.gamma0),
                env_eps_s0: x.powf(params.b),
                phi_norm0: f64::NAN,
                accepted: false,
            };
            let target = orders[n]
                .max(2 * n_used)
                .max(f.degree())
                .min(st.degree_cap.max(n_used));
            match kam_step::step(&f, &alpha, n_used, &step_cfg(target)) {
                Err(StepError::SmallnessViolated { value, .. }) => {
                    log::info!("step {n}: smallness {value:.3e} at N = {n_used}");
                    trace.rows.push(row);
                    if retried || n_used <= 1 {
                        status = Status::Diverged;
                        break 'steps;
                    }
                    retried = true;
                    n_used /= 2;
                }
                Err(e) => {
                    log::warn!("step {n}: {e}");
                    trace.rows.push(row);
                    status = Status::Diverged;
                    break 'steps;
                }
                Ok(mut out) => {
                    let post =
                        kam_step::posteriori_check(&out.f_next, &alpha, st.c_post, st.drift_floor);
                    out.diag.drift_bound = post.bound;
                    row.drift = post.drift_norm;
                    row.drift_bound = post.bound;
                    row.phi_norm0 = out.diag.phi_norms[0].1;
                    row.accepted = post.ok;
                    trace.rows.push(row);
                    let ok = post.ok;
                    let eps_after = out.diag.eps0_after;
                    log::info!(
                        "step {n}: N = {n_used}, eps0 {eps0:.3e} -> {eps_after:.3e}, drift {:.3e}",
                        post.drift_norm
                    );
                    diagnostics.push(out.diag);
                    posteriori.push(post);
                    if !ok {
                        status = Status::DriftObstruction;
                        break 'steps;
                    }
                    if let Err(e) = chain.push(out.phi) {
                        log::warn!("step {n}: chain product failed: {e}");
                        status = Status::Diverged;
                        break 'steps;
                    }
                    f = out.f_next;
                    if eps_after <= cfg.tolerances.eps_stop {
                        status = Status::Converged;
                        break 'steps;
                    }
                    break;
                }
            }
        }
    }

    let conjugacy_residual = conjugacy_residual(&chain.composed, &f1, alpha.alpha());
    let composition_defect = chain.composition_defect().unwrap_or(f64::INFINITY);
    let above_envelope = trace
        .rows
        .iter()
        .filter(|r| r.above_envelope())
        .map(|r| r.n)
        .collect();
    let summary = RunSummary {
        status,
        steps_accepted: chain.steps.len(),
        params,
        s_report,
        eps_s0_weighted_initial,
        eps_s0_weighted_final: weighted_eps(&f, &alpha, s0),
        admitted,
        eps0_initial: kam_step::eps(&f1, &alpha, 0),
        eps0_final: kam_step::eps(&f, &alpha, 0),
        conjugacy_residual,
        composition_defect,
        above_envelope,
        diagnostics,
        posteriori,
        alpha,
    };
    Ok(RunOutcome {
        status,
        chain,
        trace,
        summary,
        initial_map: f1,
        final_map: f,
    })
}

/// Writes whichever outputs the config names.
pub fn persist(cfg: &ExperimentConfig, out: &RunOutcome) -> Result<(), DriverError> {
    let o = &cfg.output;
    if let Some(p) = &o.trace {
        io::write_text(&cfg.resolve(p), &out.trace.to_csv())?;
    }
    if let Some(p) = &o.chain {
        io::write_json(&cfg.resolve(p), &out.chain.to_file())?;
    }
    if let Some(p) = &o.summary {
        io::write_json(&cfg.resolve(p), &out.summary)?;
    }
    if let Some(p) = &o.final_map {
        io::export_map(&out.final_map, &cfg.resolve(p))?;
    }
    Ok(())
}

pub fn run_and_persist(cfg: &ExperimentConfig) -> Result<RunOutcome, DriverError> {
    let out = run_scheme(cfg)?;
    persist(cfg, &out)?;
    Ok(out)
}
