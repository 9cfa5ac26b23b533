use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use kam_torus::arithmetic::{best_gamma, verify_dc, DiophantineVector};
use kam_torus::cohomology;
use kam_torus::driver::config::{parse_alpha_list, ExperimentConfig};
use kam_torus::driver::generate::{make_test_map, GeneratorSpec};
use kam_torus::driver::{io, run_and_persist, RunOutcome};
use kam_torus::rotation::rotation_set_estimate;
use kam_torus::scheduler::{
    check_inductive_inequalities, derive_constants, envelopes, mu_window, omega0_bound,
    recursion_exponent_margins, validate, DEFAULT_N_CAP,
};
use kam_torus::spectral::TorusMapLift;

#[derive(Parser)]
#[command(
    name = "kam-torus",
    version,
    about = "KAM conjugacy scheme for Diophantine torus rotations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments; several configs run concurrently.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
    /// Feasibility, μ-window, ω₀ bound and envelopes of a parameter set.
    Params {
        #[arg(long, default_value_t = 0.5)]
        sigma: f64,
        #[arg(long, default_value_t = 3.0)]
        lambda: f64,
        #[arg(long, default_value_t = 2.0)]
        nu: f64,
        /// Defaults to the midpoint of the μ-window.
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long = "N1", default_value_t = 8)]
        n1: usize,
        /// Number of schedule steps to tabulate.
        #[arg(long, default_value_t = 6)]
        steps: usize,
    },
    /// Birkhoff averages and hulls of a map file.
    Rotation {
        map: PathBuf,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        iters: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Solve the cohomological equation for every component of `F - R_α`.
    Cohomology {
        map: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        tau: f64,
        #[arg(long = "N")]
        n: usize,
        /// Defaults to the best γ on the ball of radius N.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best γ and worst frequency on the ball of radius K.
    DcCheck {
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        tau: f64,
        #[arg(long = "K")]
        k: usize,
    },
    /// Build an oracle map from a generator spec (JSON or TOML).
    MakeMap {
        spec: PathBuf,
        #[arg(long)]
        alpha: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run_one(path: &Path) -> Result<RunOutcome> {
    let cfg = ExperimentConfig::from_file(path)?;
    Ok(run_and_persist(&cfg)?)
}

fn cmd_run(configs: &[PathBuf]) -> Result<u8> {
    // Each run writes only its own outputs.
    let results: Vec<Result<RunOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = configs
            .iter()
            .map(|p| s.spawn(move || run_one(p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("run panicked"))
            .collect()
    });
    let mut code = 0u8;
    for (path, res) in configs.iter().zip(results) {
        match res {
            Ok(out) => {
                println!(
                    "{}: {:?} after {} steps, eps0 = {:e}",
                    path.display(),
                    out.status,
                    out.summary.steps_accepted,
                    out.summary.eps0_final
                );
                code = code.max(out.status.exit_code() as u8);
            }
            Err(e) => {
                eprintln!("{}: {e:#}", path.display());
                code = code.max(1);
            }
        }
    }
    Ok(code)
}

#[allow(clippy::too_many_arguments)]
fn cmd_params(
    sigma: f64,
    lambda: f64,
    nu: f64,
    mu: Option<f64>,
    tau: f64,
    dim: usize,
    n1: usize,
    steps: usize,
) -> Result<()> {
    let v = validate(sigma, lambda, nu);
    let window = mu_window(sigma, lambda, nu).ok();
    let mut report = json!({
        "validation": v,
        "mu_window": window,
        "omega0_bound": omega0_bound(sigma, lambda),
    });
    let mu = match (mu, window) {
        (Some(m), _) => Some(m),
        (None, Some((lo, hi))) => Some(0.5 * (lo + hi)),
        (None, None) => None,
    };
    if let (true, Some(mu)) = (v.ok, mu) {
        let p = derive_constants(tau, dim, sigma, lambda, mu, nu, n1)?;
        let env: Vec<_> = (1..=steps)
            .map_while(|n| envelopes(&p, n, DEFAULT_N_CAP).ok())
            .collect();
        report["params"] = json!(p);
        report["inequalities"] = json!(check_inductive_inequalities(&p));
        report["recursion_margins"] = json!(recursion_exponent_margins(&p));
        report["envelopes"] = json!(env);
    }
    print_json(&report)
}

fn cmd_rotation(map: &Path, samples: usize, iters: usize, out_dir: &Path) -> Result<()> {
    let f = io::import_map(map)?;
    let data = rotation_set_estimate(&f, samples, iters);
    std::fs::create_dir_all(out_dir).with_context(|| out_dir.display().to_string())?;
    io::write_json(&out_dir.join("rotation.json"), &data)?;
    io::write_text(&out_dir.join("birkhoff.csv"), &data.samples_csv())?;
    io::write_text(
        &out_dir.join("displacement_hull.csv"),
        &data.displacement_hull.to_csv(),
    )?;
    io::write_text(
        &out_dir.join("rotation_hull.csv"),
        &data.rotation_hull.to_csv(),
    )?;
    print_json(&json!({
        "displacement_hull_diameter": data.displacement_hull.diameter(),
        "rotation_hull_diameter": data.rotation_hull.diameter(),
        "rotation_inside_displacement": data
            .displacement_hull
            .contains_hull(&data.rotation_hull, data.displacement_hull.tolerance),
    }))
}

fn cmd_cohomology(
    map: &Path,
    alpha: &str,
    tau: f64,
    n: usize,
    gamma: Option<f64>,
    out: &Path,
) -> Result<()> {
    let f = io::import_map(map)?;
    let a = parse_alpha_list(alpha)?;
    if a.len() != f.dim() {
        bail!("α has {} components, the map has d = {}", a.len(), f.dim());
    }
    let dv = match gamma {
        Some(g) => DiophantineVector::verified(&a, g, tau, n)?,
        None => DiophantineVector::with_best_gamma(&a, tau, n)?,
    };
    let g = f.normalized();
    let mut comps = Vec::new();
    let mut residuals = Vec::new();
    for u in g.displacement() {
        let phi = cohomology::solve(u, &dv, n)?;
        residuals.push(cohomology::residual_sup(&phi, u, dv.alpha(), n));
        comps.push(phi);
    }
    let phi = TorusMapLift::new(vec![0.0; f.dim()], comps)?;
    io::export_map(&phi, out)?;
    print_json(&json!({ "N": n, "gamma": dv.gamma(), "tau": tau, "residual": residuals }))
}

fn cmd_dc_check(alpha: &str, tau: f64, k: usize) -> Result<()> {
    let a = parse_alpha_list(alpha)?;
    let gamma = best_gamma(&a, tau, k)?;
    let report = verify_dc(&a, gamma, tau, k)?;
    print_json(&json!({
        "alpha": a,
        "tau": tau,
        "K": k,
        "best_gamma": gamma,
        "worst_k": report.worst_k,
        "worst_ratio": report.worst_ratio,
    }))
}

fn cmd_make_map(spec: &Path, alpha: &str, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec).with_context(|| spec.display().to_string())?;
    let g: GeneratorSpec = if spec.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text)?
    } else {
        serde_json::from_str(&text)?
    };
    let f = make_test_map(&g, &parse_alpha_list(alpha)?)?;
    io::export_map(&f, out)?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Command::Run { configs } => return cmd_run(&configs),
        Command::Params {
            sigma,
            lambda,
            nu,
            mu,
            tau,
            dim,
            n1,
            steps,
        } => cmd_params(sigma, lambda, nu, mu, tau, dim, n1, steps)?,
        Command::Rotation {
            map,
            samples,
            iters,
            out_dir,
        } => cmd_rotation(&map, samples, iters, &out_dir)?,
        Command::Cohomology {
            map,
            alpha,
            tau,
            n,
            gamma,
            out,
        } => cmd_cohomology(&map, &alpha, tau, n, gamma, &out)?,
        Command::DcCheck { alpha, tau, k } => cmd_dc_check(&alpha, tau, k)?,
        Command::MakeMap { spec, alpha, out } => cmd_make_map(&spec, &alpha, &out)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
