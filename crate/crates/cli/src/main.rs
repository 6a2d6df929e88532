//! `srcrec` — recover sparse source terms in elliptic PDEs from boundary
//! measurements.
//!
//! Every subcommand resolves its parameters in three layers: built-in
//! defaults, then a `--config` file (flat `key = value`), then command-line
//! flags.  Results go to stdout as a single JSON document (the `sweep`
//! subcommand prints CSV when no output directory is set); file artifacts
//! are written when `--out-dir` is given, and their paths are logged to
//! stderr.
//!
//! Exit codes: 0 success, 2 infeasible or degenerate problem (basis
//! pursuit with unmatchable data, certificate that does not exist, simplex
//! pivot cap), 1 any other error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use srcrec_core::certificate::{check_certificate, solve_basis_pursuit, BasisPursuit};
use srcrec_core::experiments::artifacts::{
    export_heatmap, read_heatmap_csv, sweep_csv_string, write_morozov_csv, write_sweep_csv,
    write_values_csv,
};
use srcrec_core::experiments::config::{load_config, ConfigFile};
use srcrec_core::experiments::metrics::compute_metrics;
use srcrec_core::experiments::scenarios::{scenario, SCENARIO_NAMES};
use srcrec_core::experiments::{
    prepare_example, run_prepared, write_artifacts, Overrides, PreparedRun,
};
use srcrec_core::fem::build_mesh;
use srcrec_core::forward::build_forward;
use srcrec_core::simplex::SimplexOptions;
use srcrec_core::sweep::{default_s_grid, morozov_alpha, sweep_strength};
use srcrec_core::Error;

#[derive(Parser)]
#[command(
    name = "srcrec",
    version,
    about = "Sparse source recovery in elliptic PDEs from boundary data",
    after_help = "Parameter precedence: defaults < --config file < flags.\n\
                  Exit codes: 0 ok, 2 infeasible/degenerate problem, 1 error."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Operator shift: -laplace(u) + epsilon*u (negative = Helmholtz).
    #[arg(long, global = true)]
    epsilon: Option<f64>,

    /// Regularization weight; omit on noisy runs to pick it by the
    /// discrepancy principle.
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Upper box bound on the source; `inf` disables it.
    #[arg(long, global = true, value_parser = parse_bound)]
    s: Option<f64>,

    /// Truncation rank of the forward model's SVD.
    #[arg(long, global = true)]
    rank: Option<usize>,

    /// Solver iteration budget.
    #[arg(long, global = true)]
    iters: Option<usize>,

    /// Noise generator seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Noise level as a fraction of the clean data range (0.01 = 1%).
    #[arg(long, global = true)]
    noise_level: Option<f64>,

    /// Directory for file artifacts (created if missing).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in example end to end; prints the recovery report.
    Example {
        /// One of: ex1, ex1mag, ex2, ex3, ex4, ex5.
        name: String,
    },
    /// Run the pipeline on a config-supplied source geometry.
    Recover,
    /// Assemble the boundary forward model and report its spectrum.
    BuildForward {
        /// Borrow grids and defaults from a built-in example.
        #[arg(long, default_value = "custom")]
        example: String,
    },
    /// Solve the weighted basis-pursuit program at the configured bound.
    BasisPursuit {
        #[arg(long, default_value = "custom")]
        example: String,
    },
    /// Check whether the configured source's support admits an
    /// exact-recovery certificate.
    Certificate {
        #[arg(long, default_value = "custom")]
        example: String,
        /// Strict margin enforced off the support.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Sweep the box bound and locate the L-curve vertex.
    Sweep {
        #[arg(long, default_value = "custom")]
        example: String,
    },
    /// Pick the regularization weight by the discrepancy principle.
    Morozov {
        #[arg(long, default_value = "custom")]
        example: String,
    },
    /// Score a recovered solution against a truth (heatmap CSV files).
    Metrics {
        /// Solution heatmap CSV (node_index, x, y, value).
        #[arg(long)]
        solution: PathBuf,
        /// Truth heatmap CSV in the same format.
        #[arg(long)]
        truth: PathBuf,
        /// Support threshold as a fraction of the solution maximum.
        #[arg(long, default_value_t = 0.1)]
        threshold_frac: f64,
    },
}

fn parse_bound(value: &str) -> Result<f64, String> {
    let lower = value.to_ascii_lowercase();
    if lower == "inf" || lower == "infinity" {
        return Ok(f64::INFINITY);
    }
    let v: f64 = value.parse().map_err(|_| format!("expected a number or `inf`, got {value:?}"))?;
    if !v.is_finite() {
        return Err(format!("{value:?} is not finite (spell infinity as `inf`)"));
    }
    Ok(v)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version come through as "errors" and must exit 0;
            // exit 2 stays reserved for infeasible problems.
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::IterationLimit { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

/// Resolved layered parameters: overrides for the run pipeline plus the
/// raw config for keys that live outside `Overrides` (sweep grid, delta).
struct Resolved {
    ov: Overrides,
    cfg: ConfigFile,
}

fn resolve(cli: &Cli) -> Result<Resolved, Error> {
    let mut ov = Overrides::default();
    let cfg = match &cli.config {
        Some(path) => {
            let cfg = load_config(path)?;
            ov.apply_config(&cfg);
            cfg
        }
        None => ConfigFile::default(),
    };
    // Flags override the config layer.
    if let Some(v) = cli.epsilon {
        ov.epsilon = Some(v);
    }
    if let Some(v) = cli.alpha {
        ov.alpha = Some(v);
    }
    if let Some(v) = cli.s {
        ov.s = Some(v);
    }
    if let Some(v) = cli.rank {
        ov.rank = Some(v);
    }
    if let Some(v) = cli.iters {
        ov.max_iters = Some(v);
    }
    if let Some(v) = cli.seed {
        ov.seed = v;
    }
    if let Some(v) = cli.noise_level {
        ov.noise_level = v;
    }
    if let Some(v) = &cli.out_dir {
        ov.out_dir = Some(v.clone());
    }
    Ok(Resolved { ov, cfg })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    let resolved = resolve(&cli)?;
    match &cli.cmd {
        Cmd::Example { name } => {
            if !SCENARIO_NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown example {name:?}; pick one of {}",
                    SCENARIO_NAMES.join(", ")
                )));
            }
            run_pipeline(name, &resolved.ov)
        }
        Cmd::Recover => run_pipeline("custom", &resolved.ov),
        Cmd::BuildForward { example } => build_forward_cmd(example, &resolved),
        Cmd::BasisPursuit { example } => basis_pursuit_cmd(example, &resolved),
        Cmd::Certificate { example, delta } => certificate_cmd(example, &resolved, *delta),
        Cmd::Sweep { example } => sweep_cmd(example, &resolved),
        Cmd::Morozov { example } => morozov_cmd(example, &resolved),
        Cmd::Metrics { solution, truth, threshold_frac } => {
            metrics_cmd(solution, truth, *threshold_frac)
        }
    }
}

fn log_written(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json serialization"));
}

fn run_pipeline(name: &str, ov: &Overrides) -> Result<ExitCode, Error> {
    let prep = prepare_example(name, ov)?;
    let outcome = run_prepared(&prep)?;
    let written = write_artifacts(&prep, &outcome)?;
    log_written(&written);
    let report = serde_json::to_value(&outcome.report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    print_json(&report);
    Ok(ExitCode::SUCCESS)
}

/// Builds the prepared run every model-facing subcommand starts from.
fn prepared(example: &str, resolved: &Resolved) -> Result<PreparedRun, Error> {
    prepare_example(example, &resolved.ov)
}

fn build_forward_cmd(example: &str, resolved: &Resolved) -> Result<ExitCode, Error> {
    // No source needed: resolve grids and operator directly so `custom`
    // works without shapes.
    let scen = scenario(example)?;
    let ov = &resolved.ov;
    let epsilon = ov.epsilon.unwrap_or(scen.epsilon);
    let rank = ov.rank.unwrap_or(scen.rank);
    let state_grid = ov.state_grid.unwrap_or(scen.state_grid);
    let source_grid = ov.source_grid.unwrap_or(scen.source_grid);
    let state_mesh = build_mesh(state_grid)?;
    let source_mesh = build_mesh(source_grid)?;
    let model = build_forward(&state_mesh, &source_mesh, epsilon, rank)?;
    let weight_min = model.weights.iter().copied().fold(f64::INFINITY, f64::min);
    let weight_max = model.weights.iter().copied().fold(0.0_f64, f64::max);
    if let Some(dir) = &ov.out_dir {
        std::fs::create_dir_all(dir)?;
        let (csv, pgm) = export_heatmap(&model.weights, &source_mesh, &dir.join("weights"))?;
        let sigma_path = dir.join("singular_values.csv");
        write_values_csv(&model.sigma, "sigma", &sigma_path)?;
        log_written(&[csv, pgm, sigma_path]);
    }
    print_json(&json!({
        "state_grid": state_grid,
        "source_grid": source_grid,
        "epsilon": epsilon,
        "boundary_values": model.m(),
        "source_nodes": model.n(),
        "rank": model.rank(),
        "sigma_max": model.sigma[0],
        "sigma_min": model.sigma[model.rank() - 1],
        "weight_min": weight_min,
        "weight_max": weight_max,
    }));
    Ok(ExitCode::SUCCESS)
}

fn basis_pursuit_cmd(example: &str, resolved: &Resolved) -> Result<ExitCode, Error> {
    let prep = prepared(example, resolved)?;
    let outcome = solve_basis_pursuit(&prep.model, &prep.b, prep.s, &SimplexOptions::default())?;
    match outcome {
        BasisPursuit::Optimal { x, weighted_l1 } => {
            let max = x.amax();
            let support = x.iter().filter(|&&v| v > prep.threshold_frac * max).count();
            if let Some(dir) = &prep.out_dir {
                std::fs::create_dir_all(dir)?;
                let (csv, pgm) = export_heatmap(&x, &prep.source_mesh, &dir.join("basis_pursuit"))?;
                log_written(&[csv, pgm]);
            }
            print_json(&json!({
                "status": "optimal",
                "weighted_l1": weighted_l1,
                "max_value": max,
                "support_size": support,
                "threshold_frac": prep.threshold_frac,
            }));
            Ok(ExitCode::SUCCESS)
        }
        BasisPursuit::Infeasible => {
            print_json(&json!({ "status": "infeasible" }));
            Ok(ExitCode::from(2))
        }
    }
}

fn certificate_cmd(
    example: &str,
    resolved: &Resolved,
    delta_flag: Option<f64>,
) -> Result<ExitCode, Error> {
    let prep = prepared(example, resolved)?;
    let support: Vec<usize> =
        (0..prep.truth.len()).filter(|&i| prep.truth[i] != 0.0).collect();
    let delta = delta_flag.or(resolved.cfg.delta).unwrap_or(1e-3);
    let report = check_certificate(&prep.model, &support, delta)?;
    let feasible = report.feasible;
    let value = serde_json::to_value(&report)
        .map_err(|e| Error::Format(format!("certificate serialization: {e}")))?;
    print_json(&value);
    Ok(if feasible { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// The sweep and discrepancy subcommands need a concrete alpha; noisy runs
/// without one get it from the discrepancy principle, like the pipeline.
fn concrete_alpha(prep: &PreparedRun) -> Result<f64, Error> {
    match prep.alpha {
        Some(a) => Ok(a),
        None => {
            let eta = prep
                .noise_estimate
                .ok_or_else(|| Error::Internal("alpha left open on a noiseless run".into()))?;
            let template = prep.problem(1.0)?;
            let found = morozov_alpha(&template, eta)?;
            eprintln!("alpha {} selected by the discrepancy principle", found.alpha);
            Ok(found.alpha)
        }
    }
}

fn sweep_cmd(example: &str, resolved: &Resolved) -> Result<ExitCode, Error> {
    let prep = prepared(example, resolved)?;
    let alpha = concrete_alpha(&prep)?;
    let template = prep.problem(alpha)?;
    let cfg = &resolved.cfg;
    let grid = match (cfg.s_min, cfg.s_max, cfg.s_count) {
        (None, None, None) => default_s_grid(&template)?,
        (Some(lo), Some(hi), count) => {
            let count = count.unwrap_or(26);
            if count < 2 || !(hi > lo) || !(lo > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "sweep grid needs 0 < s_min < s_max and s_count >= 2, \
                     got s_min={lo}, s_max={hi}, s_count={count}"
                )));
            }
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
        _ => {
            return Err(Error::InvalidArgument(
                "set both s_min and s_max (s_count optional) or neither".into(),
            ))
        }
    };
    let sweep = sweep_strength(&template, &grid)?;
    match &prep.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("sweep.csv");
            write_sweep_csv(&sweep, &path)?;
            log_written(&[path]);
            let vertex = serde_json::to_value(&sweep.vertex)
                .map_err(|e| Error::Format(format!("vertex serialization: {e}")))?;
            print_json(&json!({
                "alpha": alpha,
                "points": sweep.s_grid.len(),
                "vertex": vertex,
            }));
        }
        None => print!("{}", sweep_csv_string(&sweep)),
    }
    Ok(ExitCode::SUCCESS)
}

fn morozov_cmd(example: &str, resolved: &Resolved) -> Result<ExitCode, Error> {
    let prep = prepared(example, resolved)?;
    let eta = prep.noise_estimate.ok_or_else(|| {
        Error::InvalidArgument(
            "the discrepancy principle needs noisy data; set --noise-level > 0".into(),
        )
    })?;
    let template = prep.problem(prep.alpha.unwrap_or(1.0))?;
    let found = morozov_alpha(&template, eta)?;
    if let Some(dir) = &prep.out_dir {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("morozov.csv");
        write_morozov_csv(&found, &path)?;
        log_written(&[path]);
    }
    let value = serde_json::to_value(&found)
        .map_err(|e| Error::Format(format!("morozov serialization: {e}")))?;
    print_json(&value);
    Ok(ExitCode::SUCCESS)
}

fn metrics_cmd(solution: &Path, truth: &Path, threshold_frac: f64) -> Result<ExitCode, Error> {
    let x = read_heatmap_csv(solution)?;
    let x_star = read_heatmap_csv(truth)?;
    let report = compute_metrics(&x, &x_star, threshold_frac)?;
    let value = serde_json::to_value(&report)
        .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
    print_json(&value);
    Ok(ExitCode::SUCCESS)
}
