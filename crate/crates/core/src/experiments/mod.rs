//! Scenario runner: named end-to-end recovery experiments.
//!
//! A run resolves a built-in scenario plus user overrides into meshes,
//! a forward model, synthetic (optionally noisy, possibly two-grid) data,
//! and a solver configuration; solves; and scores the result against the
//! rasterized truth.  Artifacts (CSV heatmaps, PGM previews, JSON report)
//! are written when an output directory is set.

pub mod artifacts;
pub mod config;
pub mod data;
pub mod metrics;
pub mod scenarios;
pub mod source;

use std::path::PathBuf;
use std::time::Instant;

use crate::admm::{self, AdmmResult, ObjectiveMode, RecoveryProblem};
use crate::error::Error;
use crate::experiments::config::ConfigFile;
use crate::experiments::data::{
    add_gaussian_noise, apply_forward_exact, noise_tau_for_level, restrict_boundary_data,
    NoiseSpec,
};
use crate::experiments::metrics::{compute_metrics, ParameterEcho, RecoveryReport};
use crate::experiments::scenarios::scenario;
use crate::experiments::source::{rasterize_source, SourceSpec};
use crate::fem::{build_mesh, TriMesh};
use crate::forward::{build_forward, ForwardModel};
use crate::sweep::{morozov_alpha, MorozovResult};
use crate::DenseVector;

/// User-facing knobs layered over a scenario's defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub s: Option<f64>,
    pub epsilon: Option<f64>,
    pub rank: Option<usize>,
    pub max_iters: Option<usize>,
    pub noise_level: f64,
    pub seed: u64,
    /// Replace the penalty weights with ones (the deliberately failing
    /// unweighted variant).
    pub unit_weights: bool,
    pub threshold_frac: f64,
    pub mode: ObjectiveMode,
    pub shapes: Option<SourceSpec>,
    pub out_dir: Option<PathBuf>,
    pub state_grid: Option<usize>,
    pub source_grid: Option<usize>,
    pub data_state_grid: Option<usize>,
    pub data_source_grid: Option<usize>,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides {
            alpha: None,
            s: None,
            epsilon: None,
            rank: None,
            max_iters: None,
            noise_level: 0.0,
            seed: 0,
            unit_weights: false,
            threshold_frac: 0.1,
            mode: ObjectiveMode::Projected,
            shapes: None,
            out_dir: None,
            state_grid: None,
            source_grid: None,
            data_state_grid: None,
            data_source_grid: None,
        }
    }
}

impl Overrides {
    /// Layers a parsed config file over these overrides (config wins).
    pub fn apply_config(&mut self, cfg: &ConfigFile) {
        if let Some(v) = cfg.alpha {
            self.alpha = Some(v);
        }
        if let Some(v) = cfg.s {
            self.s = Some(v);
        }
        if let Some(v) = cfg.epsilon {
            self.epsilon = Some(v);
        }
        if let Some(v) = cfg.rank {
            self.rank = Some(v);
        }
        if let Some(v) = cfg.iters {
            self.max_iters = Some(v);
        }
        if let Some(v) = cfg.noise_level {
            self.noise_level = v;
        }
        if let Some(v) = cfg.seed {
            self.seed = v;
        }
        if let Some(v) = cfg.unit_weights {
            self.unit_weights = v;
        }
        if let Some(v) = cfg.threshold_frac {
            self.threshold_frac = v;
        }
        if let Some(v) = cfg.mode {
            self.mode = v;
        }
        if let Some(v) = &cfg.shapes {
            self.shapes = Some(v.clone());
        }
        if let Some(v) = &cfg.out_dir {
            self.out_dir = Some(v.clone());
        }
        if let Some(v) = cfg.state_grid {
            self.state_grid = Some(v);
        }
        if let Some(v) = cfg.source_grid {
            self.source_grid = Some(v);
        }
        if let Some(v) = cfg.data_state_grid {
            self.data_state_grid = Some(v);
        }
        if let Some(v) = cfg.data_source_grid {
            self.data_source_grid = Some(v);
        }
    }
}

/// A fully resolved run: model built, data generated, parameters fixed —
/// everything but the solve itself (and, for noisy runs, the discrepancy
/// search for α, which needs solves).
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub name: String,
    pub epsilon: f64,
    /// `None` means α is picked by the discrepancy principle during the
    /// run (noisy data without an explicit override).
    pub alpha: Option<f64>,
    pub s: f64,
    pub max_iters: usize,
    pub threshold_frac: f64,
    pub mode: ObjectiveMode,
    pub unit_weights: bool,
    pub noise_level: f64,
    pub seed: u64,
    pub state_grid: usize,
    pub source_grid: usize,
    pub data_state_grid: usize,
    pub data_source_grid: usize,
    pub state_mesh: TriMesh,
    pub source_mesh: TriMesh,
    pub model: ForwardModel,
    /// Truth rasterized on the inverse source mesh.
    pub truth: DenseVector,
    /// Boundary data at the inverse level (restricted if two-grid).
    pub b: DenseVector,
    /// ‖noise‖₂ estimate at the inverse level, when noise was added.
    pub noise_estimate: Option<f64>,
    /// Penalty weights the solver will use.
    pub weights: DenseVector,
    pub out_dir: Option<PathBuf>,
}

impl PreparedRun {
    /// The recovery problem this run solves, with `alpha` filled in.
    pub fn problem(&self, alpha: f64) -> Result<RecoveryProblem<'_>, Error> {
        let mut problem = RecoveryProblem::new(&self.model, self.b.clone(), self.mode, alpha)?;
        problem.s = self.s;
        problem.max_iters = self.max_iters;
        problem.weights = self.weights.clone();
        Ok(problem)
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RecoveryReport,
    /// Recovered source on the inverse source mesh.
    pub solution: DenseVector,
    /// Truth on the same mesh.
    pub truth: DenseVector,
    pub admm: AdmmResult,
    /// Present when α came from the discrepancy principle.
    pub morozov: Option<MorozovResult>,
    /// The data the solver saw.
    pub data: DenseVector,
}

/// Resolves a named scenario and overrides into a ready-to-solve run.
pub fn prepare_example(name: &str, ov: &Overrides) -> Result<PreparedRun, Error> {
    let scen = scenario(name)?;
    if !(ov.noise_level >= 0.0) || !ov.noise_level.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise level must be finite and >= 0, got {}",
            ov.noise_level
        )));
    }
    let epsilon = ov.epsilon.unwrap_or(scen.epsilon);
    let rank = ov.rank.unwrap_or(scen.rank);
    let s = ov.s.unwrap_or(scen.s);
    let spec = ov.shapes.clone().unwrap_or(scen.spec);
    let state_grid = ov.state_grid.unwrap_or(scen.state_grid);
    let source_grid = ov.source_grid.unwrap_or(scen.source_grid);
    let data_state_grid = ov.data_state_grid.unwrap_or(scen.data_state_grid);
    let data_source_grid = ov.data_source_grid.unwrap_or(scen.data_source_grid);

    let state_mesh = build_mesh(state_grid)?;
    let source_mesh = build_mesh(source_grid)?;
    let data_state_mesh = build_mesh(data_state_grid)?;
    let data_source_mesh = build_mesh(data_source_grid)?;

    let truth = rasterize_source(&spec, &source_mesh)?;
    let truth_data = rasterize_source(&spec, &data_source_mesh)?;
    let clean = apply_forward_exact(&data_state_mesh, &data_source_mesh, epsilon, &truth_data)?;
    let tau = noise_tau_for_level(&clean, ov.noise_level)?;
    let b_fine = add_gaussian_noise(&clean, &NoiseSpec { tau, seed: ov.seed })?;
    let (b, restricted) = if data_state_grid == state_grid {
        (b_fine, false)
    } else {
        (restrict_boundary_data(&data_state_mesh, &state_mesh, &b_fine)?, true)
    };

    let model = build_forward(&state_mesh, &source_mesh, epsilon, rank)?;
    let weights = if ov.unit_weights {
        DenseVector::from_element(model.n(), 1.0)
    } else {
        model.weights.clone()
    };
    // Restriction rescales every entry by sqrt(w_coarse/w_fine) = sqrt(2)
    // on these uniform boundaries, so the noise estimate scales with it.
    let noise_estimate = if tau > 0.0 {
        let factor = if restricted { 2f64.sqrt() } else { 1.0 };
        Some(factor * tau * (b.len() as f64).sqrt())
    } else {
        None
    };
    let alpha = match ov.alpha {
        Some(a) => Some(a),
        None if noise_estimate.is_none() => Some(scen.alpha),
        None => None,
    };
    Ok(PreparedRun {
        name: name.to_string(),
        epsilon,
        alpha,
        s,
        max_iters: ov.max_iters.unwrap_or(5000),
        threshold_frac: ov.threshold_frac,
        mode: ov.mode,
        unit_weights: ov.unit_weights,
        noise_level: ov.noise_level,
        seed: ov.seed,
        state_grid,
        source_grid,
        data_state_grid,
        data_source_grid,
        state_mesh,
        source_mesh,
        model,
        truth,
        b,
        noise_estimate,
        weights,
        out_dir: ov.out_dir.clone(),
    })
}

/// Solves a prepared run (searching α by the discrepancy principle first
/// when it was left open) and scores the result.
pub fn run_prepared(prep: &PreparedRun) -> Result<RunOutcome, Error> {
    let started = Instant::now();
    let (alpha, morozov) = match prep.alpha {
        Some(a) => (a, None),
        None => {
            let eta = prep.noise_estimate.ok_or_else(|| {
                Error::Internal("alpha left open on a noiseless run".into())
            })?;
            let template = prep.problem(1.0)?;
            let found = morozov_alpha(&template, eta)?;
            (found.alpha, Some(found))
        }
    };
    let problem = prep.problem(alpha)?;
    let admm_result = admm::solve(&problem)?;
    let runtime = started.elapsed().as_secs_f64();

    let mut report = compute_metrics(&admm_result.x, &prep.truth, prep.threshold_frac)?;
    report.weighted_l1 = Some(admm_result.weighted_l1);
    report.misfit = Some(admm_result.data_misfit);
    report.runtime_seconds = Some(runtime);
    report.parameters = Some(ParameterEcho {
        example: prep.name.clone(),
        epsilon: prep.epsilon,
        alpha,
        s: prep.s.is_finite().then_some(prep.s),
        rank: prep.model.rank(),
        max_iters: prep.max_iters,
        noise_level: prep.noise_level,
        seed: prep.seed,
        threshold_frac: prep.threshold_frac,
        state_grid: prep.state_grid,
        source_grid: prep.source_grid,
        data_state_grid: prep.data_state_grid,
        data_source_grid: prep.data_source_grid,
        unit_weights: prep.unit_weights,
    });
    Ok(RunOutcome {
        solution: admm_result.x.clone(),
        truth: prep.truth.clone(),
        report,
        admm: admm_result,
        morozov,
        data: prep.b.clone(),
    })
}

/// Writes the run's artifacts into its output directory (no-op without
/// one): solution and truth heatmaps, the data CSV, the JSON report, and
/// the α-search trace when the discrepancy principle ran.
pub fn write_artifacts(prep: &PreparedRun, outcome: &RunOutcome) -> Result<Vec<PathBuf>, Error> {
    let Some(dir) = &prep.out_dir else {
        return Ok(Vec::new());
    };
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let (csv, pgm) = artifacts::export_heatmap(&outcome.solution, &prep.source_mesh, &dir.join("solution"))?;
    written.extend([csv, pgm]);
    let (csv, pgm) = artifacts::export_heatmap(&outcome.truth, &prep.source_mesh, &dir.join("truth"))?;
    written.extend([csv, pgm]);
    let data_path = dir.join("data.csv");
    artifacts::write_values_csv(&outcome.data, "b", &data_path)?;
    written.push(data_path);
    let report_path = dir.join("report.json");
    artifacts::write_report_json(&outcome.report, &report_path)?;
    written.push(report_path);
    if let Some(found) = &outcome.morozov {
        let path = dir.join("morozov.csv");
        artifacts::write_morozov_csv(found, &path)?;
        written.push(path);
    }
    Ok(written)
}

/// Prepares, solves, scores and (when an output directory is set) writes
/// artifacts for a named example.
pub fn run_example(name: &str, overrides: &Overrides) -> Result<RunOutcome, Error> {
    let prep = prepare_example(name, overrides)?;
    let outcome = run_prepared(&prep)?;
    write_artifacts(&prep, &outcome)?;
    Ok(outcome)
}
