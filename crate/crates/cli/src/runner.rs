//! Reference solve plus the `(optimizer, seed)` sweep.

use std::path::Path;

use prospect_core::data::{load_csv, make_synthetic, standardize};
use prospect_core::linalg::norm;
use prospect_core::losses::oracle_for;
use prospect_core::optim::{
    reference_minimizer, run_trajectory, Lsvrg, MinibatchSgd, Prospect, ProspectMoreau, RunOptions, RunStatus,
    SaddleSaga, Srda,
};
use prospect_core::{Dataset, Objective, Optimizer, RunRecord, Spectrum};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{DatasetSource, ExperimentConfig, OptimizerKind, OptimizerSpec};
use crate::error::{CliError, Result};
use crate::metrics::{format_float, write_metrics, write_plot, MetricsRecord};
use crate::parity::{predict, statistical_parity_gap};

/// Objectives beyond this multiple of `F(w0)` mark a run as diverged.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset> {
    match source {
        DatasetSource::Csv { path, schema, standardize: scale } => {
            let data = load_csv(path, schema).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if *scale {
                let (train, _, _) = standardize(&data, &data).map_err(|e| CliError::Data(e.to_string()))?;
                Ok(train)
            } else {
                Ok(data)
            }
        }
        DatasetSource::Synthetic(spec) => make_synthetic(spec).map_err(|e| CliError::Config(e.to_string())),
    }
}

pub fn build_objective(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Objective> {
    let loss = oracle_for(dataset).map_err(|e| CliError::Data(e.to_string()))?;
    let n = dataset.len();
    let spectrum = Spectrum::new(cfg.objective.family, n).map_err(|e| CliError::Config(e.to_string()))?;
    Objective::new(loss, spectrum, cfg.objective.nu, cfg.objective.mu_for(n), cfg.objective.divergence)
        .map_err(|e| CliError::Config(e.to_string()))
}

pub fn build_optimizer(
    spec: &OptimizerSpec,
    obj: &Objective,
    w0: &[f64],
    seed: u64,
) -> prospect_core::Result<Box<dyn Optimizer>> {
    let n = obj.len();
    Ok(match spec.kind {
        OptimizerKind::Prospect => Box::new(Prospect::new(obj, w0, spec.lr, spec.coupling, seed)?),
        OptimizerKind::ProspectMoreau => Box::new(ProspectMoreau::new(obj, w0, spec.lr, spec.coupling, seed)?),
        OptimizerKind::SaddleSaga => Box::new(SaddleSaga::new(obj, w0, spec.lr, spec.dual_rate, seed)?),
        OptimizerKind::Lsvrg => Box::new(Lsvrg::new(obj, w0, spec.lr, spec.epoch_for(n), seed)?),
        OptimizerKind::Sgd => Box::new(MinibatchSgd::new(obj, w0, spec.lr, spec.batch_for(n), seed)?),
        OptimizerKind::Srda => Box::new(Srda::new(obj, w0, spec.lr, spec.batch_for(n), seed)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub n: usize,
    pub dim: usize,
    /// `F(w0)` at the zero start point.
    pub f0: f64,
    pub f_star: f64,
    pub grad_norm: f64,
    pub w_star: Vec<f64>,
}

pub fn solve_reference(cfg: &ExperimentConfig, obj: &Objective) -> Result<Reference> {
    let solver = |e: prospect_core::Error| CliError::Solver(format!("reference solve failed: {e}"));
    let w0 = vec![0.0; obj.dim()];
    let w_star = reference_minimizer(obj, None, cfg.reference).map_err(solver)?;
    let f_star = obj.full_objective(&w_star).map_err(solver)?;
    let f0 = obj.full_objective(&w0).map_err(solver)?;
    let grad_norm = norm(&obj.full_gradient(&w_star).map_err(solver)?);
    Ok(Reference { n: obj.len(), dim: obj.dim(), f0, f_star, grad_norm, w_star })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub record: RunRecord,
    /// Statistical parity gap of the final iterate, when the data has groups.
    pub parity_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub reference: Reference,
    pub runs: Vec<RunResult>,
}

impl ExperimentOutput {
    /// Metrics rows in run order: optimizers as configured, seeds within.
    pub fn records(&self) -> Vec<MetricsRecord> {
        self.runs
            .iter()
            .flat_map(|run| run.record.rows.iter().map(|row| MetricsRecord::new(&run.label, run.seed, row)))
            .collect()
    }
}

/// Solves the reference once, then runs every `(optimizer, seed)` pair on a
/// worker pool. Output order does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig, seed_offset: u64) -> Result<ExperimentOutput> {
    let dataset = load_dataset(&cfg.dataset)?;
    let obj = build_objective(cfg, &dataset)?;
    let w0 = vec![0.0; obj.dim()];
    // Reject incompatible optimizer/objective pairs before the expensive part.
    for spec in &cfg.optimizers {
        build_optimizer(spec, &obj, &w0, 0).map_err(|e| CliError::Config(format!("optimizer `{}`: {e}", spec.label)))?;
    }
    let reference = solve_reference(cfg, &obj)?;

    let jobs: Vec<(&OptimizerSpec, u64)> = cfg
        .optimizers
        .iter()
        .flat_map(|spec| cfg.training.seeds.iter().map(move |&s| (spec, s.wrapping_add(seed_offset))))
        .collect();
    let opts = RunOptions {
        max_passes: cfg.training.max_passes,
        log_every: cfg.training.log_every,
        divergence_factor: DIVERGENCE_FACTOR,
    };
    let runs = jobs
        .par_iter()
        .map(|&(spec, seed)| -> Result<RunResult> {
            let failed = |e: prospect_core::Error| CliError::Solver(format!("{} (seed {seed}): {e}", spec.label));
            let mut opt = build_optimizer(spec, &obj, &w0, seed).map_err(failed)?;
            let record = run_trajectory(opt.as_mut(), &obj, reference.f0, reference.f_star, opts).map_err(failed)?;
            let parity_gap = match (dataset.groups(), &record.status) {
                (Some(groups), RunStatus::Completed) => {
                    Some(statistical_parity_gap(&predict(&dataset, &record.final_iterate), groups, dataset.task())?)
                }
                _ => None,
            };
            Ok(RunResult { label: spec.label.clone(), seed, record, parity_gap })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutput { reference, runs })
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REFERENCE_FILE: &str = "reference.json";
pub const PLOT_FILE: &str = "suboptimality.svg";

/// Writes `metrics.csv`, `summary.csv`, `reference.json` and optionally
/// `suboptimality.svg` into `dir`.
pub fn write_outputs(output: &ExperimentOutput, dir: &Path, plot: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let records = output.records();
    write_metrics(&records, &dir.join(METRICS_FILE))?;
    if plot {
        write_plot(&records, &dir.join(PLOT_FILE))?;
    }

    let path = dir.join(SUMMARY_FILE);
    let write_err = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(&path).map_err(write_err)?;
    writer
        .write_record(["optimizer", "seed", "status", "passes", "final_objective", "final_suboptimality", "parity_gap"])
        .map_err(write_err)?;
    for run in &output.runs {
        let last = run.record.rows.last().expect("the driver always logs the initial state");
        writer
            .write_record([
                run.label.clone(),
                run.seed.to_string(),
                run.record.status.tag().to_owned(),
                format_float(last.pass),
                format_float(last.objective),
                format_float(last.suboptimality),
                run.parity_gap.map(format_float).unwrap_or_default(),
            ])
            .map_err(write_err)?;
    }
    writer.flush().map_err(|e| CliError::io(&path, e))?;

    let path = dir.join(REFERENCE_FILE);
    let json = serde_json::to_string_pretty(&output.reference).expect("reference serializes");
    std::fs::write(&path, json + "\n").map_err(|e| CliError::io(&path, e))
}
