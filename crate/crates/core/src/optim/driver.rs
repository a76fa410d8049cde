use std::time::Instant;

use super::{suboptimality, Objective, Optimizer};
use crate::error::{Error, Result};

/// One logged point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Cumulative optimizer oracle calls divided by `n`.
    pub pass: f64,
    pub objective: f64,
    pub suboptimality: f64,
    /// Optimizer time only; logging evaluations are excluded.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The objective exceeded the divergence threshold or stopped being finite.
    Diverged,
}

impl RunStatus {
    pub fn tag(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<MetricsRow>,
    pub status: RunStatus,
    pub final_iterate: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub max_passes: f64,
    pub log_every: f64,
    /// A run diverges once `F(w) > divergence_factor * F(w0)`.
    pub divergence_factor: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_passes: 100.0, log_every: 1.0, divergence_factor: 1e3 }
    }
}

/// Steps `opt` until `max_passes`, logging `F` roughly every `log_every`
/// passes. The first row is the state right after initialization.
pub fn run_trajectory(
    opt: &mut dyn Optimizer,
    obj: &Objective,
    f0: f64,
    f_star: f64,
    opts: RunOptions,
) -> Result<RunRecord> {
    if !(opts.max_passes > 0.0 && opts.log_every > 0.0) {
        return Err(Error::Parameter(format!(
            "max passes and logging interval must be positive, got {} and {}",
            opts.max_passes, opts.log_every
        )));
    }
    let n = obj.len() as f64;
    let threshold = opts.divergence_factor * f0.abs().max(f64::MIN_POSITIVE);
    let diverged = |f: f64| !f.is_finite() || f > threshold;
    let mut rows = Vec::new();
    let mut elapsed = 0.0;
    let log = |opt: &dyn Optimizer, elapsed: f64, rows: &mut Vec<MetricsRow>| -> Result<bool> {
        let pass = opt.oracle_calls() as f64 / n;
        let objective = match obj.full_objective(opt.iterate()) {
            Ok(f) => f,
            Err(Error::Data(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        let sub = suboptimality(objective, f0, f_star)?;
        if rows.last().is_none_or(|r: &MetricsRow| pass > r.pass) {
            rows.push(MetricsRow { pass, objective, suboptimality: sub, wall_time_s: elapsed });
        }
        Ok(diverged(objective))
    };

    if log(opt, elapsed, &mut rows)? {
        return Ok(RunRecord { rows, status: RunStatus::Diverged, final_iterate: opt.iterate().to_vec() });
    }
    let mut next_log = opt.oracle_calls() as f64 / n + opts.log_every;
    loop {
        let pass = opt.oracle_calls() as f64 / n;
        if pass >= opts.max_passes {
            break;
        }
        let start = Instant::now();
        let result = opt.step();
        elapsed += start.elapsed().as_secs_f64();
        match result {
            Ok(()) => {}
            Err(Error::Diverged(_)) => {
                let pass = opt.oracle_calls() as f64 / n;
                if rows.last().is_none_or(|r| pass > r.pass) {
                    rows.push(MetricsRow {
                        pass,
                        objective: f64::INFINITY,
                        suboptimality: f64::INFINITY,
                        wall_time_s: elapsed,
                    });
                }
                return Ok(RunRecord { rows, status: RunStatus::Diverged, final_iterate: opt.iterate().to_vec() });
            }
            Err(e) => return Err(e),
        }
        let pass = opt.oracle_calls() as f64 / n;
        if pass >= next_log || pass >= opts.max_passes {
            if log(opt, elapsed, &mut rows)? {
                return Ok(RunRecord { rows, status: RunStatus::Diverged, final_iterate: opt.iterate().to_vec() });
            }
            while next_log <= pass {
                next_log += opts.log_every;
            }
        }
    }
    Ok(RunRecord { rows, status: RunStatus::Completed, final_iterate: opt.iterate().to_vec() })
}
