//! Plug-in minibatch baselines: the spectral risk of a minibatch as an
//! estimate of the full objective. Biased for non-uniform spectra.

use rand_chacha::ChaCha8Rng;

use super::{check_finite, check_step_size, run_rng, uniform_index, Objective, Optimizer};
use crate::dual::{sorted_spectrum_weights, SortedLossTable, WeightSolver};
use crate::error::{Error, Result};
use crate::linalg::axpy;

/// Draws minibatches without replacement and forms the weighted gradient
/// `sum_{i in B} q_i grad l_i(w)` of the `m`-point problem.
struct BatchEstimator {
    obj: Objective,
    batch: usize,
    order: Vec<usize>,
    solver: Option<WeightSolver>,
    spectrum: crate::spectrum::Spectrum,
    grads: Vec<f64>,
    losses: Vec<f64>,
    q: Vec<f64>,
}

impl BatchEstimator {
    fn new(obj: &Objective, batch: usize) -> Result<Self> {
        let n = obj.len();
        if batch == 0 || batch > n {
            return Err(Error::Parameter(format!("batch size must lie in 1..={n}, got {batch}")));
        }
        let spectrum = if batch == n { obj.spectrum().clone() } else { obj.spectrum().with_len(batch)? };
        let solver = if obj.nu() > 0.0 {
            Some(WeightSolver::new(spectrum.clone(), obj.nu(), obj.divergence())?)
        } else {
            None
        };
        Ok(BatchEstimator {
            obj: obj.clone(),
            batch,
            order: (0..n).collect(),
            solver,
            spectrum,
            grads: vec![0.0; batch * obj.dim()],
            losses: vec![0.0; batch],
            q: vec![0.0; batch],
        })
    }

    /// Writes the batch risk gradient (no ridge term) into `out`; `m` calls.
    fn estimate(&mut self, rng: &mut ChaCha8Rng, w: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.order.len();
        let p = self.obj.dim();
        // Partial Fisher-Yates: one draw per sampled index.
        for k in 0..self.batch {
            let j = k + uniform_index(rng, n - k);
            self.order.swap(k, j);
        }
        for k in 0..self.batch {
            let i = self.order[k];
            self.losses[k] =
                check_finite("loss", self.obj.loss().value_grad(i, w, &mut self.grads[k * p..(k + 1) * p]))?;
        }
        let table = SortedLossTable::new(self.losses.clone())?;
        match &mut self.solver {
            Some(solver) => solver.solve_into(&table, &mut self.q)?,
            None => self.q.copy_from_slice(sorted_spectrum_weights(&table, &self.spectrum).as_slice()),
        }
        out.fill(0.0);
        for k in 0..self.batch {
            if self.q[k] != 0.0 {
                axpy(self.q[k], &self.grads[k * p..(k + 1) * p], out);
            }
        }
        Ok(())
    }
}

/// Minibatch SGD on the plug-in estimate, `w <- w - eta (g_B + mu w)`.
pub struct MinibatchSgd {
    estimator: BatchEstimator,
    eta: f64,
    mu: f64,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    direction: Vec<f64>,
    calls: u64,
}

impl MinibatchSgd {
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, batch: usize, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        Ok(MinibatchSgd {
            estimator: BatchEstimator::new(obj, batch)?,
            eta,
            mu: obj.mu(),
            rng: run_rng(seed),
            w: w0.to_vec(),
            direction: vec![0.0; obj.dim()],
            calls: 0,
        })
    }
}

impl Optimizer for MinibatchSgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self) -> Result<()> {
        self.estimator.estimate(&mut self.rng, &self.w, &mut self.direction)?;
        self.calls += self.estimator.batch as u64;
        axpy(self.mu, &self.w, &mut self.direction);
        axpy(-self.eta, &self.direction, &mut self.w);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }
}

/// Regularized dual averaging: `w_{t+1} = -gbar_t / (mu + 1/(eta t))` with
/// `gbar_t` the running mean of minibatch risk gradients.
pub struct Srda {
    estimator: BatchEstimator,
    eta: f64,
    mu: f64,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    mean: Vec<f64>,
    scratch: Vec<f64>,
    t: u64,
    calls: u64,
}

impl Srda {
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, batch: usize, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        if obj.mu() <= 0.0 {
            return Err(Error::Unsupported("dual averaging needs positive regularization".into()));
        }
        Ok(Srda {
            estimator: BatchEstimator::new(obj, batch)?,
            eta,
            mu: obj.mu(),
            rng: run_rng(seed),
            w: w0.to_vec(),
            mean: vec![0.0; obj.dim()],
            scratch: vec![0.0; obj.dim()],
            t: 0,
            calls: 0,
        })
    }

    /// Closed-form update from a given averaged gradient at step count `t`.
    pub fn closed_form(mean: &[f64], mu: f64, eta: f64, t: u64) -> Vec<f64> {
        let denom = mu + 1.0 / (eta * t as f64);
        mean.iter().map(|g| -g / denom).collect()
    }
}

impl Optimizer for Srda {
    fn name(&self) -> &'static str {
        "srda"
    }

    fn step(&mut self) -> Result<()> {
        self.estimator.estimate(&mut self.rng, &self.w, &mut self.scratch)?;
        self.calls += self.estimator.batch as u64;
        self.t += 1;
        let inv_t = 1.0 / self.t as f64;
        for (m, g) in self.mean.iter_mut().zip(&self.scratch) {
            *m += (g - *m) * inv_t;
        }
        self.w = Self::closed_form(&self.mean, self.mu, self.eta, self.t);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }
}
