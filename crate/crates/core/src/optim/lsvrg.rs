use rand_chacha::ChaCha8Rng;

use super::{check_finite, check_step_size, run_rng, uniform_index, GradTable, Objective, Optimizer};
use crate::dual::{SortedLossTable, WeightSolver};
use crate::error::{Error, Result};
use crate::linalg::axpy;

/// SVRG with a checkpoint `wbar` whose weights `qbar = q*(l(wbar))` stay
/// frozen for the epoch:
///
/// ```text
/// v = n qbar_i (grad l_i(w) - grad l_i(wbar)) + sum_j qbar_j grad l_j(wbar) + mu w
/// ```
///
/// The checkpoint is refreshed every `epoch` steps at a cost of `n` calls.
pub struct Lsvrg {
    obj: Objective,
    eta: f64,
    epoch: usize,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    solver: WeightSolver,
    qbar: Vec<f64>,
    grads: GradTable,
    full: Vec<f64>,
    record: Vec<f64>,
    direction: Vec<f64>,
    since_refresh: usize,
    calls: u64,
}

impl Lsvrg {
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, epoch: usize, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        obj.require_shift("LSVRG")?;
        if epoch == 0 {
            return Err(Error::Parameter("epoch length must be positive".into()));
        }
        let grads = GradTable::new(obj, false);
        let mut lsvrg = Lsvrg {
            obj: obj.clone(),
            eta,
            epoch,
            rng: run_rng(seed),
            w: w0.to_vec(),
            solver: obj.solver()?,
            qbar: vec![0.0; obj.len()],
            record: vec![0.0; grads.width()],
            grads,
            full: vec![0.0; obj.dim()],
            direction: vec![0.0; obj.dim()],
            since_refresh: 0,
            calls: 0,
        };
        lsvrg.refresh()?;
        Ok(lsvrg)
    }

    fn refresh(&mut self) -> Result<()> {
        let n = self.obj.len();
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            losses.push(check_finite("loss", self.grads.evaluate(&self.obj, i, &self.w, &mut self.record))?);
            self.grads.store(i, &self.record);
        }
        self.calls += n as u64;
        let table = SortedLossTable::new(losses)?;
        self.solver.solve_into(&table, &mut self.qbar)?;
        self.full = self.grads.weighted_sum(&self.obj, &self.qbar);
        self.since_refresh = 0;
        Ok(())
    }

    /// The direction for index `i` at the current iterate; diagnostic only.
    pub fn direction_for(&self, i: usize) -> Vec<f64> {
        let mut record = vec![0.0; self.grads.width()];
        self.grads.evaluate(&self.obj, i, &self.w, &mut record);
        let mut v = vec![0.0; self.obj.dim()];
        self.fill_direction(i, &record, &mut v);
        v
    }

    pub fn checkpoint_weights(&self) -> &[f64] {
        &self.qbar
    }

    fn fill_direction(&self, i: usize, record: &[f64], v: &mut [f64]) {
        let scale = self.obj.len() as f64 * self.qbar[i];
        v.copy_from_slice(&self.full);
        axpy(self.obj.mu(), &self.w, v);
        if scale != 0.0 {
            self.grads.expand(&self.obj, i, record, scale, v);
            self.grads.expand_stored(&self.obj, i, -scale, v);
        }
    }
}

impl Optimizer for Lsvrg {
    fn name(&self) -> &'static str {
        "lsvrg"
    }

    fn step(&mut self) -> Result<()> {
        let i = uniform_index(&mut self.rng, self.obj.len());
        let mut record = std::mem::take(&mut self.record);
        check_finite("loss", self.grads.evaluate(&self.obj, i, &self.w, &mut record))?;
        self.calls += 1;
        let mut direction = std::mem::take(&mut self.direction);
        self.fill_direction(i, &record, &mut direction);
        axpy(-self.eta, &direction, &mut self.w);
        self.direction = direction;
        self.record = record;
        self.since_refresh += 1;
        if self.since_refresh == self.epoch {
            self.refresh()?;
        }
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }
}
