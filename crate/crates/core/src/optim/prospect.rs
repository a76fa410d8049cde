use rand_chacha::ChaCha8Rng;

use super::{check_finite, check_step_size, run_rng, uniform_index, GradTable, Objective, Optimizer};
use crate::dual::{SortedLossTable, WeightSolver};
use crate::error::Result;
use crate::linalg::axpy;

/// Which index refreshes the loss table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IndexCoupling {
    /// The gradient index also refreshes the loss table: one call per step.
    #[default]
    Shared,
    /// An independent uniform index refreshes the loss table: two calls.
    Decoupled,
}

/// Prospect: SAGA-style control variates on the weighted gradient plus a
/// loss table that tracks `l(w)` so the weights `q = q*(l)` stay unbiased
/// in the limit.
///
/// Table entries are taken at the pre-step iterate `w_t`, so the loss and
/// gradient of the sampled example come from the same oracle call.
pub struct Prospect {
    obj: Objective,
    eta: f64,
    coupling: IndexCoupling,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    losses: SortedLossTable,
    solver: WeightSolver,
    q: Vec<f64>,
    rho: Vec<f64>,
    grads: GradTable,
    gbar: Vec<f64>,
    direction: Vec<f64>,
    record: Vec<f64>,
    calls: u64,
}

impl Prospect {
    /// Fills the tables at `w0` (`n` calls).
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, coupling: IndexCoupling, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        obj.require_shift("Prospect")?;
        let n = obj.len();
        let mut grads = GradTable::new(obj, true);
        let mut record = vec![0.0; grads.width()];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            losses.push(check_finite("initial loss", grads.evaluate(obj, i, w0, &mut record))?);
            grads.store(i, &record);
        }
        let losses = SortedLossTable::new(losses)?;
        let mut solver = obj.solver()?;
        let mut q = vec![0.0; n];
        solver.solve_into(&losses, &mut q)?;
        let rho = q.clone();
        let gbar = grads.weighted_sum(obj, &rho);
        Ok(Prospect {
            obj: obj.clone(),
            eta,
            coupling,
            rng: run_rng(seed),
            w: w0.to_vec(),
            losses,
            solver,
            q,
            rho,
            grads,
            gbar,
            direction: vec![0.0; obj.dim()],
            record,
            calls: n as u64,
        })
    }

    pub fn loss_table(&self) -> &SortedLossTable {
        &self.losses
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    pub fn lagged_weights(&self) -> &[f64] {
        &self.rho
    }

    /// The maintained aggregate `sum_i rho_i g_i`.
    pub fn aggregate(&self) -> &[f64] {
        &self.gbar
    }

    /// `sum_i rho_i g_i` recomputed from the tables.
    pub fn recomputed_aggregate(&self) -> Vec<f64> {
        self.grads.weighted_sum(&self.obj, &self.rho)
    }

    pub fn uses_compact_table(&self) -> bool {
        self.grads.is_compact()
    }

    /// The update direction `v` applied by the last step.
    pub fn last_direction(&self) -> &[f64] {
        &self.direction
    }

    /// Moves the iterate without touching the tables, leaving them stale.
    /// Diagnostic only.
    pub fn set_iterate(&mut self, w: &[f64]) {
        self.w.copy_from_slice(w);
    }

    /// The direction a step sampling `i` would take from the current state.
    /// Diagnostic only: not counted as an oracle call.
    pub fn direction_for(&self, i: usize) -> Vec<f64> {
        let mut record = vec![0.0; self.grads.width()];
        self.grads.evaluate(&self.obj, i, &self.w, &mut record);
        let mut v = vec![0.0; self.obj.dim()];
        self.fill_direction(i, &record, &mut v);
        v
    }

    /// `v = gbar + n q_i g(w) - n rho_i g_i`.
    fn fill_direction(&self, i: usize, record: &[f64], v: &mut [f64]) {
        let n = self.obj.len() as f64;
        v.copy_from_slice(&self.gbar);
        self.grads.expand(&self.obj, i, record, n * self.q[i], v);
        self.grads.expand_stored(&self.obj, i, -n * self.rho[i], v);
    }
}

impl Optimizer for Prospect {
    fn name(&self) -> &'static str {
        "prospect"
    }

    fn step(&mut self) -> Result<()> {
        let n = self.obj.len();
        let i = uniform_index(&mut self.rng, n);
        let mut record = std::mem::take(&mut self.record);
        let loss_i = check_finite("loss", self.grads.evaluate(&self.obj, i, &self.w, &mut record))?;
        self.calls += 1;

        let w_prev = match self.coupling {
            IndexCoupling::Shared => None,
            IndexCoupling::Decoupled => Some(self.w.clone()),
        };
        let mut direction = std::mem::take(&mut self.direction);
        self.fill_direction(i, &record, &mut direction);
        axpy(-self.eta, &direction, &mut self.w);
        self.direction = direction;

        // Bias reducer: losses at the pre-step iterate.
        match w_prev {
            None => {
                self.losses.update(i, loss_i)?;
            }
            Some(w_prev) => {
                let j = uniform_index(&mut self.rng, n);
                let loss_j = check_finite("loss", self.obj.loss().value(j, &w_prev))?;
                self.calls += 1;
                self.losses.update(j, loss_j)?;
            }
        }
        self.solver.solve_into(&self.losses, &mut self.q)?;

        // Variance reducer.
        let rho_i = self.rho[i];
        let q_i = self.q[i];
        self.grads.expand_stored(&self.obj, i, -rho_i, &mut self.gbar);
        self.grads.expand(&self.obj, i, &record, q_i, &mut self.gbar);
        self.grads.store(i, &record);
        self.rho[i] = q_i;
        self.record = record;
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }
}
