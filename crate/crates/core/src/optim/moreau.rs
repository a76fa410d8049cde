use rand_chacha::ChaCha8Rng;

use super::{
    check_finite, check_step_size, run_rng, uniform_index, unit_uniform, weighted_index, GradTable, IndexCoupling,
    Objective, Optimizer,
};
use crate::dual::{SortedLossTable, WeightSolver};
use crate::error::{Error, Result};

/// Prospect on the Moreau envelopes of the regularized losses.
///
/// The sampled index follows `q`, and the step is a prox at the
/// control-variate point `u = w + eta (g_i - gbar)`. The gradient table
/// holds envelope gradients `(u - prox(u)) / eta`; in shared mode the sampled
/// prox provides the new record for index `i` at no extra cost. The prox
/// oracle also reports `l_i` at its output, which is the next iterate, so the
/// loss table entry `i` is refreshed with `l_i(w_next)` for free.
///
/// Sampling alone refreshes entry `i` at rate `q_i`, and never when
/// `q_i = 0`, which can freeze a stale low loss out of the weights, and a
/// stale record for a rarely drawn index kicks the iterate when it finally is
/// drawn. A top-up draws a uniform `k` after each step and, with probability
/// `max(0, 1 - n q_k)`, refreshes its loss and its record with the plain
/// gradient at the new iterate (the envelope gradient's value at the fixed
/// point), so every entry is refreshed at rate at least `1/n`. The top-up costs `sum_k max(0, 1/n - q_k)` calls per step in
/// expectation, the total variation distance from `q` to uniform.
pub struct ProspectMoreau {
    obj: Objective,
    eta: f64,
    coupling: IndexCoupling,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    losses: SortedLossTable,
    solver: WeightSolver,
    q: Vec<f64>,
    prefix: Vec<f64>,
    grads: GradTable,
    gbar: Vec<f64>,
    calls: u64,
}

impl ProspectMoreau {
    /// Fills the tables at `w0` with plain gradients (`n` calls).
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, coupling: IndexCoupling, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        obj.require_shift("Prospect-Moreau")?;
        let n = obj.len();
        let p = obj.dim();
        if !obj.loss().has_prox() {
            return Err(Error::Unsupported("Prospect-Moreau needs a loss with a proximal oracle".into()));
        }
        // Envelope gradients are not GLM-structured: store them densely.
        let mut grads = GradTable::new_dense(obj);
        let mut record = vec![0.0; p];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            losses.push(check_finite("initial loss", obj.sample_value_grad(i, w0, &mut record))?);
            grads.store(i, &record);
        }
        let losses = SortedLossTable::new(losses)?;
        let mut solver = obj.solver()?;
        let mut q = vec![0.0; n];
        solver.solve_into(&losses, &mut q)?;
        let gbar = grads.weighted_sum(obj, &q);
        Ok(ProspectMoreau {
            obj: obj.clone(),
            eta,
            coupling,
            rng: run_rng(seed),
            w: w0.to_vec(),
            losses,
            solver,
            q,
            prefix: vec![0.0; n],
            grads,
            gbar,
            calls: n as u64,
        })
    }

    pub fn loss_table(&self) -> &SortedLossTable {
        &self.losses
    }

    pub fn weights(&self) -> &[f64] {
        &self.q
    }

    fn control_point(&self, i: usize) -> Vec<f64> {
        let g = self.grads.record(i);
        self.w
            .iter()
            .zip(g)
            .zip(&self.gbar)
            .map(|((w, gi), gb)| w + self.eta * (gi - gb))
            .collect()
    }

    fn sample(&mut self) -> usize {
        let mut acc = 0.0;
        for (c, q) in self.prefix.iter_mut().zip(&self.q) {
            acc += q.max(0.0);
            *c = acc;
        }
        weighted_index(&mut self.rng, &self.prefix)
    }
}

impl Optimizer for ProspectMoreau {
    fn name(&self) -> &'static str {
        "prospect_moreau"
    }

    fn step(&mut self) -> Result<()> {
        let n = self.obj.len();
        let p = self.obj.dim();
        let i = self.sample();
        let u = self.control_point(i);
        let mut w_next = vec![0.0; p];
        let loss_i = self.obj.sample_prox(i, &u, self.eta, &mut w_next)?;
        self.calls += 1;
        if let Some(x) = w_next.iter().find(|x| !x.is_finite()) {
            return Err(Error::Diverged(format!("iterate entry became {x}")));
        }

        let mut record = vec![0.0; p];
        match self.coupling {
            IndexCoupling::Shared => {
                for ((r, a), b) in record.iter_mut().zip(&u).zip(&w_next) {
                    *r = (a - b) / self.eta;
                }
                self.grads.store(i, &record);
            }
            IndexCoupling::Decoupled => {
                let j = self.sample();
                let uj = self.control_point(j);
                let mut pj = vec![0.0; p];
                self.obj.sample_prox(j, &uj, self.eta, &mut pj)?;
                self.calls += 1;
                for ((r, a), b) in record.iter_mut().zip(&uj).zip(&pj) {
                    *r = (a - b) / self.eta;
                }
                self.grads.store(j, &record);
            }
        }

        self.losses.update(i, check_finite("loss", loss_i)?)?;
        let k = uniform_index(&mut self.rng, n);
        if unit_uniform(&mut self.rng) < 1.0 - n as f64 * self.q[k] {
            let loss_k = check_finite("loss", self.obj.sample_value_grad(k, &w_next, &mut record))?;
            self.calls += 1;
            self.losses.update(k, loss_k)?;
            self.grads.store(k, &record);
        }
        self.solver.solve_into(&self.losses, &mut self.q)?;

        self.w = w_next;
        self.gbar = self.grads.weighted_sum(&self.obj, &self.q);
        Ok(())
    }

    fn iterate(&self) -> &[f64] {
        &self.w
    }

    fn oracle_calls(&self) -> u64 {
        self.calls
    }
}
