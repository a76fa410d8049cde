use rand_chacha::ChaCha8Rng;

use super::{check_finite, check_step_size, run_rng, uniform_index, GradTable, Objective, Optimizer};
use crate::dual::{most_adverse_weights, penalized_euclidean_projection, Divergence, SortedLossTable};
use crate::error::{Error, Result};
use crate::linalg::axpy;

/// Dual learning-rate rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualRate {
    /// `delta = eta`.
    Equal,
    /// A fixed dual rate independent of `eta`.
    Fixed(f64),
    /// `delta = eta / (10 n)`.
    Heuristic,
}

impl DualRate {
    pub fn from_tag(tag: &str, fixed: Option<f64>) -> Result<Self> {
        match (tag, fixed) {
            ("equal", _) => Ok(DualRate::Equal),
            ("heuristic", _) => Ok(DualRate::Heuristic),
            ("fixed", Some(delta)) => Ok(DualRate::Fixed(delta)),
            ("fixed", None) => Err(Error::Parameter("the fixed dual rule needs a dual rate".into())),
            (other, _) => Err(Error::Parameter(format!(
                "unknown dual rate rule `{other}` (expected equal, fixed or heuristic)"
            ))),
        }
    }

    pub fn delta(&self, eta: f64, n: usize) -> f64 {
        match *self {
            DualRate::Equal => eta,
            DualRate::Fixed(delta) => delta,
            DualRate::Heuristic => eta / (10.0 * n as f64),
        }
    }
}

/// Stochastic primal-dual method with SAGA tables on both sides.
///
/// Primal: `v = n q_i grad l_i(w) - n rho_i g_i + gbar`, then the ridge prox
/// `w <- (w - eta v) / (1 + eta mu)`. Dual: the unbiased loss estimate
/// `pi = l + n (l_i(w) - l_i) e_i` drives an ascent step
/// `q <- argmin_{P(sigma)} (delta nubar / 2)|q - 1/n|^2 + |q - (q + delta pi)|^2 / 2`
/// with `nubar = 2 n nu`. The projection is Euclidean, so only the
/// chi-square penalty is supported.
pub struct SaddleSaga {
    obj: Objective,
    eta: f64,
    delta: f64,
    rng: ChaCha8Rng,
    w: Vec<f64>,
    losses: Vec<f64>,
    q: Vec<f64>,
    rho: Vec<f64>,
    grads: GradTable,
    gbar: Vec<f64>,
    record: Vec<f64>,
    calls: u64,
}

impl SaddleSaga {
    /// Tables at `w0`, with `q = rho = q*(l(w0))` (`n` calls).
    pub fn new(obj: &Objective, w0: &[f64], eta: f64, rule: DualRate, seed: u64) -> Result<Self> {
        check_step_size(eta)?;
        obj.require_shift("SaddleSAGA")?;
        if obj.divergence() != Divergence::ChiSquare {
            return Err(Error::Unsupported("SaddleSAGA supports the chi-square penalty only".into()));
        }
        let delta = rule.delta(eta, obj.len());
        check_step_size(delta)?;
        let n = obj.len();
        let mut grads = GradTable::new(obj, false);
        let mut record = vec![0.0; grads.width()];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            losses.push(check_finite("initial loss", grads.evaluate(obj, i, w0, &mut record))?);
            grads.store(i, &record);
        }
        let table = SortedLossTable::new(losses.clone())?;
        let q = most_adverse_weights(&table, obj.spectrum(), obj.nu(), obj.divergence())?.into_vec();
        let rho = q.clone();
        let gbar = grads.weighted_sum(obj, &rho);
        Ok(SaddleSaga {
            obj: obj.clone(),
            eta,
            delta,
            rng: run_rng(seed),
            w: w0.to_vec(),
            losses,
            q,
            rho,
            grads,
            gbar,
            record,
            calls: n as u64,
        })
    }

    pub fn dual(&self) -> &[f64] {
        &self.q
    }

    pub fn dual_rate(&self) -> f64 {
        self.delta
    }

    /// Sets the dual iterate, keeping the tables; for fixed-point checks.
    pub fn set_dual(&mut self, q: &[f64]) {
        self.q.copy_from_slice(q);
        self.rho.copy_from_slice(q);
        self.gbar = self.grads.weighted_sum(&self.obj, &self.rho);
    }

    /// `pi` for a sampled `i` with fresh loss `loss_i`.
    pub fn loss_estimate(&self, i: usize, loss_i: f64) -> Vec<f64> {
        let mut pi = self.losses.clone();
        pi[i] += self.obj.len() as f64 * (loss_i - self.losses[i]);
        pi
    }
}

impl Optimizer for SaddleSaga {
    fn name(&self) -> &'static str {
        "saddlesaga"
    }

    fn step(&mut self) -> Result<()> {
        let n = self.obj.len();
        let nf = n as f64;
        let i = uniform_index(&mut self.rng, n);
        let mut record = std::mem::take(&mut self.record);
        let loss_i = check_finite("loss", self.grads.evaluate(&self.obj, i, &self.w, &mut record))?;
        self.calls += 1;

        let mut v = self.gbar.clone();
        self.grads.expand(&self.obj, i, &record, nf * self.q[i], &mut v);
        self.grads.expand_stored(&self.obj, i, -nf * self.rho[i], &mut v);
        let shrink = 1.0 / (1.0 + self.eta * self.obj.mu());
        axpy(-self.eta, &v, &mut self.w);
        self.w.iter_mut().for_each(|x| *x *= shrink);

        let pi = self.loss_estimate(i, loss_i);
        let ascent: Vec<f64> = self.q.iter().zip(&pi).map(|(q, p)| q + self.delta * p).collect();
        let nubar = 2.0 * nf * self.obj.nu();
        let q_old_i = self.q[i];
        let q_next = penalized_euclidean_projection(&ascent, self.obj.spectrum(), self.delta * nubar)?;

        self.grads.expand_stored(&self.obj, i, -self.rho[i], &mut self.gbar);
        self.grads.expand(&self.obj, i, &record, q_old_i, &mut self.gbar);
        self.grads.store(i, &record);
        self.rho[i] = q_old_i;
        self.losses[i] = loss_i;
        self.q = q_next.into_vec();
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
