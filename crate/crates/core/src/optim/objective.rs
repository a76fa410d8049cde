use std::sync::Arc;

use crate::dual::{
    most_adverse_weights, risk_value, AdversarialWeights, Divergence, SortedLossTable, WeightSolver,
};
use crate::error::{Error, Result};
use crate::linalg::{axpy, norm_sq};
use crate::losses::LossOracle;
use crate::spectrum::Spectrum;

/// `F(w) = max_{q in P(sigma)} q . l(w) - nu D_f(q || 1/n) + (mu/2) |w|^2`.
///
/// Holds the unregularized losses; the ridge term is added here so that
/// loss tables and GLM records stay free of the iterate.
#[derive(Clone)]
pub struct Objective {
    loss: Arc<dyn LossOracle>,
    spectrum: Spectrum,
    nu: f64,
    mu: f64,
    divergence: Divergence,
}

impl std::fmt::Debug for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Objective")
            .field("n", &self.len())
            .field("dim", &self.dim())
            .field("spectrum", &self.spectrum.family())
            .field("nu", &self.nu)
            .field("mu", &self.mu)
            .field("divergence", &self.divergence)
            .finish()
    }
}

impl Objective {
    pub fn new(
        loss: Arc<dyn LossOracle>,
        spectrum: Spectrum,
        nu: f64,
        mu: f64,
        divergence: Divergence,
    ) -> Result<Self> {
        if loss.len() != spectrum.len() {
            return Err(Error::Size(format!(
                "{} losses but spectrum of length {}",
                loss.len(),
                spectrum.len()
            )));
        }
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(Error::Parameter(format!("shift cost must be nonnegative, got {nu}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("regularization must be nonnegative, got {mu}")));
        }
        Ok(Objective { loss, spectrum, nu, mu, divergence })
    }

    pub fn loss(&self) -> &Arc<dyn LossOracle> {
        &self.loss
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn divergence(&self) -> Divergence {
        self.divergence
    }

    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.loss.dim()
    }

    /// The same objective at a different shift cost.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Objective::new(self.loss.clone(), self.spectrum.clone(), nu, self.mu, self.divergence)
    }

    pub(crate) fn require_shift(&self, what: &str) -> Result<()> {
        if self.nu > 0.0 {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{what} needs a positive shift cost")))
        }
    }

    pub fn solver(&self) -> Result<WeightSolver> {
        WeightSolver::new(self.spectrum.clone(), self.nu, self.divergence)
    }

    pub fn losses(&self, w: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.loss.value(i, w)).collect()
    }

    /// `F(w)`; `n` oracle calls.
    pub fn full_objective(&self, w: &[f64]) -> Result<f64> {
        let table = SortedLossTable::new(self.losses(w))?;
        let risk = risk_value(&table, &self.spectrum, self.nu, self.divergence)?;
        Ok(risk + 0.5 * self.mu * norm_sq(w))
    }

    /// The maximizing weights at `l(w)`.
    pub fn weights_at(&self, w: &[f64]) -> Result<AdversarialWeights> {
        self.require_shift("the weight map")?;
        let table = SortedLossTable::new(self.losses(w))?;
        most_adverse_weights(&table, &self.spectrum, self.nu, self.divergence)
    }

    /// `(F(w), grad F(w))` with `grad F(w) = sum_i q_i grad l_i(w) + mu w`.
    pub fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.require_shift("the gradient")?;
        let (n, p) = (self.len(), self.dim());
        let mut grads = vec![0.0; n * p];
        let mut losses = Vec::with_capacity(n);
        for i in 0..n {
            losses.push(self.loss.value_grad(i, w, &mut grads[i * p..(i + 1) * p]));
        }
        let table = SortedLossTable::new(losses)?;
        let q = most_adverse_weights(&table, &self.spectrum, self.nu, self.divergence)?;
        let value = crate::dual::primal_value(table.values(), q.as_slice(), self.nu, self.divergence)
            + 0.5 * self.mu * norm_sq(w);
        let mut grad: Vec<f64> = w.iter().map(|x| self.mu * x).collect();
        for (i, &qi) in q.as_slice().iter().enumerate() {
            if qi != 0.0 {
                axpy(qi, &grads[i * p..(i + 1) * p], &mut grad);
            }
        }
        Ok((value, grad))
    }

    /// `grad F(w)`; requires `nu > 0` (the objective is nonsmooth otherwise).
    pub fn full_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(w)?.1)
    }

    /// `l_i(w)` and `grad r_i(w) = grad l_i(w) + mu w` into `grad`; one call.
    pub fn sample_value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let value = self.loss.value_grad(i, w, grad);
        if self.mu != 0.0 {
            axpy(self.mu, w, grad);
        }
        value
    }

    /// `prox_{step r_i}(w)` on the regularized loss into `out`, returning the
    /// unregularized `l_i(out)`; one call.
    pub fn sample_prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        if self.mu == 0.0 {
            return self.loss.prox(i, w, step, out);
        }
        let shrink = 1.0 + step * self.mu;
        let scaled: Vec<f64> = w.iter().map(|x| x / shrink).collect();
        self.loss.prox(i, &scaled, step / shrink, out)
    }
}
