//! Per-example loss oracles over a fixed design matrix.
//!
//! All three losses are generalized linear: `l_i(w) = h(x_i^T w, y_i)` (or
//! `h(W x_i, y_i)` with `W` stored `C x d` row-major), so the gradient is
//! `x_i` scaled by a scalar (an outer product with a `C`-vector for the
//! multinomial case). [`GlmLoss`] exposes that structure, which lets gradient
//! tables store `n` scalars instead of `n` vectors.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::data::{sigmoid, Dataset, Labels, Matrix};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq};

/// First-order (and optionally proximal) oracle for `n` losses in `R^p`.
pub trait LossOracle: Send + Sync {
    /// Number of examples `n`.
    fn len(&self) -> usize;

    /// Parameter dimension (`d`, or `C * d` for multinomial).
    fn dim(&self) -> usize;

    fn value(&self, i: usize, w: &[f64]) -> f64;

    /// Writes `grad l_i(w)` into `grad` and returns `l_i(w)`.
    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64;

    fn gradient(&self, i: usize, w: &[f64], grad: &mut [f64]) {
        self.value_grad(i, w, grad);
    }

    fn has_prox(&self) -> bool {
        false
    }

    /// Writes `prox_{step l_i}(w)` (or the documented approximation) into
    /// `out` and returns `value(i, out)`. GLM losses get the value from the
    /// inner products the prox already needs, so this is a single call.
    fn prox(&self, _i: usize, _w: &[f64], _step: f64, _out: &mut [f64]) -> Result<f64> {
        Err(Error::Unsupported("this loss has no proximal oracle".into()))
    }

    fn as_glm(&self) -> Option<&dyn GlmLoss> {
        None
    }
}

/// Generalized linear structure: `grad l_i(w) = s_i(w) (x) x_i` for a
/// `width`-vector `s_i(w)`.
pub trait GlmLoss: Send + Sync {
    /// Length of the scalar record: 1, or `C` for multinomial.
    fn width(&self) -> usize;

    fn row(&self, i: usize) -> &[f64];

    /// Writes `s_i(w)` into `scalar` and returns `l_i(w)`.
    fn value_scalar(&self, i: usize, w: &[f64], scalar: &mut [f64]) -> f64;

    /// `out += alpha * s (x) x_i`.
    fn expand_into(&self, i: usize, scalar: &[f64], alpha: f64, out: &mut [f64]) {
        let x = self.row(i);
        let d = x.len();
        for (c, &s) in scalar.iter().enumerate() {
            axpy(alpha * s, x, &mut out[c * d..(c + 1) * d]);
        }
    }

    fn glm_scalar(&self, i: usize, w: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.width()];
        self.value_scalar(i, w, &mut s);
        s
    }
}

fn check_len(dataset_len: usize, what: usize, name: &str) -> Result<()> {
    if dataset_len != what {
        return Err(Error::Size(format!("{name}: {what} labels for {dataset_len} rows")));
    }
    Ok(())
}

/// `l_i(w) = (y_i - w^T x_i)^2 / 2`.
#[derive(Debug, Clone)]
pub struct SquaredLoss {
    x: Matrix,
    y: Vec<f64>,
    norms: Vec<f64>,
}

impl SquaredLoss {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        check_len(x.rows(), y.len(), "squared loss")?;
        let norms = (0..x.rows()).map(|i| norm_sq(x.row(i))).collect();
        Ok(SquaredLoss { x, y, norms })
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        match dataset.labels() {
            Labels::Real(y) => Self::new(dataset.features().clone(), y.clone()),
            _ => Err(Error::Data("squared loss needs real-valued labels".into())),
        }
    }
}

impl LossOracle for SquaredLoss {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn value(&self, i: usize, w: &[f64]) -> f64 {
        let r = dot(self.x.row(i), w) - self.y[i];
        0.5 * r * r
    }

    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let x = self.x.row(i);
        let r = dot(x, w) - self.y[i];
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = r * xi;
        }
        0.5 * r * r
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        let x = self.x.row(i);
        let r = dot(x, w) - self.y[i];
        let scale = step * r / (1.0 + step * self.norms[i]);
        out.copy_from_slice(w);
        axpy(-scale, x, out);
        let r_out = r - scale * self.norms[i];
        Ok(0.5 * r_out * r_out)
    }

    fn as_glm(&self) -> Option<&dyn GlmLoss> {
        Some(self)
    }
}

impl GlmLoss for SquaredLoss {
    fn width(&self) -> usize {
        1
    }

    fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    fn value_scalar(&self, i: usize, w: &[f64], scalar: &mut [f64]) -> f64 {
        let r = dot(self.x.row(i), w) - self.y[i];
        scalar[0] = r;
        0.5 * r * r
    }
}

/// `ln(1 + e^z) = max(z, 0) + ln(1 + e^{-|z|})`.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary logistic loss `-y z + ln(1 + e^z)` with `z = w^T x`, `y in {0, 1}`.
#[derive(Debug, Clone)]
pub struct LogisticLoss {
    x: Matrix,
    y: Vec<f64>,
    norms: Vec<f64>,
}

impl LogisticLoss {
    pub fn new(x: Matrix, y: Vec<f64>) -> Result<Self> {
        check_len(x.rows(), y.len(), "logistic loss")?;
        if let Some(i) = y.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Data(format!("logistic label {} at row {i} is not 0 or 1", y[i])));
        }
        let norms = (0..x.rows()).map(|i| norm_sq(x.row(i))).collect();
        Ok(LogisticLoss { x, y, norms })
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        match dataset.labels() {
            Labels::Binary(y) => Self::new(dataset.features().clone(), y.clone()),
            _ => Err(Error::Data("logistic loss needs binary labels".into())),
        }
    }
}

impl LossOracle for LogisticLoss {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.x.cols()
    }

    fn value(&self, i: usize, w: &[f64]) -> f64 {
        let z = dot(self.x.row(i), w);
        softplus(z) - self.y[i] * z
    }

    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let x = self.x.row(i);
        let z = dot(x, w);
        let s = sigmoid(z) - self.y[i];
        for (g, xi) in grad.iter_mut().zip(x) {
            *g = s * xi;
        }
        softplus(z) - self.y[i] * z
    }

    fn has_prox(&self) -> bool {
        true
    }

    /// One Newton step on the prox subproblem; not the exact prox.
    fn prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        let x = self.x.row(i);
        let z = dot(x, w);
        let p = sigmoid(z);
        let g = p - self.y[i];
        let h = p * (1.0 - p);
        let scale = step * g / (1.0 + step * h * self.norms[i]);
        out.copy_from_slice(w);
        axpy(-scale, x, out);
        let z_out = z - scale * self.norms[i];
        Ok(softplus(z_out) - self.y[i] * z_out)
    }

    fn as_glm(&self) -> Option<&dyn GlmLoss> {
        Some(self)
    }
}

impl GlmLoss for LogisticLoss {
    fn width(&self) -> usize {
        1
    }

    fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    fn value_scalar(&self, i: usize, w: &[f64], scalar: &mut [f64]) -> f64 {
        let z = dot(self.x.row(i), w);
        scalar[0] = sigmoid(z) - self.y[i];
        softplus(z) - self.y[i] * z
    }
}

/// Multinomial logistic loss `-ln softmax(W x)_y`, `W` stored `C x d`
/// row-major.
#[derive(Debug, Clone)]
pub struct MultinomialLoss {
    x: Matrix,
    y: Vec<usize>,
    classes: usize,
    norms: Vec<f64>,
}

impl MultinomialLoss {
    pub fn new(x: Matrix, y: Vec<usize>, classes: usize) -> Result<Self> {
        check_len(x.rows(), y.len(), "multinomial loss")?;
        if classes < 2 {
            return Err(Error::Data(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(i) = y.iter().position(|&c| c >= classes) {
            return Err(Error::Data(format!("class {} at row {i} out of range", y[i])));
        }
        let norms = (0..x.rows()).map(|i| norm_sq(x.row(i))).collect();
        Ok(MultinomialLoss { x, y, classes, norms })
    }

    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        match dataset.labels() {
            Labels::Classes { labels, num_classes } => {
                Self::new(dataset.features().clone(), labels.clone(), *num_classes)
            }
            _ => Err(Error::Data("multinomial loss needs class labels".into())),
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Softmax probabilities into `p`; returns the loss.
    fn probabilities(&self, i: usize, w: &[f64], p: &mut [f64]) -> f64 {
        let x = self.x.row(i);
        let d = x.len();
        for (c, pc) in p.iter_mut().enumerate() {
            *pc = dot(&w[c * d..(c + 1) * d], x);
        }
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let zy = p[self.y[i]];
        let mut total = 0.0;
        for pc in p.iter_mut() {
            *pc = (*pc - max).exp();
            total += *pc;
        }
        for pc in p.iter_mut() {
            *pc /= total;
        }
        max + total.ln() - zy
    }
}

impl LossOracle for MultinomialLoss {
    fn len(&self) -> usize {
        self.y.len()
    }

    fn dim(&self) -> usize {
        self.classes * self.x.cols()
    }

    fn value(&self, i: usize, w: &[f64]) -> f64 {
        let mut p = vec![0.0; self.classes];
        self.probabilities(i, w, &mut p)
    }

    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let mut s = vec![0.0; self.classes];
        let value = self.value_scalar(i, w, &mut s);
        grad.fill(0.0);
        self.expand_into(i, &s, 1.0, grad);
        value
    }

    fn has_prox(&self) -> bool {
        true
    }

    /// One Newton step on the prox subproblem with a diagonal Hessian model.
    fn prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        let x = self.x.row(i);
        let d = x.len();
        let mut logits: Vec<f64> = (0..self.classes).map(|c| dot(&w[c * d..(c + 1) * d], x)).collect();
        let mut p = vec![0.0; self.classes];
        self.probabilities(i, w, &mut p);
        let xnorm = self.norms[i];
        let mut z1 = vec![0.0; self.classes];
        let mut z2 = vec![0.0; self.classes];
        for c in 0..self.classes {
            let z3 = 1.0 + step * xnorm * p[c];
            let y = if c == self.y[i] { 1.0 } else { 0.0 };
            z2[c] = p[c] / z3;
            z1[c] = -y / z3 + z2[c];
        }
        let lambda = z1.iter().sum::<f64>() / z2.iter().sum::<f64>();
        let z: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - lambda * b).collect();
        out.copy_from_slice(w);
        self.expand_into(i, &z, -step, out);
        for (l, zc) in logits.iter_mut().zip(&z) {
            *l -= step * xnorm * zc;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        Ok(max + total.ln() - logits[self.y[i]])
    }

    fn as_glm(&self) -> Option<&dyn GlmLoss> {
        Some(self)
    }
}

impl GlmLoss for MultinomialLoss {
    fn width(&self) -> usize {
        self.classes
    }

    fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    fn value_scalar(&self, i: usize, w: &[f64], scalar: &mut [f64]) -> f64 {
        let value = self.probabilities(i, w, scalar);
        scalar[self.y[i]] -= 1.0;
        value
    }
}

/// `r_i(w) = l_i(w) + (mu/2) |w|^2`.
#[derive(Clone)]
pub struct Regularized {
    base: Arc<dyn LossOracle>,
    mu: f64,
}

impl Regularized {
    pub fn new(base: Arc<dyn LossOracle>, mu: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::Parameter(format!("regularization must be nonnegative, got {mu}")));
        }
        Ok(Regularized { base, mu })
    }

    pub fn base(&self) -> &Arc<dyn LossOracle> {
        &self.base
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl LossOracle for Regularized {
    fn len(&self) -> usize {
        self.base.len()
    }

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, i: usize, w: &[f64]) -> f64 {
        self.base.value(i, w) + 0.5 * self.mu * norm_sq(w)
    }

    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.base.value_grad(i, w, grad);
        axpy(self.mu, w, grad);
        v + 0.5 * self.mu * norm_sq(w)
    }

    fn has_prox(&self) -> bool {
        self.base.has_prox()
    }

    /// `prox_{step r}(w) = prox_{step l / (1 + step mu)}(w / (1 + step mu))`.
    fn prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        if self.mu == 0.0 {
            return self.base.prox(i, w, step, out);
        }
        let shrink = 1.0 + step * self.mu;
        let scaled: Vec<f64> = w.iter().map(|x| x / shrink).collect();
        let base = self.base.prox(i, &scaled, step / shrink, out)?;
        Ok(base + 0.5 * self.mu * norm_sq(out))
    }
}

/// Wraps an oracle and counts every value, gradient and prox evaluation.
pub struct Counted {
    inner: Arc<dyn LossOracle>,
    calls: AtomicU64,
}

impl Counted {
    pub fn new(inner: Arc<dyn LossOracle>) -> Self {
        Counted { inner, calls: AtomicU64::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    fn tick(&self) {
        self.calls.fetch_add(1, Ordering::Relaxed);
    }
}

impl LossOracle for Counted {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, i: usize, w: &[f64]) -> f64 {
        self.tick();
        self.inner.value(i, w)
    }

    fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
        self.tick();
        self.inner.value_grad(i, w, grad)
    }

    fn has_prox(&self) -> bool {
        self.inner.has_prox()
    }

    fn prox(&self, i: usize, w: &[f64], step: f64, out: &mut [f64]) -> Result<f64> {
        self.tick();
        self.inner.prox(i, w, step, out)
    }

    // The GLM view bypasses counting, so it is not forwarded.
}

/// The loss matching the dataset's task: squared, logistic or multinomial.
pub fn oracle_for(dataset: &Dataset) -> Result<Arc<dyn LossOracle>> {
    Ok(match dataset.labels() {
        Labels::Real(_) => Arc::new(SquaredLoss::from_dataset(dataset)?),
        Labels::Binary(_) => Arc::new(LogisticLoss::from_dataset(dataset)?),
        Labels::Classes { .. } => Arc::new(MultinomialLoss::from_dataset(dataset)?),
    })
}
