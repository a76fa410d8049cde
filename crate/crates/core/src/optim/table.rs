use super::Objective;
use crate::linalg::axpy;

/// Gradient table: one record per example, each representing a stored
/// gradient vector.
///
/// Records of unregularized GLM gradients are the `width` scalars `s_i` with
/// `grad l_i = s_i (x) x_i`. Regularized records (`grad l_i(z) + mu z` for an
/// iterate snapshot `z`) and non-GLM losses are stored densely. Storing the
/// snapshot next to the scalar would cost the same `d` floats as the dense
/// vector, so dense it is.
#[derive(Debug, Clone)]
pub struct GradTable {
    compact: bool,
    regularized: bool,
    width: usize,
    data: Vec<f64>,
}

impl GradTable {
    /// A zeroed table for `obj`; `regularized` selects `grad r_i` records.
    pub fn new(obj: &Objective, regularized: bool) -> Self {
        let regularized = regularized && obj.mu() != 0.0;
        let glm = obj.loss().as_glm();
        let compact = !regularized && glm.is_some();
        let width = match glm {
            Some(g) if compact => g.width(),
            _ => obj.dim(),
        };
        GradTable { compact, regularized, width, data: vec![0.0; width * obj.len()] }
    }

    /// A zeroed dense table of regularized records.
    pub fn new_dense(obj: &Objective) -> Self {
        GradTable { compact: false, regularized: true, width: obj.dim(), data: vec![0.0; obj.dim() * obj.len()] }
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }

    /// Floats per record.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Evaluates `l_i(w)` and writes the record of the gradient at `w` into
    /// `record`. One oracle call.
    pub fn evaluate(&self, obj: &Objective, i: usize, w: &[f64], record: &mut [f64]) -> f64 {
        if self.compact {
            obj.loss().as_glm().expect("compact table needs a GLM loss").value_scalar(i, w, record)
        } else if self.regularized {
            obj.sample_value_grad(i, w, record)
        } else {
            obj.loss().value_grad(i, w, record)
        }
    }

    /// `out += alpha * gradient(record)`.
    #[inline]
    pub fn expand(&self, obj: &Objective, i: usize, record: &[f64], alpha: f64, out: &mut [f64]) {
        if self.compact {
            obj.loss().as_glm().expect("compact table needs a GLM loss").expand_into(i, record, alpha, out);
        } else {
            axpy(alpha, record, out);
        }
    }

    #[inline]
    pub fn record(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    pub fn store(&mut self, i: usize, record: &[f64]) {
        self.data[i * self.width..(i + 1) * self.width].copy_from_slice(record);
    }

    /// `out += alpha * gradient(stored record i)`.
    #[inline]
    pub fn expand_stored(&self, obj: &Objective, i: usize, alpha: f64, out: &mut [f64]) {
        self.expand(obj, i, self.record(i), alpha, out)
    }

    /// `sum_i weights_i * g_i`, recomputed from the records.
    pub fn weighted_sum(&self, obj: &Objective, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; obj.dim()];
        for (i, &wi) in weights.iter().enumerate() {
            if wi != 0.0 {
                self.expand_stored(obj, i, wi, &mut out);
            }
        }
        out
    }
}
