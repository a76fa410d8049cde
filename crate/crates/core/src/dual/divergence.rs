use crate::error::{Error, Result};

/// f-divergence penalizing departures from the uniform distribution.
///
/// `D_f(q || 1/n) = (1/n) sum_i f(n q_i)` with
/// - chi-square: `f(x) = x^2 - 1`, `f*(y) = y^2/4 + 1`;
/// - Kullback-Leibler: `f(x) = x ln x` on `x >= 0`, `f*(y) = exp(y - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Divergence {
    ChiSquare,
    Kl,
}

impl Divergence {
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "chi2" | "chi_square" => Ok(Divergence::ChiSquare),
            "kl" => Ok(Divergence::Kl),
            other => Err(Error::Parameter(format!(
                "unknown divergence `{other}` (expected chi2 or kl)"
            ))),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Divergence::ChiSquare => "chi2",
            Divergence::Kl => "kl",
        }
    }

    /// Generator `f`.
    pub fn generator(&self, x: f64) -> f64 {
        match self {
            Divergence::ChiSquare => x * x - 1.0,
            Divergence::Kl => {
                if x > 0.0 {
                    x * x.ln()
                } else if x == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Derivative `f'`, used by first-order reference solvers.
    pub fn generator_derivative(&self, x: f64) -> f64 {
        match self {
            Divergence::ChiSquare => 2.0 * x,
            Divergence::Kl => x.ln() + 1.0,
        }
    }

    /// Convex conjugate `f*`.
    pub fn conjugate(&self, y: f64) -> f64 {
        match self {
            Divergence::ChiSquare => 0.25 * y * y + 1.0,
            Divergence::Kl => (y - 1.0).exp(),
        }
    }

    /// `[f*]'`, nondecreasing on the whole real line.
    #[inline]
    pub fn conjugate_derivative(&self, y: f64) -> f64 {
        match self {
            Divergence::ChiSquare => 0.5 * y,
            Divergence::Kl => (y - 1.0).exp(),
        }
    }

    /// Strong convexity constant of `f` on `[0, n]`.
    pub fn strong_convexity(&self, n: usize) -> f64 {
        match self {
            Divergence::ChiSquare => 2.0,
            Divergence::Kl => 1.0 / n as f64,
        }
    }

    /// `D_f(q || 1/n)`.
    pub fn from_uniform(&self, q: &[f64]) -> f64 {
        let n = q.len() as f64;
        q.iter().map(|&qi| self.generator(n * qi)).sum::<f64>() / n
    }
}
