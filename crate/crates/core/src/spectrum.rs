//! Spectra: sorted nonnegative weight vectors that define a spectral risk
//! measure `sum_i sigma_i l_(i)` and its uncertainty set `P(sigma)`.

use crate::error::{Error, Result};

/// Parametric family a [`Spectrum`] was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumFamily {
    /// Superquantile at level `p`: uniform mass on the top `ceil(p n)` losses.
    Cvar { p: f64 },
    /// `sigma_i = (i/n)^b - ((i-1)/n)^b`.
    Extremile { b: f64 },
    /// Exponential spectral risk measure, increments of `exp(gamma i / n)`.
    Esrm { gamma: f64 },
    /// Empirical risk (all weights `1/n`).
    Uniform,
}

impl SpectrumFamily {
    /// Parses the config tags `"cvar"`, `"extremile"`, `"esrm"` and `"erm"`.
    /// The parameter is ignored for `"erm"`.
    pub fn from_tag(tag: &str, param: f64) -> Result<Self> {
        let family = match tag {
            "cvar" | "superquantile" => SpectrumFamily::Cvar { p: param },
            "extremile" => SpectrumFamily::Extremile { b: param },
            "esrm" => SpectrumFamily::Esrm { gamma: param },
            "erm" | "uniform" => SpectrumFamily::Uniform,
            other => {
                return Err(Error::Parameter(format!(
                    "unknown spectrum family `{other}` (expected cvar, extremile, esrm or erm)"
                )))
            }
        };
        family.validate()?;
        Ok(family)
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SpectrumFamily::Cvar { .. } => "cvar",
            SpectrumFamily::Extremile { .. } => "extremile",
            SpectrumFamily::Esrm { .. } => "esrm",
            SpectrumFamily::Uniform => "erm",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            SpectrumFamily::Cvar { p } => p,
            SpectrumFamily::Extremile { b } => b,
            SpectrumFamily::Esrm { gamma } => gamma,
            SpectrumFamily::Uniform => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SpectrumFamily::Cvar { p } if !(p > 0.0 && p <= 1.0) => {
                Err(Error::Parameter(format!("cvar level must lie in (0, 1], got {p}")))
            }
            SpectrumFamily::Extremile { b } if !(b >= 1.0 && b.is_finite()) => {
                Err(Error::Parameter(format!("extremile exponent must be >= 1, got {b}")))
            }
            SpectrumFamily::Esrm { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::Parameter(format!("esrm rate must be > 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

/// A nondecreasing, nonnegative weight vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    family: SpectrumFamily,
    weights: Vec<f64>,
}

impl Spectrum {
    pub fn new(family: SpectrumFamily, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Size("spectrum length must be at least 1".into()));
        }
        family.validate()?;
        let nf = n as f64;
        let mut weights: Vec<f64> = match family {
            SpectrumFamily::Uniform => vec![1.0 / nf; n],
            SpectrumFamily::Cvar { p } => {
                // Guard against `p * n` landing just above an integer.
                let k = ((p * nf - 1e-9).ceil() as usize).clamp(1, n);
                let mut w = vec![0.0; n];
                for wi in &mut w[n - k..] {
                    *wi = 1.0 / k as f64;
                }
                w
            }
            SpectrumFamily::Extremile { b } => (1..=n)
                .map(|i| (i as f64 / nf).powf(b) - ((i - 1) as f64 / nf).powf(b))
                .collect(),
            SpectrumFamily::Esrm { gamma } => {
                // e^{g i/n} - e^{g (i-1)/n} = e^{g (i-1)/n} (e^{g/n} - 1)
                let step = (gamma / nf).exp_m1();
                let raw: Vec<f64> = (1..=n)
                    .map(|i| (gamma * (i - 1) as f64 / nf).exp() * step)
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|x| x / total).collect()
            }
        };
        // Rounding in the increment formulas can break monotonicity by an ulp.
        for i in 1..n {
            if weights[i] < weights[i - 1] {
                weights[i] = weights[i - 1];
            }
        }
        let spectrum = Spectrum { family, weights };
        spectrum.check()?;
        Ok(spectrum)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(SpectrumFamily::Uniform, n)
    }

    pub fn cvar(p: f64, n: usize) -> Result<Self> {
        Self::new(SpectrumFamily::Cvar { p }, n)
    }

    pub fn extremile(b: f64, n: usize) -> Result<Self> {
        Self::new(SpectrumFamily::Extremile { b }, n)
    }

    pub fn esrm(gamma: f64, n: usize) -> Result<Self> {
        Self::new(SpectrumFamily::Esrm { gamma }, n)
    }

    /// Builds a spectrum from explicit weights, validating the invariants.
    /// The family is recorded as uniform, so [`Spectrum::with_len`] is only
    /// meaningful for parametric spectra.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Size("spectrum length must be at least 1".into()));
        }
        let spectrum = Spectrum {
            family: SpectrumFamily::Uniform,
            weights,
        };
        spectrum.check()?;
        Ok(spectrum)
    }

    /// The same family evaluated at a different length (used for minibatches).
    pub fn with_len(&self, n: usize) -> Result<Self> {
        Self::new(self.family, n)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn family(&self) -> SpectrumFamily {
        self.family
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// True when every weight is equal, so `P(sigma)` is the single point `1/n`.
    pub fn is_uniform(&self) -> bool {
        self.weights[0] == self.weights[self.weights.len() - 1]
    }

    /// Skewness `n * sigma_n`, always at least one.
    pub fn kappa(&self) -> f64 {
        self.len() as f64 * self.weights[self.len() - 1]
    }

    fn check(&self) -> Result<()> {
        let w = &self.weights;
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Parameter("spectrum weights must be finite and nonnegative".into()));
        }
        if w.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::Parameter("spectrum weights must be nondecreasing".into()));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("spectrum weights sum to {total}, not 1")));
        }
        Ok(())
    }
}
