//! Stochastic optimizers for the shift-penalized spectral risk objective,
//! full-batch evaluation, and a quasi-Newton reference solver.
//!
//! Every optimizer counts its own first-order oracle calls: one per
//! evaluation of `l_i`, `grad l_i` (together or separately) or `prox_{l_i}`.
//! Passes are `calls / n`.

mod driver;
mod lsvrg;
mod minibatch;
mod moreau;
mod objective;
mod prospect;
mod reference;
mod saddle;
mod table;

pub use driver::{run_trajectory, MetricsRow, RunOptions, RunRecord, RunStatus};
pub use lsvrg::Lsvrg;
pub use minibatch::{MinibatchSgd, Srda};
pub use moreau::ProspectMoreau;
pub use objective::Objective;
pub use prospect::{IndexCoupling, Prospect};
pub use reference::{reference_minimizer, ReferenceOptions};
pub use saddle::{DualRate, SaddleSaga};
pub use table::GradTable;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A stochastic optimizer stepped one iteration at a time.
pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    fn step(&mut self) -> Result<()>;

    fn iterate(&self) -> &[f64];

    /// Cumulative oracle calls, including initialization.
    fn oracle_calls(&self) -> u64;
}

/// The generator for one run.
pub fn run_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform index in `0..n` from exactly one 64-bit draw (multiply-shift).
#[inline]
pub fn uniform_index(rng: &mut impl RngCore, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// Uniform in `[0, 1)` with 53 random bits, from one draw.
#[inline]
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Index `i` with probability `p_i` by inverting the prefix sums
/// `prefix[i] = p_0 + ... + p_i` (one draw).
pub fn weighted_index(rng: &mut impl RngCore, prefix: &[f64]) -> usize {
    let total = prefix[prefix.len() - 1];
    let u = unit_uniform(rng) * total;
    // First k with prefix[k] > u, so p_k > 0.
    let mut k = prefix.partition_point(|&c| c <= u);
    if k >= prefix.len() {
        // Rounding put u at the total: take the last positive entry.
        k = prefix.len() - 1;
        while k > 0 && prefix[k] == prefix[k - 1] {
            k -= 1;
        }
    }
    k
}

/// `(F(w) - F*) / (F(w0) - F*)`, reported as-is (may be negative).
pub fn suboptimality(f_w: f64, f_w0: f64, f_star: f64) -> Result<f64> {
    let denom = f_w0 - f_star;
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::Degenerate(format!(
            "initial objective {f_w0} does not exceed the optimum {f_star}"
        )));
    }
    Ok((f_w - f_star) / denom)
}

fn check_step_size(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Parameter(format!("learning rate must be positive, got {eta}")));
    }
    Ok(())
}

fn check_finite(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Diverged(format!("{what} became {v}")))
    }
}
