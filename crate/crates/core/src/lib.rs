//! Minimization of spectral risk measures with an f-divergence shift penalty.
//!
//! The objective is
//!
//! ```text
//! F(w) = max_{q in P(sigma)} { q . l(w) - nu * D_f(q || 1/n) } + (mu / 2) |w|^2
//! ```
//!
//! where `P(sigma)` is the permutahedron spanned by a sorted spectrum and
//! `l(w)` collects per-example losses. The crate is organised bottom-up:
//!
//! - [`spectrum`]: CVaR, extremile, ESRM and uniform spectra.
//! - [`dual`]: the exact inner maximizer (sort, pool adjacent violators,
//!   convert), incremental re-sorting, and a Frank-Wolfe reference oracle.
//! - [`losses`]: per-example value/gradient/prox oracles for GLM losses.
//! - [`data`]: CSV loading, standardization and synthetic instances.
//! - [`optim`]: Prospect, Prospect-Moreau, SaddleSAGA, LSVRG, minibatch SGD,
//!   SRDA, full-batch evaluation and an L-BFGS reference solver.

pub mod data;
pub mod dual;
mod error;
pub mod linalg;
pub mod losses;
pub mod optim;
pub mod spectrum;

pub use data::{Dataset, Labels, Matrix, Task};
pub use dual::{AdversarialWeights, Divergence, SortedLossTable};
pub use error::{Error, Result};
pub use losses::LossOracle;
pub use optim::{MetricsRow, Objective, Optimizer, RunRecord};
pub use spectrum::{Spectrum, SpectrumFamily};
