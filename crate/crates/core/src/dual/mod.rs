//! Exact solution of the penalized inner problem
//!
//! ```text
//! q*(l) = argmax_{q in P(sigma)}  q . l - nu * D_f(q || 1/n)
//! ```
//!
//! The maximization is dual to an isotonic problem over the sorted losses,
//!
//! ```text
//! min_{c_1 <= ... <= c_n}  sum_i sigma_i c_i + (nu/n) f*((l_(i) - c_i) / nu)
//! ```
//!
//! which pool adjacent violators solves in one linear pass once the losses are
//! sorted. The maximizer is recovered coordinate-wise through the derivative
//! of the conjugate, `q_(i) = [f*]'((l_(i) - c_i) / nu) / n`.

mod divergence;
mod frank_wolfe;
mod table;

pub use divergence::Divergence;
pub use frank_wolfe::{fw_pairwise_weights, fw_reference_weights, lmo_vertex};
pub use table::SortedLossTable;

use crate::error::{Error, Result};
use crate::linalg::logaddexp;
use crate::spectrum::Spectrum;

/// A maximizer `q` of the inner problem: a probability vector in `P(sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialWeights(Vec<f64>);

impl AdversarialWeights {
    pub fn new(q: Vec<f64>) -> Self {
        AdversarialWeights(q)
    }

    pub fn uniform(n: usize) -> Self {
        AdversarialWeights(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks that the weights sum to one, are nonnegative, and lie in
    /// `P(sigma)`: the `m` largest entries never exceed the `m` largest
    /// spectrum weights.
    pub fn validate(&self, spectrum: &Spectrum) -> Result<()> {
        let q = &self.0;
        if q.len() != spectrum.len() {
            return Err(Error::Size(format!(
                "weights have length {} but spectrum has {}",
                q.len(),
                spectrum.len()
            )));
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Precondition(format!("weights sum to {total}")));
        }
        if let Some(min) = q.iter().copied().reduce(f64::min) {
            if min < -1e-10 {
                return Err(Error::Precondition(format!("negative weight {min}")));
            }
        }
        let mut desc = q.clone();
        desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let (mut top_q, mut top_s) = (0.0, 0.0);
        for (m, (qv, sv)) in desc.iter().zip(spectrum.weights().iter().rev()).enumerate() {
            top_q += qv;
            top_s += sv;
            if top_q > top_s + 1e-8 {
                return Err(Error::Precondition(format!(
                    "top-{} mass {top_q} exceeds spectrum mass {top_s}",
                    m + 1
                )));
            }
        }
        Ok(())
    }
}

impl AsRef<[f64]> for AdversarialWeights {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    len: usize,
    value: f64,
    // chi2: sum of unconstrained minimizers; kl: logsumexp of l / nu.
    a: f64,
    // kl only: logsumexp of ln sigma over the block.
    b: f64,
}

/// Reusable PAV workspace bound to one spectrum, shift cost and divergence.
#[derive(Debug, Clone)]
pub struct WeightSolver {
    spectrum: Spectrum,
    nu: f64,
    divergence: Divergence,
    blocks: Vec<Block>,
}

impl WeightSolver {
    pub fn new(spectrum: Spectrum, nu: f64, divergence: Divergence) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Parameter(format!("shift cost must be positive, got {nu}")));
        }
        Ok(WeightSolver {
            blocks: Vec::with_capacity(spectrum.len()),
            spectrum,
            nu,
            divergence,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn divergence(&self) -> Divergence {
        self.divergence
    }

    fn pool(&mut self, sorted: impl Fn(usize) -> f64) {
        let sigma = self.spectrum.weights();
        let n = sigma.len();
        let nu = self.nu;
        let log_n = (n as f64).ln();
        self.blocks.clear();
        match self.divergence {
            Divergence::ChiSquare => {
                let scale = 2.0 * n as f64 * nu;
                for (i, &s) in sigma.iter().enumerate() {
                    let a = sorted(i) - scale * s;
                    let mut cur = Block { len: 1, value: a, a, b: 0.0 };
                    while let Some(prev) = self.blocks.last() {
                        if prev.value < cur.value {
                            break;
                        }
                        cur.a += prev.a;
                        cur.len += prev.len;
                        cur.value = cur.a / cur.len as f64;
                        self.blocks.pop();
                    }
                    self.blocks.push(cur);
                }
            }
            Divergence::Kl => {
                let kl_value = |a: f64, b: f64| {
                    if b == f64::NEG_INFINITY {
                        f64::INFINITY
                    } else {
                        nu * (a - b - log_n - 1.0)
                    }
                };
                for (i, &s) in sigma.iter().enumerate() {
                    let a = sorted(i) / nu;
                    let b = s.ln();
                    let mut cur = Block { len: 1, value: kl_value(a, b), a, b };
                    while let Some(prev) = self.blocks.last() {
                        if prev.value < cur.value {
                            break;
                        }
                        cur.a = logaddexp(prev.a, cur.a);
                        cur.b = logaddexp(prev.b, cur.b);
                        cur.len += prev.len;
                        cur.value = kl_value(cur.a, cur.b);
                        self.blocks.pop();
                    }
                    self.blocks.push(cur);
                }
            }
        }
    }

    /// Isotonic dual solution `c` for losses already sorted ascending.
    pub fn dual_solution(&mut self, sorted: &[f64]) -> Result<Vec<f64>> {
        check_sorted(sorted, self.spectrum.len())?;
        self.pool(|i| sorted[i]);
        let mut c = Vec::with_capacity(sorted.len());
        for block in &self.blocks {
            c.extend(std::iter::repeat_n(block.value, block.len));
        }
        Ok(c)
    }

    /// Writes `q*(table)` into `q` (indexed like the table's values).
    pub fn solve_into(&mut self, table: &SortedLossTable, q: &mut [f64]) -> Result<()> {
        let n = self.spectrum.len();
        if table.len() != n || q.len() != n {
            return Err(Error::Size(format!(
                "table has {} entries, output {}, spectrum {n}",
                table.len(),
                q.len()
            )));
        }
        if self.spectrum.is_uniform() {
            // P(sigma) is the single point 1/n.
            q.fill(1.0 / n as f64);
            return Ok(());
        }
        self.pool(|r| table.sorted(r));
        let inv_n = 1.0 / n as f64;
        let mut r = 0;
        for block in &self.blocks {
            for _ in 0..block.len {
                let idx = table.perm()[r];
                let y = (table.values()[idx] - block.value) / self.nu;
                q[idx] = inv_n * self.divergence.conjugate_derivative(y);
                r += 1;
            }
        }
        debug_assert!(
            q.iter().all(|&x| x >= -1e-10),
            "converted weights left the simplex: {q:?}"
        );
        Ok(())
    }

    pub fn solve(&mut self, table: &SortedLossTable) -> Result<AdversarialWeights> {
        let mut q = vec![0.0; self.spectrum.len()];
        self.solve_into(table, &mut q)?;
        Ok(AdversarialWeights(q))
    }

    /// Value of the isotonic dual objective at `c` for sorted losses.
    pub fn dual_objective(&self, sorted: &[f64], c: &[f64]) -> f64 {
        dual_objective(sorted, &self.spectrum, self.nu, self.divergence, c)
    }
}

fn check_sorted(sorted: &[f64], n: usize) -> Result<()> {
    if sorted.len() != n {
        return Err(Error::Size(format!(
            "{} losses for a spectrum of length {n}",
            sorted.len()
        )));
    }
    if let Some(i) = sorted.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite loss at sorted position {i}")));
    }
    for i in 1..sorted.len() {
        let slack = 1e-12 * sorted[i - 1].abs().max(1.0);
        if sorted[i] < sorted[i - 1] - slack {
            return Err(Error::Precondition(format!(
                "losses not sorted at position {i}: {} < {}",
                sorted[i],
                sorted[i - 1]
            )));
        }
    }
    Ok(())
}

/// Pool adjacent violators: the isotonic minimizer `c` for sorted losses.
pub fn pav(sorted: &[f64], spectrum: &Spectrum, nu: f64, divergence: Divergence) -> Result<Vec<f64>> {
    WeightSolver::new(spectrum.clone(), nu, divergence)?.dual_solution(sorted)
}

/// `sum_i g_i(c_i)` with `g_i(c) = sigma_i c + (nu/n) f*((l_(i) - c)/nu)`.
pub fn dual_objective(
    sorted: &[f64],
    spectrum: &Spectrum,
    nu: f64,
    divergence: Divergence,
    c: &[f64],
) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .zip(spectrum.weights())
        .zip(c)
        .map(|((&l, &s), &ci)| {
            // A zero-mass block sits at +inf and contributes nothing.
            let linear = if s == 0.0 { 0.0 } else { s * ci };
            linear + nu / n * divergence.conjugate((l - ci) / nu)
        })
        .sum()
}

/// `q . l - nu * D_f(q || 1/n)`.
pub fn primal_value(l: &[f64], q: &[f64], nu: f64, divergence: Divergence) -> f64 {
    let linear: f64 = l.iter().zip(q).map(|(a, b)| a * b).sum();
    if nu == 0.0 {
        linear
    } else {
        linear - nu * divergence.from_uniform(q)
    }
}

/// Exact maximizer of the penalized inner problem at the table's losses.
pub fn most_adverse_weights(
    table: &SortedLossTable,
    spectrum: &Spectrum,
    nu: f64,
    divergence: Divergence,
) -> Result<AdversarialWeights> {
    WeightSolver::new(spectrum.clone(), nu, divergence)?.solve(table)
}

/// Maximizer of `q . l` over `P(sigma)` without penalty: `sigma` placed in
/// the order of the losses.
pub fn sorted_spectrum_weights(table: &SortedLossTable, spectrum: &Spectrum) -> AdversarialWeights {
    let mut q = vec![0.0; table.len()];
    for (&idx, &s) in table.perm().iter().zip(spectrum.weights()) {
        q[idx] = s;
    }
    AdversarialWeights(q)
}

/// Penalized spectral risk of the table's losses; `nu = 0` gives the plain
/// L-risk `sum_i sigma_i l_(i)`.
pub fn risk_value(
    table: &SortedLossTable,
    spectrum: &Spectrum,
    nu: f64,
    divergence: Divergence,
) -> Result<f64> {
    if table.len() != spectrum.len() {
        return Err(Error::Size(format!(
            "{} losses for a spectrum of length {}",
            table.len(),
            spectrum.len()
        )));
    }
    if nu < 0.0 || !nu.is_finite() {
        return Err(Error::Parameter(format!("shift cost must be nonnegative, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(table
            .perm()
            .iter()
            .zip(spectrum.weights())
            .map(|(&i, &s)| s * table.values()[i])
            .sum());
    }
    let q = most_adverse_weights(table, spectrum, nu, divergence)?;
    Ok(primal_value(table.values(), q.as_slice(), nu, divergence))
}

/// Euclidean projection of `u` onto `P(sigma)`.
///
/// Maximizing `q . u - (1/2n) * chi2(q)` over `P(sigma)` equals minimizing
/// `|q - u|^2 / 2` there, since `sum q = 1` on the permutahedron.
pub fn project_onto_permutahedron(u: &[f64], spectrum: &Spectrum) -> Result<AdversarialWeights> {
    let n = spectrum.len();
    let table = SortedLossTable::new(u.to_vec())?;
    most_adverse_weights(&table, spectrum, 0.5 / n as f64, Divergence::ChiSquare)
}

/// `argmin_{q in P(sigma)} (strength/2) |q - 1/n|^2 + (1/2) |q - z|^2`.
///
/// The two quadratics combine into `(1 + strength)/2 * |q - u|^2` with
/// `u = (z + strength/n) / (1 + strength)`, so this is a projection of `u`.
pub fn penalized_euclidean_projection(
    z: &[f64],
    spectrum: &Spectrum,
    strength: f64,
) -> Result<AdversarialWeights> {
    if !(strength > 0.0 && strength.is_finite()) {
        return Err(Error::Parameter(format!("penalty strength must be positive, got {strength}")));
    }
    if z.len() != spectrum.len() {
        return Err(Error::Size(format!(
            "point has length {} but spectrum has {}",
            z.len(),
            spectrum.len()
        )));
    }
    let center = strength / z.len() as f64;
    let scale = 1.0 / (1.0 + strength);
    let u: Vec<f64> = z.iter().map(|zi| (zi + center) * scale).collect();
    project_onto_permutahedron(&u, spectrum)
}
