//! Frank-Wolfe maximization of `q . l - nu D_f(q || 1/n)` over `P(sigma)`.
//!
//! Independent of the pooling solver: the only structure used is the linear
//! maximization oracle of the permutahedron, which places `sigma` in the
//! sorted order of the direction. Used as a test oracle.

use super::{AdversarialWeights, Divergence};
use crate::linalg::dot;
use crate::spectrum::Spectrum;

/// `argmax_{q in P(sigma)} q . g`: the vertex that pairs `sigma` with the
/// ranks of `g`.
pub fn lmo_vertex(g: &[f64], spectrum: &Spectrum) -> Vec<f64> {
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut v = vec![0.0; g.len()];
    for (&i, &s) in order.iter().zip(spectrum.weights()) {
        v[i] = s;
    }
    v
}

fn gradient(l: &[f64], q: &[f64], nu: f64, divergence: Divergence, out: &mut [f64]) {
    let n = q.len() as f64;
    for ((o, &li), &qi) in out.iter_mut().zip(l).zip(q) {
        *o = li - nu * divergence.generator_derivative(n * qi);
    }
}

fn gap_tolerance(g: &[f64]) -> f64 {
    1e-14 * (1.0 + g.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Vanilla Frank-Wolfe from the uniform point with open-loop steps `2/(t+2)`.
///
/// Stops early when the duality gap vanishes. Sublinear: accuracy after
/// `iters` steps is `O(1/iters)`.
pub fn fw_reference_weights(
    l: &[f64],
    spectrum: &Spectrum,
    nu: f64,
    divergence: Divergence,
    iters: usize,
) -> AdversarialWeights {
    let n = l.len();
    let mut q = vec![1.0 / n as f64; n];
    let mut g = vec![0.0; n];
    for t in 0..iters {
        gradient(l, &q, nu, divergence, &mut g);
        let s = lmo_vertex(&g, spectrum);
        let gap = dot(&g, &s) - dot(&g, &q);
        if gap <= gap_tolerance(&g) {
            break;
        }
        let step = 2.0 / (t as f64 + 2.0);
        for (qi, si) in q.iter_mut().zip(&s) {
            *qi += step * (si - *qi);
        }
    }
    AdversarialWeights::new(q)
}

/// Pairwise Frank-Wolfe with exact line search, started from the uniform
/// point written as the average of the cyclic shifts of `sigma`.
///
/// Converges linearly for the strongly concave objective on a polytope, so a
/// few thousand iterations reach near machine precision at small `n`.
pub fn fw_pairwise_weights(
    l: &[f64],
    spectrum: &Spectrum,
    nu: f64,
    divergence: Divergence,
    iters: usize,
) -> AdversarialWeights {
    let n = l.len();
    let sigma = spectrum.weights();
    let mut active: Vec<(Vec<f64>, f64)> = Vec::new();
    for shift in 0..n {
        let v: Vec<f64> = (0..n).map(|i| sigma[(i + shift) % n]).collect();
        add_vertex(&mut active, v, 1.0 / n as f64);
    }
    let mut q = vec![1.0 / n as f64; n];
    let mut g = vec![0.0; n];
    let mut d = vec![0.0; n];
    for _ in 0..iters {
        gradient(l, &q, nu, divergence, &mut g);
        let s = lmo_vertex(&g, spectrum);
        let fw_gap = dot(&g, &s) - dot(&g, &q);
        if fw_gap <= gap_tolerance(&g) {
            break;
        }
        let (away, _) = active
            .iter()
            .enumerate()
            .map(|(k, (v, _))| (k, dot(&g, v)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        let max_step = active[away].1;
        for ((di, si), ai) in d.iter_mut().zip(&s).zip(&active[away].0) {
            *di = si - ai;
        }
        let slope = dot(&g, &d);
        if slope <= 0.0 {
            break;
        }
        let step = line_search(l, &q, &d, nu, divergence, slope, max_step);
        if step <= 0.0 {
            // An away vertex left with rounding-level weight blocks every
            // step; drop it instead of stopping.
            if max_step <= 1e-12 {
                active.swap_remove(away);
                continue;
            }
            break;
        }
        if step >= max_step {
            active.swap_remove(away);
        } else {
            active[away].1 -= step;
        }
        add_vertex(&mut active, s, step);
        // Rebuild q from the atoms: incremental updates cancel, and a
        // coordinate can drift far below what its atoms imply, pinning
        // every later step.
        q.fill(0.0);
        for (v, weight) in &active {
            for (qi, vi) in q.iter_mut().zip(v) {
                *qi += weight * vi;
            }
        }
    }
    AdversarialWeights::new(q)
}

fn add_vertex(active: &mut Vec<(Vec<f64>, f64)>, v: Vec<f64>, weight: f64) {
    match active.iter_mut().find(|(u, _)| *u == v) {
        Some(entry) => entry.1 += weight,
        None => active.push((v, weight)),
    }
}

/// Maximizes the objective along `q + t d` for `t` in `[0, max_step]`.
fn line_search(
    l: &[f64],
    q: &[f64],
    d: &[f64],
    nu: f64,
    divergence: Divergence,
    slope: f64,
    max_step: f64,
) -> f64 {
    let n = q.len() as f64;
    match divergence {
        Divergence::ChiSquare => {
            let curvature = 2.0 * nu * n * dot(d, d);
            (slope / curvature).min(max_step)
        }
        Divergence::Kl => {
            let derivative = |t: f64| -> f64 {
                q.iter()
                    .zip(d)
                    .zip(l)
                    .map(|((&qi, &di), &li)| {
                        if di == 0.0 {
                            0.0
                        } else {
                            di * (li - nu * ((n * (qi + t * di)).ln() + 1.0))
                        }
                    })
                    .sum()
            };
            let hi_slope = derivative(max_step);
            if hi_slope >= 0.0 {
                return max_step;
            }
            // The optimal step can be far below max_step * 2^-200 when some
            // weight is exponentially small, so halve down to subnormals.
            let (mut lo, mut hi) = (0.0, max_step);
            for _ in 0..2200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if derivative(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    }
}
