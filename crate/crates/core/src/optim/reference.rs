//! Limited-memory BFGS with backtracking, used to approximate `w*`.

use std::collections::VecDeque;

use super::Objective;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    /// Stop once `|grad F(w)| <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions { tol: 1e-10, max_iter: 100_000, memory: 10 }
    }
}

fn two_loop(grad: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = rho * dot(s, &d);
        for (di, yi) in d.iter_mut().zip(y) {
            *di -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        d.iter_mut().for_each(|x| *x *= gamma);
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &d);
        for (di, si) in d.iter_mut().zip(s) {
            *di += (a - b) * si;
        }
    }
    d
}

/// Minimizes `F` from `w0` (zero if `None`) until `|grad F| <= tol`.
///
/// Near the optimum `F` is flat to machine precision long before the
/// gradient reaches `1e-10`, so a step that fails the Armijo test but leaves
/// `F` unchanged to rounding is still accepted when it shrinks the gradient.
pub fn reference_minimizer(obj: &Objective, w0: Option<&[f64]>, opts: ReferenceOptions) -> Result<Vec<f64>> {
    obj.require_shift("the reference minimizer")?;
    if obj.mu() <= 0.0 {
        return Err(Error::Unsupported("the reference minimizer needs positive regularization".into()));
    }
    let p = obj.dim();
    let mut w = match w0 {
        Some(w0) if w0.len() == p => w0.to_vec(),
        Some(w0) => {
            return Err(Error::Size(format!("start point has length {}, expected {p}", w0.len())));
        }
        None => vec![0.0; p],
    };
    let (mut f, mut g) = obj.value_and_gradient(&w)?;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trial = vec![0.0; p];
    for iter in 0..opts.max_iter {
        let gnorm = norm(&g);
        if gnorm <= opts.tol {
            return Ok(w);
        }
        let mut d = two_loop(&g, &history);
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            d = g.iter().map(|x| -x).collect();
            slope = -gnorm * gnorm;
        }
        let mut t = if history.is_empty() && iter == 0 { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..80 {
            for ((wt, wi), di) in trial.iter_mut().zip(&w).zip(&d) {
                *wt = wi + t * di;
            }
            let (ft, gt) = obj.value_and_gradient(&trial)?;
            let flat = (ft - f).abs() <= 1e-14 * (1.0 + f.abs());
            if ft <= f + 1e-4 * t * slope || (flat && norm(&gt) < gnorm) {
                accepted = Some((ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((ft, gt)) = accepted else {
            if history.is_empty() {
                return Err(Error::Convergence(format!(
                    "line search failed at gradient norm {gnorm:e} after {iter} iterations"
                )));
            }
            history.clear();
            continue;
        };
        let s: Vec<f64> = trial.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        w.copy_from_slice(&trial);
        f = ft;
        g = gt;
    }
    Err(Error::Convergence(format!(
        "gradient norm {:e} above {:e} after {} iterations",
        norm(&g),
        opts.tol,
        opts.max_iter
    )))
}
