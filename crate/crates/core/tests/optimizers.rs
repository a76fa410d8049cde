use std::sync::Arc;

use prospect_core::data::{make_synthetic, SyntheticSpec};
use prospect_core::linalg::{axpy, dist, norm};
use prospect_core::losses::{oracle_for, Counted, LossOracle, SquaredLoss};
use prospect_core::optim::{
    reference_minimizer, run_rng, run_trajectory, uniform_index, DualRate, IndexCoupling, Lsvrg, MinibatchSgd,
    Prospect, ProspectMoreau, ReferenceOptions, RunOptions, RunStatus, SaddleSaga, Srda,
};
use prospect_core::{Divergence, Error, Matrix, Objective, Optimizer, Spectrum, Task};

fn regression(n: usize, d: usize, seed: u64, noise: f64) -> Arc<dyn LossOracle> {
    let mut spec = SyntheticSpec::new(Task::Regression, n, d, seed);
    spec.noise = noise;
    oracle_for(&make_synthetic(&spec).unwrap()).unwrap()
}

fn spectra(n: usize) -> Vec<Spectrum> {
    vec![
        Spectrum::cvar(0.5, n).unwrap(),
        Spectrum::extremile(2.0, n).unwrap(),
        Spectrum::esrm(1.0, n).unwrap(),
    ]
}

fn objective(loss: &Arc<dyn LossOracle>, spectrum: Spectrum, nu: f64, div: Divergence) -> Objective {
    let mu = 1.0 / loss.len() as f64;
    Objective::new(loss.clone(), spectrum, nu, mu, div).unwrap()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    dist(a, b) <= tol * (1.0 + norm(b))
}

/// `sum_i q_i grad r_i(w)` by direct enumeration.
fn weighted_gradient(obj: &Objective, q: &[f64], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; obj.dim()];
    let mut g = vec![0.0; obj.dim()];
    for (i, &qi) in q.iter().enumerate() {
        obj.sample_value_grad(i, w, &mut g);
        axpy(qi, &g, &mut out);
    }
    out
}

fn mean_direction(n: usize, f: impl Fn(usize) -> Vec<f64>) -> Vec<f64> {
    let mut mean = f(0);
    mean.iter_mut().for_each(|x| *x /= n as f64);
    for i in 1..n {
        axpy(1.0 / n as f64, &f(i), &mut mean);
    }
    mean
}

#[test]
fn prospect_direction_is_unbiased_at_initialization() {
    let loss = regression(30, 4, 3, 1.0);
    let w0 = [0.3, -0.2, 0.5, 0.1];
    for div in [Divergence::ChiSquare, Divergence::Kl] {
        for spectrum in spectra(30) {
            let obj = objective(&loss, spectrum, 0.5, div);
            let opt = Prospect::new(&obj, &w0, 0.01, IndexCoupling::Shared, 0).unwrap();
            let mean = mean_direction(30, |i| opt.direction_for(i));
            assert!(close(&mean, &obj.full_gradient(&w0).unwrap(), 1e-10));
        }
    }
}

#[test]
fn prospect_direction_mean_uses_table_weights_when_stale() {
    let loss = regression(25, 3, 5, 1.0);
    let obj = objective(&loss, Spectrum::extremile(2.0, 25).unwrap(), 0.3, Divergence::ChiSquare);
    let mut opt = Prospect::new(&obj, &[0.0; 3], 0.02, IndexCoupling::Shared, 9).unwrap();
    for _ in 0..40 {
        opt.step().unwrap();
    }
    let w = opt.iterate().to_vec();
    let mean = mean_direction(25, |i| opt.direction_for(i));
    assert!(close(&mean, &weighted_gradient(&obj, opt.weights(), &w), 1e-10));
}

#[test]
fn single_sample_prospect_is_gradient_descent() {
    let x = Matrix::new(1, 2, vec![1.5, -0.5]).unwrap();
    let loss: Arc<dyn LossOracle> = Arc::new(SquaredLoss::new(x, vec![2.0]).unwrap());
    let obj = Objective::new(loss, Spectrum::uniform(1).unwrap(), 1.0, 0.1, Divergence::ChiSquare).unwrap();
    let w0 = [0.4, 0.7];
    let mut opt = Prospect::new(&obj, &w0, 0.2, IndexCoupling::Shared, 1).unwrap();
    assert_eq!(opt.weights(), &[1.0]);
    assert_eq!(opt.lagged_weights(), &[1.0]);
    let mut g = vec![0.0; 2];
    obj.sample_value_grad(0, &w0, &mut g);
    assert_eq!(opt.aggregate(), g.as_slice());

    let mut w = w0.to_vec();
    for _ in 0..50 {
        opt.step().unwrap();
        obj.sample_value_grad(0, &w, &mut g);
        axpy(-0.2, &g, &mut w);
        assert!(close(opt.iterate(), &w, 1e-12));
    }
}

#[test]
fn frozen_iterate_refreshes_each_entry_once_sampled() {
    let n = 20;
    let loss = regression(n, 3, 2, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, n).unwrap(), 1.0, Divergence::ChiSquare);
    // A step this small cannot move an O(1) iterate in double precision.
    let mut opt = Prospect::new(&obj, &[0.0; 3], 1e-300, IndexCoupling::Shared, 17).unwrap();
    let w1 = [1.0, -1.0, 0.5];
    opt.set_iterate(&w1);
    let target = obj.losses(&w1);

    // Replay the index stream to find when every entry has been sampled.
    let mut rng = run_rng(17);
    let mut seen = vec![false; n];
    let mut remaining = n;
    let mut collected_at = 0;
    while remaining > 0 {
        let i = uniform_index(&mut rng, n);
        if !seen[i] {
            seen[i] = true;
            remaining -= 1;
        }
        collected_at += 1;
    }
    let stale = |opt: &Prospect| {
        opt.loss_table().values().iter().zip(&target).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    };
    for _ in 0..collected_at - 1 {
        opt.step().unwrap();
        assert!(stale(&opt) > 0.0);
    }
    opt.step().unwrap();
    assert_eq!(opt.iterate(), &w1);
    assert_eq!(stale(&opt), 0.0);
}

#[test]
fn maintained_aggregate_matches_recomputation() {
    let loss = regression(40, 5, 8, 2.0);
    for coupling in [IndexCoupling::Shared, IndexCoupling::Decoupled] {
        let obj = objective(&loss, Spectrum::esrm(1.0, 40).unwrap(), 0.5, Divergence::Kl);
        let mut opt = Prospect::new(&obj, &[0.0; 5], 0.01, coupling, 4).unwrap();
        for _ in 0..2000 {
            opt.step().unwrap();
        }
        assert!(close(opt.aggregate(), &opt.recomputed_aggregate(), 1e-10));
    }
}

#[test]
fn compact_tables_only_without_regularization() {
    let loss = regression(10, 2, 1, 1.0);
    let plain = Objective::new(loss.clone(), Spectrum::uniform(10).unwrap(), 1.0, 0.0, Divergence::ChiSquare).unwrap();
    assert!(Prospect::new(&plain, &[0.0; 2], 0.1, IndexCoupling::Shared, 0).unwrap().uses_compact_table());
    let ridge = objective(&loss, Spectrum::uniform(10).unwrap(), 1.0, Divergence::ChiSquare);
    assert!(!Prospect::new(&ridge, &[0.0; 2], 0.1, IndexCoupling::Shared, 0).unwrap().uses_compact_table());
}

/// SAGA written out directly, with the same floating-point operations as
/// the weighted estimator at `q_i = 1/n`.
fn saga_iterates(obj: &Objective, w0: &[f64], eta: f64, seed: u64, steps: usize) -> Vec<Vec<f64>> {
    let n = obj.len();
    let p = obj.dim();
    let inv = 1.0 / n as f64;
    let scale = n as f64 * inv;
    let mut table = vec![vec![0.0; p]; n];
    for (i, g) in table.iter_mut().enumerate() {
        obj.sample_value_grad(i, w0, g);
    }
    let mut gbar = vec![0.0; p];
    for g in &table {
        axpy(inv, g, &mut gbar);
    }
    let mut rng = run_rng(seed);
    let mut w = w0.to_vec();
    let mut fresh = vec![0.0; p];
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let i = uniform_index(&mut rng, n);
        obj.sample_value_grad(i, &w, &mut fresh);
        let mut v = gbar.clone();
        axpy(scale, &fresh, &mut v);
        axpy(-scale, &table[i], &mut v);
        axpy(-eta, &v, &mut w);
        axpy(-inv, &table[i], &mut gbar);
        axpy(inv, &fresh, &mut gbar);
        table[i].copy_from_slice(&fresh);
        out.push(w.clone());
    }
    out
}

#[test]
fn uniform_spectrum_prospect_is_saga_bit_for_bit() {
    let n = 64;
    let loss = regression(n, 4, 6, 1.0);
    let obj = objective(&loss, Spectrum::uniform(n).unwrap(), 1.0, Divergence::ChiSquare);
    let w0 = [0.1, 0.2, -0.3, 0.0];
    let reference = saga_iterates(&obj, &w0, 0.03, 11, 1000);
    let mut opt = Prospect::new(&obj, &w0, 0.03, IndexCoupling::Shared, 11).unwrap();
    for expected in &reference {
        opt.step().unwrap();
        assert_eq!(opt.iterate(), expected.as_slice());
    }
}

#[test]
fn lsvrg_direction_at_checkpoint_is_full_gradient() {
    let loss = regression(30, 3, 4, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.3, 30).unwrap(), 0.7, Divergence::ChiSquare);
    let w0 = [0.5, -0.5, 0.25];
    let opt = Lsvrg::new(&obj, &w0, 0.01, 30, 2).unwrap();
    let grad = obj.full_gradient(&w0).unwrap();
    for i in 0..30 {
        assert!(close(&opt.direction_for(i), &grad, 1e-12));
    }
}

#[test]
fn lsvrg_expected_direction_is_checkpoint_weighted_gradient() {
    let loss = regression(30, 3, 4, 1.0);
    let obj = objective(&loss, Spectrum::extremile(2.0, 30).unwrap(), 0.7, Divergence::Kl);
    let mut opt = Lsvrg::new(&obj, &[0.0; 3], 0.02, 30, 2).unwrap();
    for _ in 0..17 {
        opt.step().unwrap();
    }
    let w = opt.iterate().to_vec();
    let mean = mean_direction(30, |i| opt.direction_for(i));
    assert!(close(&mean, &weighted_gradient(&obj, opt.checkpoint_weights(), &w), 1e-10));
}

#[test]
fn saddle_loss_estimate_is_unbiased() {
    let loss = regression(20, 3, 7, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 20).unwrap(), 1.0, Divergence::ChiSquare);
    let mut opt = SaddleSaga::new(&obj, &[0.0; 3], 0.01, DualRate::Heuristic, 3).unwrap();
    for _ in 0..30 {
        opt.step().unwrap();
    }
    let fresh = obj.losses(opt.iterate());
    let mean = mean_direction(20, |i| opt.loss_estimate(i, fresh[i]));
    assert!(close(&mean, &fresh, 1e-12));
}

#[test]
fn saddle_point_is_a_fixed_point() {
    let loss = regression(8, 2, 12, 1.0);
    for spectrum in spectra(8) {
        let obj = objective(&loss, spectrum, 0.2, Divergence::ChiSquare);
        let w_star = reference_minimizer(&obj, None, ReferenceOptions::default()).unwrap();
        let q_star = obj.weights_at(&w_star).unwrap().into_vec();
        for rule in [DualRate::Equal, DualRate::Heuristic, DualRate::Fixed(0.05)] {
            let mut opt = SaddleSaga::new(&obj, &w_star, 0.05, rule, 1).unwrap();
            for _ in 0..20 {
                opt.step().unwrap();
                assert!(dist(opt.iterate(), &w_star) <= 1e-8);
                assert!(dist(opt.dual(), &q_star) <= 1e-8);
            }
        }
    }
}

#[test]
fn saddle_rejects_kl_and_unknown_rules() {
    let loss = regression(8, 2, 12, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 8).unwrap(), 1.0, Divergence::Kl);
    assert!(matches!(SaddleSaga::new(&obj, &[0.0; 2], 0.1, DualRate::Equal, 0), Err(Error::Unsupported(_))));
    assert!(matches!(DualRate::from_tag("sideways", None), Err(Error::Parameter(_))));
    assert!(matches!(DualRate::from_tag("fixed", None), Err(Error::Parameter(_))));
    assert_eq!(DualRate::from_tag("fixed", Some(0.2)).unwrap(), DualRate::Fixed(0.2));
    assert_eq!(DualRate::Heuristic.delta(1.0, 10), 0.01);
}

#[test]
fn saddle_with_pinned_dual_is_saga_with_ridge_prox() {
    let n = 30;
    let loss = regression(n, 3, 13, 1.0);
    let obj = objective(&loss, Spectrum::uniform(n).unwrap(), 1e6, Divergence::ChiSquare);
    let (eta, mu) = (0.02, obj.mu());
    let w0 = [0.2, -0.1, 0.4];
    let mut opt = SaddleSaga::new(&obj, &w0, eta, DualRate::Equal, 5).unwrap();

    let mut table = vec![vec![0.0; 3]; n];
    for (i, g) in table.iter_mut().enumerate() {
        loss.value_grad(i, &w0, g);
    }
    let mut gbar = vec![0.0; 3];
    for g in &table {
        axpy(1.0 / n as f64, g, &mut gbar);
    }
    let mut rng = run_rng(5);
    let mut w = w0.to_vec();
    let mut fresh = vec![0.0; 3];
    for _ in 0..500 {
        let i = uniform_index(&mut rng, n);
        loss.value_grad(i, &w, &mut fresh);
        let mut v = gbar.clone();
        axpy(1.0, &fresh, &mut v);
        axpy(-1.0, &table[i], &mut v);
        axpy(-eta, &v, &mut w);
        w.iter_mut().for_each(|x| *x /= 1.0 + eta * mu);
        axpy(-1.0 / n as f64, &table[i], &mut gbar);
        axpy(1.0 / n as f64, &fresh, &mut gbar);
        table[i].copy_from_slice(&fresh);

        opt.step().unwrap();
        assert!(opt.dual().iter().all(|q| (q - 1.0 / n as f64).abs() <= 1e-8));
        assert!(close(opt.iterate(), &w, 1e-9));
    }
}

#[test]
fn moreau_gradient_at_shifted_point_is_the_loss_gradient() {
    let loss = regression(15, 3, 21, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 15).unwrap(), 1.0, Divergence::ChiSquare);
    let w = [0.3, 0.1, -0.7];
    let eta = 0.4;
    let mut g = vec![0.0; 3];
    let mut prox = vec![0.0; 3];
    for i in 0..15 {
        obj.sample_value_grad(i, &w, &mut g);
        let shifted: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + eta * b).collect();
        obj.sample_prox(i, &shifted, eta, &mut prox).unwrap();
        assert!(dist(&prox, &w) <= 1e-10);
        let envelope: Vec<f64> = shifted.iter().zip(&prox).map(|(a, b)| (a - b) / eta).collect();
        assert!(close(&envelope, &g, 1e-8));
    }
}

#[test]
fn single_sample_moreau_is_proximal_point() {
    let x = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
    let loss: Arc<dyn LossOracle> = Arc::new(SquaredLoss::new(x, vec![3.0]).unwrap());
    let obj = Objective::new(loss, Spectrum::uniform(1).unwrap(), 1.0, 0.2, Divergence::ChiSquare).unwrap();
    let eta = 0.5;
    let mut opt = ProspectMoreau::new(&obj, &[0.0, 0.0], eta, IndexCoupling::Shared, 0).unwrap();
    let mut w = vec![0.0, 0.0];
    let mut f = obj.full_objective(&w).unwrap();
    for _ in 0..30 {
        let mut next = vec![0.0; 2];
        obj.sample_prox(0, &w, eta, &mut next).unwrap();
        w = next;
        opt.step().unwrap();
        assert!(close(opt.iterate(), &w, 1e-12));
        let f_next = obj.full_objective(opt.iterate()).unwrap();
        assert!(f_next <= f + 1e-15);
        f = f_next;
    }
}

#[test]
fn moreau_needs_a_prox() {
    struct ValueOnly(Arc<dyn LossOracle>);
    impl LossOracle for ValueOnly {
        fn len(&self) -> usize {
            self.0.len()
        }
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn value(&self, i: usize, w: &[f64]) -> f64 {
            self.0.value(i, w)
        }
        fn value_grad(&self, i: usize, w: &[f64], grad: &mut [f64]) -> f64 {
            self.0.value_grad(i, w, grad)
        }
    }
    let loss: Arc<dyn LossOracle> = Arc::new(ValueOnly(regression(5, 2, 0, 1.0)));
    let obj = objective(&loss, Spectrum::uniform(5).unwrap(), 1.0, Divergence::ChiSquare);
    assert!(matches!(
        ProspectMoreau::new(&obj, &[0.0; 2], 0.1, IndexCoupling::Shared, 0),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn moreau_keeps_zero_weight_entries_fresh() {
    // With heavy label noise the 0.5-CVaR weights vanish on many examples.
    let loss = regression(200, 10, 0, 10.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 200).unwrap(), 1.0, Divergence::ChiSquare);
    let w_star = reference_minimizer(&obj, None, ReferenceOptions::default()).unwrap();
    let f_star = obj.full_objective(&w_star).unwrap();
    let w0 = [0.0; 10];
    let f0 = obj.full_objective(&w0).unwrap();
    let mut opt = ProspectMoreau::new(&obj, &w0, 3e-3, IndexCoupling::Shared, 1).unwrap();
    let opts = RunOptions { max_passes: 60.0, ..RunOptions::default() };
    let record = run_trajectory(&mut opt, &obj, f0, f_star, opts).unwrap();
    assert!(opt.weights().iter().filter(|&&q| q == 0.0).count() > 20);
    assert!(record.rows.last().unwrap().suboptimality <= 1e-6);
    let fresh = obj.losses(opt.iterate());
    let stale = opt.loss_table().values().iter().zip(&fresh).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(stale <= 1e-6 * (1.0 + f_star));
}

#[test]
fn moreau_converges_when_some_weights_are_tiny() {
    // Extremile weights on the smallest losses are O(1/n^2), so those indices
    // are drawn about once per hundred passes; without refreshing their
    // records the run stalls near 1e-6 and is kicked back up when one is drawn.
    let loss = regression(200, 10, 0, 10.0);
    let obj = objective(&loss, Spectrum::extremile(2.0, 200).unwrap(), 1.0, Divergence::ChiSquare);
    let w_star = reference_minimizer(&obj, None, ReferenceOptions::default()).unwrap();
    let f_star = obj.full_objective(&w_star).unwrap();
    let w0 = [0.0; 10];
    let f0 = obj.full_objective(&w0).unwrap();
    let mut opt = ProspectMoreau::new(&obj, &w0, 1e-3, IndexCoupling::Shared, 1).unwrap();
    let opts = RunOptions { max_passes: 70.0, ..RunOptions::default() };
    let record = run_trajectory(&mut opt, &obj, f0, f_star, opts).unwrap();
    let tail = &record.rows[record.rows.len() - 20..];
    assert!(tail.iter().all(|r| r.suboptimality <= 1e-8), "{:?}", tail.last());
}

#[test]
fn full_batch_sgd_step_is_gradient_descent() {
    let loss = regression(24, 3, 14, 1.0);
    for div in [Divergence::ChiSquare, Divergence::Kl] {
        let obj = objective(&loss, Spectrum::esrm(2.0, 24).unwrap(), 0.5, div);
        let w0 = [0.2, 0.4, -0.1];
        let mut opt = MinibatchSgd::new(&obj, &w0, 0.1, 24, 3).unwrap();
        opt.step().unwrap();
        let mut expected = w0.to_vec();
        axpy(-0.1, &obj.full_gradient(&w0).unwrap(), &mut expected);
        assert!(close(opt.iterate(), &expected, 1e-12));
    }
}

#[test]
fn uniform_spectrum_sgd_is_plain_minibatch_sgd() {
    let (n, m) = (30, 7);
    let loss = regression(n, 3, 15, 1.0);
    let obj = objective(&loss, Spectrum::uniform(n).unwrap(), 0.0, Divergence::ChiSquare);
    let (eta, mu) = (0.05, obj.mu());
    let mut opt = MinibatchSgd::new(&obj, &[0.0; 3], eta, m, 8).unwrap();
    let mut rng = run_rng(8);
    let mut order: Vec<usize> = (0..n).collect();
    let mut w = vec![0.0; 3];
    let mut g = vec![0.0; 3];
    for _ in 0..50 {
        for k in 0..m {
            let j = k + uniform_index(&mut rng, n - k);
            order.swap(k, j);
        }
        let mut step = vec![0.0; 3];
        for &i in &order[..m] {
            loss.value_grad(i, &w, &mut g);
            axpy(1.0 / m as f64, &g, &mut step);
        }
        axpy(mu, &w.clone(), &mut step);
        axpy(-eta, &step, &mut w);
        opt.step().unwrap();
        assert!(close(opt.iterate(), &w, 1e-12));
    }
}

#[test]
fn minibatch_estimate_is_biased_for_skewed_spectra() {
    let (n, m, trials) = (40, 8, 10_000);
    let loss = regression(n, 2, 16, 2.0);
    let obj = objective(&loss, Spectrum::cvar(0.1, n).unwrap(), 0.01, Divergence::ChiSquare);
    let w = [0.3, -0.6];
    let grad = obj.full_gradient(&w).unwrap();
    let mut sum = [0.0; 2];
    let mut sum_sq = [0.0; 2];
    for seed in 0..trials {
        // With eta = 1 the step is exactly the estimate including mu w.
        let mut opt = MinibatchSgd::new(&obj, &w, 1.0, m, seed).unwrap();
        opt.step().unwrap();
        for k in 0..2 {
            let v = w[k] - opt.iterate()[k];
            sum[k] += v;
            sum_sq[k] += v * v;
        }
    }
    let t = trials as f64;
    let z = (0..2)
        .map(|k| {
            let mean = sum[k] / t;
            let se = ((sum_sq[k] / t - mean * mean) / t).sqrt();
            (mean - grad[k]).abs() / se
        })
        .fold(0.0, f64::max);
    assert!(z > 5.0, "bias z-score {z}");
}

#[test]
fn batch_size_is_validated() {
    let loss = regression(10, 2, 0, 1.0);
    let obj = objective(&loss, Spectrum::uniform(10).unwrap(), 1.0, Divergence::ChiSquare);
    assert!(matches!(MinibatchSgd::new(&obj, &[0.0; 2], 0.1, 11, 0), Err(Error::Parameter(_))));
    assert!(matches!(MinibatchSgd::new(&obj, &[0.0; 2], 0.1, 0, 0), Err(Error::Parameter(_))));
}

#[test]
fn srda_closed_form() {
    let g = [1.0, -2.0];
    let (mu, eta) = (0.5, 0.25);
    assert_eq!(Srda::closed_form(&g, mu, eta, 1), vec![-1.0 / 4.5, 2.0 / 4.5]);
    let limit = Srda::closed_form(&g, mu, eta, 1 << 50);
    assert!(close(&limit, &[-2.0, 4.0], 1e-12));
}

#[test]
fn srda_needs_regularization() {
    let loss = regression(10, 2, 0, 1.0);
    let obj = Objective::new(loss, Spectrum::uniform(10).unwrap(), 1.0, 0.0, Divergence::ChiSquare).unwrap();
    assert!(matches!(Srda::new(&obj, &[0.0; 2], 0.1, 5, 0), Err(Error::Unsupported(_))));
}

#[test]
fn srda_solves_ridge_regression() {
    let n = 100;
    let loss = regression(n, 2, 18, 0.5);
    let mu = 0.1;
    let obj = Objective::new(loss.clone(), Spectrum::uniform(n).unwrap(), 1.0, mu, Divergence::ChiSquare).unwrap();
    // Normal equations (X^T X / n + mu I) w = X^T y / n, via the gradient at 0
    // and the Hessian assembled from gradients at the unit vectors.
    let grad_at = |w: &[f64]| {
        let mut total = vec![0.0; 2];
        let mut g = vec![0.0; 2];
        for i in 0..n {
            loss.value_grad(i, w, &mut g);
            axpy(1.0 / n as f64, &g, &mut total);
        }
        total
    };
    let b = grad_at(&[0.0, 0.0]);
    let c0 = grad_at(&[1.0, 0.0]);
    let c1 = grad_at(&[0.0, 1.0]);
    let h = [[c0[0] - b[0] + mu, c1[0] - b[0]], [c0[1] - b[1], c1[1] - b[1] + mu]];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let w_star = [(-b[0] * h[1][1] + b[1] * h[0][1]) / det, (b[0] * h[1][0] - b[1] * h[0][0]) / det];

    let mut opt = Srda::new(&obj, &[0.0, 0.0], 1.0, 10, 4).unwrap();
    for _ in 0..1000 {
        opt.step().unwrap();
    }
    assert!(dist(opt.iterate(), &w_star) <= 1e-2, "{:?} vs {w_star:?}", opt.iterate());
}

#[test]
fn methods_that_need_a_shift_reject_nu_zero() {
    let loss = regression(10, 2, 0, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 10).unwrap(), 0.0, Divergence::ChiSquare);
    let w0 = [0.0; 2];
    assert!(matches!(Prospect::new(&obj, &w0, 0.1, IndexCoupling::Shared, 0), Err(Error::Unsupported(_))));
    assert!(matches!(ProspectMoreau::new(&obj, &w0, 0.1, IndexCoupling::Shared, 0), Err(Error::Unsupported(_))));
    assert!(matches!(Lsvrg::new(&obj, &w0, 0.1, 10, 0), Err(Error::Unsupported(_))));
    assert!(matches!(SaddleSaga::new(&obj, &w0, 0.1, DualRate::Equal, 0), Err(Error::Unsupported(_))));
    assert!(matches!(obj.full_gradient(&w0), Err(Error::Unsupported(_))));
    // The plug-in baselines are defined without a shift.
    assert!(MinibatchSgd::new(&obj, &w0, 0.1, 4, 0).is_ok());
    assert!(Srda::new(&obj, &w0, 0.1, 4, 0).is_ok());
}

#[test]
fn step_sizes_are_validated() {
    let loss = regression(10, 2, 0, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 10).unwrap(), 1.0, Divergence::ChiSquare);
    for eta in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(Prospect::new(&obj, &[0.0; 2], eta, IndexCoupling::Shared, 0), Err(Error::Parameter(_))));
    }
    assert!(matches!(Lsvrg::new(&obj, &[0.0; 2], 0.1, 0, 0), Err(Error::Parameter(_))));
}

#[test]
fn oracle_calls_match_counted_evaluations() {
    let n = 25;
    let base = regression(n, 3, 19, 1.0);
    let steps = 180;
    for kind in 0..9 {
        let counted = Arc::new(Counted::new(base.clone()));
        let loss: Arc<dyn LossOracle> = counted.clone();
        let obj = objective(&loss, Spectrum::extremile(2.0, n).unwrap(), 1.0, Divergence::ChiSquare);
        let w0 = [0.0; 3];
        let mut opt: Box<dyn Optimizer> = match kind {
            0 => Box::new(Prospect::new(&obj, &w0, 0.01, IndexCoupling::Shared, 1).unwrap()),
            1 => Box::new(Prospect::new(&obj, &w0, 0.01, IndexCoupling::Decoupled, 1).unwrap()),
            2 => Box::new(ProspectMoreau::new(&obj, &w0, 0.01, IndexCoupling::Shared, 1).unwrap()),
            3 => Box::new(ProspectMoreau::new(&obj, &w0, 0.01, IndexCoupling::Decoupled, 1).unwrap()),
            4 => Box::new(SaddleSaga::new(&obj, &w0, 0.01, DualRate::Heuristic, 1).unwrap()),
            5 => Box::new(Lsvrg::new(&obj, &w0, 0.01, n, 1).unwrap()),
            6 => Box::new(Lsvrg::new(&obj, &w0, 0.01, 7, 1).unwrap()),
            7 => Box::new(MinibatchSgd::new(&obj, &w0, 0.01, 8, 1).unwrap()),
            _ => Box::new(Srda::new(&obj, &w0, 0.01, 8, 1).unwrap()),
        };
        assert_eq!(opt.oracle_calls(), counted.calls(), "{} at init", opt.name());
        for _ in 0..steps {
            opt.step().unwrap();
            assert_eq!(opt.oracle_calls(), counted.calls(), "{}", opt.name());
        }
    }
}

#[test]
fn prospect_call_counts_per_step() {
    let loss = regression(12, 2, 0, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 12).unwrap(), 1.0, Divergence::ChiSquare);
    let mut shared = Prospect::new(&obj, &[0.0; 2], 0.01, IndexCoupling::Shared, 0).unwrap();
    let mut decoupled = Prospect::new(&obj, &[0.0; 2], 0.01, IndexCoupling::Decoupled, 0).unwrap();
    assert_eq!((shared.oracle_calls(), decoupled.oracle_calls()), (12, 12));
    for t in 1..=10 {
        shared.step().unwrap();
        decoupled.step().unwrap();
        assert_eq!(shared.oracle_calls(), 12 + t);
        assert_eq!(decoupled.oracle_calls(), 12 + 2 * t);
    }
}

/// The ridge minimizer of the unshifted spectral risk for squared loss in
/// `d = 2`: for each ordering of the examples, solve the weighted least
/// squares and keep the solution whose losses sort the same way. By
/// convexity that solution is the minimizer.
fn unshifted_minimizer(x: &[[f64; 2]], y: &[f64], sigma: &[f64], mu: f64) -> [f64; 2] {
    fn permutations(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for k in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(k);
            for mut tail in permutations(rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }
    let n = y.len();
    let mut found = Vec::new();
    for order in permutations((0..n).collect()) {
        let mut h = [[mu, 0.0], [0.0, mu]];
        let mut b = [0.0, 0.0];
        for (rank, &i) in order.iter().enumerate() {
            let s = sigma[rank];
            for r in 0..2 {
                for c in 0..2 {
                    h[r][c] += s * x[i][r] * x[i][c];
                }
                b[r] += s * x[i][r] * y[i];
            }
        }
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let w = [(b[0] * h[1][1] - b[1] * h[0][1]) / det, (h[0][0] * b[1] - h[1][0] * b[0]) / det];
        let losses: Vec<f64> = order.iter().map(|&i| 0.5 * (x[i][0] * w[0] + x[i][1] * w[1] - y[i]).powi(2)).collect();
        if losses.windows(2).all(|p| p[0] < p[1]) {
            found.push(w);
        }
    }
    assert_eq!(found.len(), 1, "expected exactly one consistent ordering");
    found[0]
}

#[test]
fn small_shift_costs_do_not_move_the_minimizer() {
    let x = [[1.0, 0.2], [0.4, 1.0], [-0.8, 0.5], [1.5, -1.0], [0.3, -0.6]];
    let y = [1.0, -2.0, 0.5, 3.0, -0.4];
    let mu = 5.0;
    let spectrum = Spectrum::extremile(2.0, 5).unwrap();
    let sigma = spectrum.weights().to_vec();
    let w0 = unshifted_minimizer(&x, &y, &sigma, mu);

    let mut at_w0: Vec<f64> = (0..5).map(|i| 0.5 * (x[i][0] * w0[0] + x[i][1] * w0[1] - y[i]).powi(2)).collect();
    at_w0.sort_by(f64::total_cmp);
    let nu0 = (0..4)
        .map(|i| (at_w0[i + 1] - at_w0[i]) / (2.0 * 5.0 * (sigma[i + 1] - sigma[i])))
        .fold(f64::INFINITY, f64::min);
    assert!(nu0 > 1e-3, "degenerate construction: nu0 = {nu0}");

    let flat: Vec<f64> = x.iter().flatten().copied().collect();
    let loss: Arc<dyn LossOracle> = Arc::new(SquaredLoss::new(Matrix::new(5, 2, flat).unwrap(), y.to_vec()).unwrap());
    let solve = |nu: f64| {
        let obj = Objective::new(loss.clone(), spectrum.clone(), nu, mu, Divergence::ChiSquare).unwrap();
        reference_minimizer(&obj, None, ReferenceOptions::default()).unwrap()
    };
    let a = solve(nu0 / 2.0);
    let b = solve(nu0 / 10.0);
    assert!(dist(&a, &b) <= 1e-6);
    assert!(dist(&a, &w0) <= 1e-6);
    // Well above the threshold the penalty does move the minimizer.
    assert!(dist(&solve(100.0 * nu0), &w0) > 1e-6);
}

#[test]
fn trajectory_logs_every_pass_and_flags_divergence() {
    let loss = regression(50, 3, 20, 1.0);
    let obj = objective(&loss, Spectrum::cvar(0.5, 50).unwrap(), 1.0, Divergence::ChiSquare);
    let w0 = [0.0; 3];
    let w_star = reference_minimizer(&obj, None, ReferenceOptions::default()).unwrap();
    let (f0, f_star) = (obj.full_objective(&w0).unwrap(), obj.full_objective(&w_star).unwrap());
    let opts = RunOptions { max_passes: 10.0, log_every: 1.0, divergence_factor: 1e3 };

    let mut opt = Prospect::new(&obj, &w0, 0.01, IndexCoupling::Shared, 0).unwrap();
    let record = run_trajectory(&mut opt, &obj, f0, f_star, opts).unwrap();
    assert_eq!(record.status, RunStatus::Completed);
    assert_eq!(record.rows[0].pass, 1.0);
    assert_eq!(record.rows[0].suboptimality, 1.0);
    assert_eq!(record.rows.len(), 10);
    assert!((record.rows.last().unwrap().pass - 10.0).abs() <= 1.0);
    assert!(record.rows.windows(2).all(|w| w[1].pass > w[0].pass));
    assert_eq!(record.final_iterate, opt.iterate());

    let mut wild = Prospect::new(&obj, &w0, 100.0, IndexCoupling::Shared, 0).unwrap();
    let record = run_trajectory(&mut wild, &obj, f0, f_star, opts).unwrap();
    assert_eq!(record.status, RunStatus::Diverged);
}
