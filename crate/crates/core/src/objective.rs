//! Logistic loss, the semantic correlation penalty and the training objective.

use ndarray::ArrayView1;

use crate::boosting::DualMatrix;
use crate::data::{ClassId, ClassSplit, DivergenceMatrix};
use crate::error::{Error, Result};
use crate::scoring::{MarginMatrix, WeakBasis};
use crate::selection::{g_value, PaceParams};

/// `ln(1 + e^x)` as `max(x, 0) + ln(1 + e^{-|x|})`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// Margin loss `L(rho) = ln(1 + e^rho)`.
#[inline]
pub fn logistic_loss(rho: f64) -> f64 {
    softplus(rho)
}

#[inline]
pub fn logistic_loss_derivative(rho: f64) -> f64 {
    sigmoid(rho)
}

/// Population covariance `E[a b] - E[a] E[b]` over paired entries.
pub fn covariance_term(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len(), "covariance inputs must have equal length");
    let n = a.len();
    if n < 2 {
        return Err(Error::DegenerateTargetSet(n));
    }
    let nf = n as f64;
    let ma = a.iter().sum::<f64>() / nf;
    let mb = b.iter().sum::<f64>() / nf;
    Ok(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / nf)
}

/// Smooth hinge on the per-sample covariance, `ln(1 + e^cov)`.
#[inline]
pub fn scr_penalty(cov: f64) -> f64 {
    softplus(cov)
}

/// L1 strength `nu` and correlation-penalty strength `beta` (absolute, not per-sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub nu: f64,
    pub beta: f64,
}

impl Hyperparams {
    pub fn new(nu: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("nu", nu), ("beta", beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(Hyperparams { nu, beta })
    }
}

/// Per-sample composite costs `l_i = sum_{r in seen} L(rho_ir) + beta R(rho_i^t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCosts {
    pub l: Vec<f64>,
    pub cov: Vec<f64>,
    pub scr: Vec<f64>,
}

impl SampleCosts {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn mean_cov(&self) -> f64 {
        self.cov.iter().sum::<f64>() / self.cov.len() as f64
    }
}

/// Cost terms of one sample from its margin row: `(l_i, cov_i, R_i)`.
///
/// `cov_i = cov(Delta_i^t, rho_i^t) - Var(Delta_i^t)`, which equals the
/// covariance of the divergences with the raw target-class scores.
pub fn sample_cost_row(
    rho: ArrayView1<'_, f64>,
    label: ClassId,
    delta: &DivergenceMatrix,
    split: &ClassSplit,
    beta: f64,
) -> Result<(f64, f64, f64)> {
    let fit: f64 = split.seen().iter().map(|r| logistic_loss(rho[r.index()])).sum();
    let delta_t: Vec<f64> = split.unseen().iter().map(|&r| delta.get(label, r)).collect();
    let rho_t: Vec<f64> = split.unseen().iter().map(|r| rho[r.index()]).collect();
    let cov = covariance_term(&delta_t, &rho_t)? - covariance_term(&delta_t, &delta_t)?;
    let scr = scr_penalty(cov);
    Ok((fit + beta * scr, cov, scr))
}

pub fn sample_costs(
    margins: &MarginMatrix,
    labels: &[ClassId],
    delta: &DivergenceMatrix,
    split: &ClassSplit,
    hp: &Hyperparams,
) -> Result<SampleCosts> {
    let n = margins.n_samples();
    let mut costs = SampleCosts {
        l: Vec::with_capacity(n),
        cov: Vec::with_capacity(n),
        scr: Vec::with_capacity(n),
    };
    for (row, &y) in margins.rho().rows().into_iter().zip(labels) {
        let (l, cov, scr) = sample_cost_row(row, y, delta, split, hp.beta)?;
        costs.l.push(l);
        costs.cov.push(cov);
        costs.scr.push(scr);
    }
    Ok(costs)
}

/// `sum_i [s_i l_i + g(s_i; lambda, zeta)] + nu ||w||_1`.
pub fn total_objective(costs: &SampleCosts, s: &[f64], pace: &PaceParams, w: &[f64], hp: &Hyperparams) -> f64 {
    assert_eq!(costs.len(), s.len(), "one sample weight per cost");
    let samples: f64 = costs.l.iter().zip(s).map(|(l, &si)| si * l + g_value(si, pace)).sum();
    samples + hp.nu * w.iter().sum::<f64>()
}

/// Per-model dual constraint sums `sum_{i,r} Q_ir (h_j(x_i, y_i) - h_j(x_i, r))`.
pub fn dual_constraint_sums(basis: &WeakBasis, labels: &[ClassId], q: &DualMatrix) -> Vec<f64> {
    let q = q.matrix();
    let p = basis.sample_proj();
    let g = basis.class_proj();
    // (Q G)_ij = sum_r Q_ir g_rj
    let qg = q.dot(&g);
    let qsum = q.sum_axis(ndarray::Axis(1));
    (0..basis.len())
        .map(|j| {
            labels
                .iter()
                .enumerate()
                .map(|(i, y)| p[[i, j]] * (g[[y.index(), j]] * qsum[i] - qg[[i, j]]))
                .sum()
        })
        .collect()
}

/// Gradient in `w` of the weight subproblem, `nu - sum_{i,r} Q_ir (h_j(x_i, y_i) - h_j(x_i, r))`.
pub fn objective_gradient_w(basis: &WeakBasis, labels: &[ClassId], q: &DualMatrix, hp: &Hyperparams) -> Vec<f64> {
    dual_constraint_sums(basis, labels, q)
        .into_iter()
        .map(|v| hp.nu - v)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::PaceParams;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_loss_values_and_asymptotics() {
        assert!((logistic_loss(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(logistic_loss(-40.0) < 1e-17);
        assert!(logistic_loss(40.0) - 40.0 < 1e-17);
        assert!(logistic_loss(1e4).is_finite());
        assert!((logistic_loss(1e4) - 1e4).abs() < 1e-9);
    }

    #[test]
    fn logistic_derivative_matches_finite_difference() {
        let h = 1e-6;
        for rho in [1.0, -3.0, 0.0, 12.0] {
            let fd = (logistic_loss(rho + h) - logistic_loss(rho - h)) / (2.0 * h);
            assert!((fd - logistic_loss_derivative(rho)).abs() < 1e-8, "{rho}");
        }
    }

    #[test]
    fn softplus_convex_positive_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a: f64 = rng.random_range(-50.0..50.0);
            let b: f64 = rng.random_range(-50.0..50.0);
            let t: f64 = rng.random();
            let mid = t * a + (1.0 - t) * b;
            assert!(softplus(mid) <= t * softplus(a) + (1.0 - t) * softplus(b) + 1e-12);
            assert!(softplus(a) > 0.0);
            if a < b {
                assert!(softplus(a) <= softplus(b));
            }
        }
    }

    #[test]
    fn covariance_basic_cases() {
        assert_eq!(covariance_term(&[0.3, 0.3, 0.3], &[1.0, -2.0, 5.0]).unwrap(), 0.0);
        assert!((covariance_term(&[0.0, 1.0], &[1.0, 0.0]).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(covariance_term(&[1.0], &[2.0]), Err(Error::DegenerateTargetSet(1))));
    }

    #[test]
    fn covariance_matches_textbook_and_shift_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let delta: Vec<f64> = (0..7).map(|_| rng.random()).collect();
            let f: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let fy: f64 = rng.random_range(-3.0..3.0);
            let n = 7.0;
            let textbook = delta.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>() / n
                - (delta.iter().sum::<f64>() / n) * (f.iter().sum::<f64>() / n);
            let cov_f = covariance_term(&delta, &f).unwrap();
            assert!((cov_f - textbook).abs() < 1e-12);
            let rho: Vec<f64> = f.iter().zip(&delta).map(|(fi, di)| fi - fy + di).collect();
            let shifted = covariance_term(&delta, &rho).unwrap() - covariance_term(&delta, &delta).unwrap();
            assert!((shifted - cov_f).abs() < 1e-12);
        }
    }

    #[test]
    fn scr_penalty_values() {
        assert!((scr_penalty(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((scr_penalty(-0.25) - (1.0 + (-0.25f64).exp()).ln()).abs() < 1e-15);
        assert!((scr_penalty(-0.25) - 0.575939).abs() < 1e-6);
        assert!(scr_penalty(-1.0) < scr_penalty(0.0) && scr_penalty(0.0) < scr_penalty(1.0));
    }

    fn toy_delta() -> DivergenceMatrix {
        DivergenceMatrix::new(array![
            [0.0, 0.0, 0.2, 0.9, 0.4],
            [0.0, 0.0, 0.7, 0.1, 0.6],
            [0.2, 0.7, 0.0, 0.5, 0.3],
            [0.9, 0.1, 0.5, 0.0, 0.8],
            [0.4, 0.6, 0.3, 0.8, 0.0]
        ])
        .unwrap()
    }

    #[test]
    fn empty_ensemble_costs_reduce_to_seen_loss() {
        let delta = toy_delta();
        let split = ClassSplit::leading(2, 5).unwrap();
        let labels = vec![ClassId::new(1), ClassId::new(2)];
        let margins = MarginMatrix::from_scores(Array2::zeros((2, 5)), &labels, &delta);
        let hp = Hyperparams::new(0.1, 0.0).unwrap();
        let costs = sample_costs(&margins, &labels, &delta, &split, &hp).unwrap();
        // Delta(y, .) vanishes on the two seen classes.
        for l in &costs.l {
            assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
        }
        // beta = 0: unseen columns do not matter
        let mut scores = Array2::zeros((2, 5));
        scores[[0, 3]] = 9.0;
        scores[[1, 4]] = -4.0;
        let moved = sample_costs(&MarginMatrix::from_scores(scores, &labels, &delta), &labels, &delta, &split, &hp).unwrap();
        assert_eq!(moved.l, costs.l);
    }

    #[test]
    fn total_objective_direct_substitution() {
        let costs = SampleCosts {
            l: vec![1.0, 2.5, 0.5],
            cov: vec![0.0; 3],
            scr: vec![std::f64::consts::LN_2; 3],
        };
        let pace = PaceParams::geometric(2.0, 0.5, 10.0, 1.5).unwrap();
        let hp = Hyperparams::new(0.3, 0.0).unwrap();
        let g1 = -0.5 * (1.0f64 + 0.5 / 2.0).ln();
        let value = total_objective(&costs, &[1.0; 3], &pace, &[], &hp);
        assert!((value - (4.0 + 3.0 * g1)).abs() < 1e-12);
        let with_w = total_objective(&costs, &[1.0; 3], &pace, &[0.0], &hp);
        assert_eq!(value, with_w);
    }
}
