use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DualMatrix;
use crate::data::{Dataset, LabelEmbeddings};
use crate::scoring::WeakModel;

const POWER_SEED: u64 = 0x5eed_b005;
const POWER_MAX_ITERS: usize = 100_000;

/// `M = sum_{i,r} Q_ir x_i (phi(y_i) - phi(r))^T`, an m x d matrix.
pub fn weak_learner_matrix(q: &DualMatrix, data: &Dataset, embeddings: &LabelEmbeddings) -> Array2<f64> {
    let q = q.matrix();
    let phi = embeddings.matrix();
    // row i: (sum_r Q_ir) phi(y_i) - sum_r Q_ir phi(r)
    let mut coef = q.dot(&phi);
    coef.mapv_inplace(|v| -v);
    for (i, y) in data.labels().iter().enumerate() {
        let qsum: f64 = q.row(i).sum();
        coef.row_mut(i).scaled_add(qsum, &phi.row(y.index()));
    }
    data.features().t().dot(&coef)
}

#[derive(Debug, Clone)]
pub struct TopSingular {
    pub u: Array1<f64>,
    pub v: Array1<f64>,
    pub sigma: f64,
    pub iterations: usize,
}

/// Leading singular triplet by power iteration on `M^T M`.
///
/// Starts from a fixed-seed Gaussian vector and stops once the eigen-residual
/// `||B v - (v^T B v) v||` falls below `tol` times the Rayleigh quotient.
/// The sign is fixed so that the largest-magnitude entry of `v` is positive;
/// `u^T M v = sigma >= 0` always holds. Returns `None` for a zero matrix.
pub fn top_singular_pair(m: ArrayView2<'_, f64>, tol: f64) -> Option<TopSingular> {
    if m.iter().all(|&x| x == 0.0) {
        return None;
    }
    let b = m.t().dot(&m);
    let d = b.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    v /= v.dot(&v).sqrt();

    let mut iterations = 0;
    for _ in 0..POWER_MAX_ITERS {
        iterations += 1;
        let bv = b.dot(&v);
        let lambda = v.dot(&bv);
        let norm = bv.dot(&bv).sqrt();
        if norm == 0.0 {
            return None;
        }
        let residual = &bv - &(lambda * &v);
        v = bv / norm;
        if residual.dot(&residual).sqrt() <= tol * lambda {
            break;
        }
    }

    let pivot = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.mapv_inplace(|x| -x);
    }
    let mv = m.dot(&v);
    let sigma = mv.dot(&mv).sqrt();
    if sigma == 0.0 {
        return None;
    }
    Some(TopSingular {
        u: mv / sigma,
        v,
        sigma,
        iterations,
    })
}

/// Rank-one model maximizing the dual-constraint violation under `q`.
///
/// `None` when the accumulated matrix is exactly zero.
pub fn learn_weak_model(
    q: &DualMatrix,
    data: &Dataset,
    embeddings: &LabelEmbeddings,
    power_tol: f64,
) -> Option<WeakModel> {
    let m = weak_learner_matrix(q, data, embeddings);
    let top = top_singular_pair(m.view(), power_tol)?;
    WeakModel::normalized(top.u, top.v)
}

/// `sum_{i,r} Q_ir (h(x_i, y_i) - h(x_i, r))`, evaluated directly.
pub fn violation_score(h: &WeakModel, q: &DualMatrix, data: &Dataset, embeddings: &LabelEmbeddings) -> f64 {
    let class_side: Array1<f64> = embeddings.matrix().dot(&h.v());
    let qm = q.matrix();
    let mut total = 0.0;
    for (i, y) in data.labels().iter().enumerate() {
        let xu = data.sample(i).dot(&h.u());
        let own = class_side[y.index()];
        let row: f64 = qm
            .row(i)
            .iter()
            .zip(class_side.iter())
            .map(|(q_ir, c_r)| q_ir * (own - c_r))
            .sum();
        total += xu * row;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassId;
    use ndarray::array;

    #[test]
    fn rank_one_matrix_recovered_exactly() {
        let x = array![[3.0, 0.0, 4.0]];
        let data = Dataset::new(x, vec![ClassId::new(1)], 3).unwrap();
        let e = LabelEmbeddings::new(array![[1.0, 2.0], [0.0, -1.0], [2.0, 2.0]]).unwrap();
        let mut q = Array2::zeros((1, 3));
        q[[0, 1]] = 0.7;
        let q = DualMatrix::from_matrix(q);
        let h = learn_weak_model(&q, &data, &e, 1e-12).unwrap();
        // x / |x| = (0.6, 0, 0.8); phi(1) - phi(2) = (1, 3)
        let diff = array![1.0, 3.0] / 10f64.sqrt();
        assert!((h.u()[0].abs() - 0.6).abs() < 1e-12 && (h.u()[2].abs() - 0.8).abs() < 1e-12);
        assert!((h.v()[0].abs() - diff[0]).abs() < 1e-12 && (h.v()[1].abs() - diff[1]).abs() < 1e-12);
        let expected = 5.0 * 10f64.sqrt() * 0.7;
        assert!((violation_score(&h, &q, &data, &e) - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_dual_gives_no_model() {
        let data = Dataset::new(array![[1.0, 2.0]], vec![ClassId::new(1)], 2).unwrap();
        let e = LabelEmbeddings::new(array![[1.0], [2.0]]).unwrap();
        let q = DualMatrix::from_matrix(Array2::zeros((1, 2)));
        assert!(learn_weak_model(&q, &data, &e, 1e-10).is_none());
        let h = WeakModel::new(array![1.0, 0.0], array![1.0]).unwrap();
        assert_eq!(violation_score(&h, &q, &data, &e), 0.0);
    }

    #[test]
    fn sign_convention_gives_nonnegative_value() {
        let m = array![[-2.0, 0.1], [0.3, -1.0], [0.5, 0.5]];
        let top = top_singular_pair(m.view(), 1e-12).unwrap();
        let value = top.u.dot(&m.dot(&top.v));
        assert!(value > 0.0);
        assert!((value - top.sigma).abs() < 1e-12);
        let pivot = top.v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        assert!(pivot > 0.0);
    }
}
