use ndarray::{Array2, ArrayView2};

use crate::data::{ClassId, ClassSplit, DivergenceMatrix};
use crate::error::{Error, Result};
use crate::objective::{sigmoid, Hyperparams, SampleCosts};
use crate::scoring::MarginMatrix;

/// Lagrange multipliers of the margin constraints, one per (sample, class).
#[derive(Debug, Clone, PartialEq)]
pub struct DualMatrix {
    q: Array2<f64>,
}

impl DualMatrix {
    pub fn from_matrix(q: Array2<f64>) -> Self {
        DualMatrix { q }
    }

    /// `Q = s 1_C^T`, the starting point before any weak model exists.
    pub fn initial(s: &[f64], class_count: usize) -> Self {
        DualMatrix {
            q: Array2::from_shape_fn((s.len(), class_count), |(i, _)| s[i]),
        }
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    #[inline]
    pub fn get(&self, i: usize, r: ClassId) -> f64 {
        self.q[[i, r.index()]]
    }
}

/// Dual matrix at the primal point described by `margins`, `costs` and `s`.
///
/// Seen classes: `s_i sigmoid(rho_ir)`. Unseen classes:
/// `(Delta(y_i, r) - mean_t Delta(y_i, .)) / |Y_T| * beta s_i sigmoid(cov_i)`.
pub fn compute_q(
    margins: &MarginMatrix,
    costs: &SampleCosts,
    s: &[f64],
    delta: &DivergenceMatrix,
    labels: &[ClassId],
    split: &ClassSplit,
    hp: &Hyperparams,
) -> Result<DualMatrix> {
    let t = split.unseen().len();
    if t < 2 {
        return Err(Error::DegenerateTargetSet(t));
    }
    let n = margins.n_samples();
    assert!(costs.len() == n && s.len() == n && labels.len() == n, "per-sample inputs must align");
    let rho = margins.rho();
    let mut q = Array2::<f64>::zeros(rho.dim());
    for i in 0..n {
        let y = labels[i];
        for &r in split.seen() {
            q[[i, r.index()]] = s[i] * sigmoid(rho[[i, r.index()]]);
        }
        let mean_delta = split.unseen().iter().map(|&r| delta.get(y, r)).sum::<f64>() / t as f64;
        let scale = hp.beta * s[i] * sigmoid(costs.cov[i]) / t as f64;
        for &r in split.unseen() {
            q[[i, r.index()]] = (delta.get(y, r) - mean_delta) * scale;
        }
    }
    Ok(DualMatrix { q })
}
