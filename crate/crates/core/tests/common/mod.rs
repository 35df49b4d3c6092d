#![allow(dead_code)]

use bzscr::boosting::{DualMatrix, WeightProblem};
use bzscr::data::{cosine_divergence, ClassId, ClassSplit, Dataset, DivergenceMatrix, LabelEmbeddings};
use bzscr::objective::Hyperparams;
use bzscr::scoring::{WeakBasis, WeakModel};
use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let v: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.dot(&v).sqrt();
    v / norm
}

pub fn random_model(rng: &mut ChaCha8Rng, m: usize, d: usize) -> WeakModel {
    WeakModel::new(unit_vector(rng, m), unit_vector(rng, d)).unwrap()
}

/// A small random problem: data, embeddings, split, cosine divergences,
/// a weak-model basis, weights and sample weights.
pub struct Toy {
    pub data: Dataset,
    pub embeddings: LabelEmbeddings,
    pub split: ClassSplit,
    pub delta: DivergenceMatrix,
    pub models: Vec<WeakModel>,
    pub basis: WeakBasis,
    pub w: Vec<f64>,
    pub s: Vec<f64>,
    pub hp: Hyperparams,
}

impl Toy {
    pub fn problem(&self) -> WeightProblem<'_> {
        WeightProblem {
            basis: &self.basis,
            labels: self.data.labels(),
            delta: &self.delta,
            split: &self.split,
            s: &self.s,
            hp: self.hp,
        }
    }
}

pub struct ToyShape {
    pub n: usize,
    pub classes: usize,
    pub unseen: usize,
    pub m: usize,
    pub d: usize,
    pub k: usize,
}

/// Random shape with `N <= 20`, `C <= 8`, `K <= 4` and at least two seen and two unseen classes.
pub fn random_shape(rng: &mut ChaCha8Rng) -> ToyShape {
    let classes = rng.random_range(4..=8);
    ToyShape {
        n: rng.random_range(2..=20),
        classes,
        unseen: rng.random_range(2..=classes - 2),
        m: rng.random_range(2..=6),
        d: rng.random_range(2..=5),
        k: rng.random_range(1..=4),
    }
}

pub fn toy(rng: &mut ChaCha8Rng, shape: &ToyShape, nu: f64, beta: f64) -> Toy {
    let seen = shape.classes - shape.unseen;
    let features = gaussian_matrix(rng, shape.n, shape.m);
    let labels: Vec<ClassId> = (0..shape.n).map(|_| ClassId::new(rng.random_range(1..=seen))).collect();
    let data = Dataset::new(features, labels, shape.classes).unwrap();
    let embeddings = LabelEmbeddings::new(gaussian_matrix(rng, shape.classes, shape.d)).unwrap();
    let delta = cosine_divergence(&embeddings).unwrap();
    let split = ClassSplit::leading(seen, shape.classes).unwrap();
    let models: Vec<WeakModel> = (0..shape.k).map(|_| random_model(rng, shape.m, shape.d)).collect();
    let basis = WeakBasis::from_models(&models, data.features(), &embeddings);
    let w = (0..shape.k).map(|_| rng.random_range(0.05..1.5)).collect();
    let s = (0..shape.n).map(|_| rng.random_range(0.0..=1.0)).collect();
    Toy {
        data,
        embeddings,
        split,
        delta,
        models,
        basis,
        w,
        s,
        hp: Hyperparams::new(nu, beta).unwrap(),
    }
}

/// Central difference of `f` at `x` in coordinate `j`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[j] += h;
    minus[j] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

pub fn relative_error(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(got.abs()).max(floor)
}

/// Minimum of `f` over `[0, hi]^k` (k = 1 or 2) by repeatedly zoomed grids.
pub fn grid_minimum(f: impl Fn(&[f64]) -> f64, k: usize, hi: f64) -> (Vec<f64>, f64) {
    let points = if k == 1 { 2001 } else { 121 };
    let mut lo = vec![0.0; k];
    let mut width = vec![hi; k];
    let mut best = (vec![0.0; k], f64::INFINITY);
    for _ in 0..12 {
        let step: Vec<f64> = width.iter().map(|w| w / (points - 1) as f64).collect();
        let axis = |dim: usize, a: usize| lo[dim] + a as f64 * step[dim];
        if k == 1 {
            for a in 0..points {
                let x = [axis(0, a)];
                let v = f(&x);
                if v < best.1 {
                    best = (x.to_vec(), v);
                }
            }
        } else {
            for a in 0..points {
                for b in 0..points {
                    let x = [axis(0, a), axis(1, b)];
                    let v = f(&x);
                    if v < best.1 {
                        best = (x.to_vec(), v);
                    }
                }
            }
        }
        for dim in 0..k {
            lo[dim] = (best.0[dim] - 4.0 * step[dim]).max(0.0);
            width[dim] = 8.0 * step[dim];
        }
    }
    best
}

/// `sum_{i,r} Q_ir x_i (phi(y_i) - phi(r))^T` by brute force.
pub fn dense_m(t: &Toy, q: &DualMatrix) -> Array2<f64> {
    let (m, d) = (t.data.feature_dim(), t.embeddings.embed_dim());
    let mut out = Array2::zeros((m, d));
    for (i, &y) in t.data.labels().iter().enumerate() {
        for r in 0..t.embeddings.class_count() {
            let qr = q.matrix()[[i, r]];
            for a in 0..m {
                for b in 0..d {
                    out[[a, b]] += qr * t.data.sample(i)[a] * (t.embeddings.matrix()[[y.index(), b]] - t.embeddings.matrix()[[r, b]]);
                }
            }
        }
    }
    out
}

pub fn top_sigma(m: &Array2<f64>) -> f64 {
    let dm = DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| m[[a, b]]);
    dm.singular_values().iter().cloned().fold(0.0, f64::max)
}
