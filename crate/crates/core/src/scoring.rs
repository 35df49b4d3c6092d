//! Rank-one bilinear weak models, the weighted ensemble score and margins.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{ClassId, Dataset, DivergenceMatrix, LabelEmbeddings};
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-10;

/// `h(x, r) = (x . u) (v . phi(r))` with unit `u` and `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakModel {
    u: Array1<f64>,
    v: Array1<f64>,
}

impl WeakModel {
    pub fn new(u: Array1<f64>, v: Array1<f64>) -> Result<Self> {
        for (name, vec) in [("u", &u), ("v", &v)] {
            let norm = vec.dot(vec).sqrt();
            if !((norm - 1.0).abs() <= UNIT_TOL) {
                return Err(Error::InvalidInput(format!("weak model {name} has norm {norm}, expected 1")));
            }
        }
        Ok(WeakModel { u, v })
    }

    /// Normalizes both factors; `None` if either is zero or non-finite.
    pub fn normalized(u: Array1<f64>, v: Array1<f64>) -> Option<Self> {
        let nu = u.dot(&u).sqrt();
        let nv = v.dot(&v).sqrt();
        if !(nu > 0.0 && nv > 0.0 && nu.is_finite() && nv.is_finite()) {
            return None;
        }
        Some(WeakModel { u: u / nu, v: v / nv })
    }

    pub fn u(&self) -> ArrayView1<'_, f64> {
        self.u.view()
    }

    pub fn v(&self) -> ArrayView1<'_, f64> {
        self.v.view()
    }
}

pub fn weak_score(h: &WeakModel, x: ArrayView1<'_, f64>, r: ClassId, embeddings: &LabelEmbeddings) -> f64 {
    x.dot(&h.u) * h.v.dot(&embeddings.get(r))
}

/// Weighted sum of weak models, `F(x, r) = sum_j w_j h_j(x, r)`, with `w >= 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ensemble {
    models: Vec<WeakModel>,
    weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(models: Vec<WeakModel>, weights: Vec<f64>) -> Result<Self> {
        if models.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weak models but {} weights",
                models.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("ensemble weight {w} is not a finite non-negative value")));
        }
        if let Some(first) = models.first() {
            let (m, d) = (first.u.len(), first.v.len());
            if models.iter().any(|h| h.u.len() != m || h.v.len() != d) {
                return Err(Error::DimensionMismatch("weak models disagree on dimensions".into()));
            }
        }
        Ok(Ensemble { models, weights })
    }

    pub fn empty() -> Self {
        Ensemble::default()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn models(&self) -> &[WeakModel] {
        &self.models
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn push(&mut self, model: WeakModel, weight: f64) -> Result<()> {
        let mut models = std::mem::take(&mut self.models);
        let mut weights = std::mem::take(&mut self.weights);
        models.push(model);
        weights.push(weight);
        *self = Ensemble::new(models, weights)?;
        Ok(())
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Ensemble::new(self.models.clone(), weights)
    }

    /// First `k` models with the supplied weights.
    pub fn truncated(&self, k: usize, weights: Vec<f64>) -> Result<Self> {
        Ensemble::new(self.models[..k].to_vec(), weights)
    }

    pub fn save(&self, path: impl AsRef<Path>, feature_dim: usize, embed_dim: usize) -> Result<()> {
        let file = ModelFile {
            weights: self.weights.clone(),
            models: self
                .models
                .iter()
                .map(|h| ModelEntry {
                    u: h.u.to_vec(),
                    v: h.v.to_vec(),
                })
                .collect(),
            feature_dim,
            embed_dim,
        };
        crate::data::io::write_json(path.as_ref(), &file)
    }

    /// Reads `model.json`; returns the ensemble with its (feature_dim, embed_dim).
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, usize, usize)> {
        let file: ModelFile = crate::data::io::read_json(path.as_ref())?;
        let mut models = Vec::with_capacity(file.models.len());
        for entry in file.models {
            if entry.u.len() != file.feature_dim || entry.v.len() != file.embed_dim {
                return Err(Error::DimensionMismatch(format!(
                    "{}: weak model dimensions ({}, {}) differ from header ({}, {})",
                    path.as_ref().display(),
                    entry.u.len(),
                    entry.v.len(),
                    file.feature_dim,
                    file.embed_dim
                )));
            }
            models.push(WeakModel::new(Array1::from(entry.u), Array1::from(entry.v))?);
        }
        Ok((Ensemble::new(models, file.weights)?, file.feature_dim, file.embed_dim))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    u: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    weights: Vec<f64>,
    models: Vec<ModelEntry>,
    feature_dim: usize,
    embed_dim: usize,
}

pub fn ensemble_score(ens: &Ensemble, x: ArrayView1<'_, f64>, r: ClassId, embeddings: &LabelEmbeddings) -> f64 {
    ens.models
        .iter()
        .zip(&ens.weights)
        .map(|(h, w)| w * weak_score(h, x, r, embeddings))
        .sum()
}

/// Factored weak scores of a fixed model list on a fixed sample set:
/// `h_j(x_i, r) = sample_proj[i, j] * class_proj[r, j]`.
#[derive(Debug, Clone)]
pub struct WeakBasis {
    sample_proj: Array2<f64>,
    class_proj: Array2<f64>,
}

impl WeakBasis {
    pub fn new(features: ArrayView2<'_, f64>, embeddings: &LabelEmbeddings) -> Self {
        WeakBasis {
            sample_proj: Array2::zeros((features.nrows(), 0)),
            class_proj: Array2::zeros((embeddings.class_count(), 0)),
        }
    }

    pub fn from_models(models: &[WeakModel], features: ArrayView2<'_, f64>, embeddings: &LabelEmbeddings) -> Self {
        let mut basis = WeakBasis::new(features, embeddings);
        for h in models {
            basis.push(h, features, embeddings);
        }
        basis
    }

    pub fn push(&mut self, h: &WeakModel, features: ArrayView2<'_, f64>, embeddings: &LabelEmbeddings) {
        let a = features.dot(&h.u);
        let b = embeddings.matrix().dot(&h.v);
        self.sample_proj
            .push_column(a.view())
            .expect("sample count fixed at construction");
        self.class_proj
            .push_column(b.view())
            .expect("class count fixed at construction");
    }

    pub fn len(&self) -> usize {
        self.sample_proj.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_samples(&self) -> usize {
        self.sample_proj.nrows()
    }

    pub fn sample_proj(&self) -> ArrayView2<'_, f64> {
        self.sample_proj.view()
    }

    pub fn class_proj(&self) -> ArrayView2<'_, f64> {
        self.class_proj.view()
    }

    /// `h_j(x_i, r)`.
    #[inline]
    pub fn value(&self, j: usize, i: usize, r: ClassId) -> f64 {
        self.sample_proj[[i, j]] * self.class_proj[[r.index(), j]]
    }

    /// N x C raw scores `F(x_i, r)` for weights `w` (length K).
    pub fn scores(&self, w: &[f64]) -> Array2<f64> {
        assert_eq!(w.len(), self.len(), "weight vector length must match the basis");
        let mut weighted = self.sample_proj.clone();
        for (mut col, &wj) in weighted.axis_iter_mut(Axis(1)).zip(w) {
            col *= wj;
        }
        weighted.dot(&self.class_proj.t())
    }
}

/// Raw scores `F(x_i, r)` and margins `rho_ir = F(x_i, r) - F(x_i, y_i) + Delta(y_i, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginMatrix {
    scores: Array2<f64>,
    rho: Array2<f64>,
}

impl MarginMatrix {
    pub fn from_scores(scores: Array2<f64>, labels: &[ClassId], delta: &DivergenceMatrix) -> Self {
        let mut rho = scores.clone();
        let d = delta.matrix();
        for (i, (mut row, y)) in rho.rows_mut().into_iter().zip(labels).enumerate() {
            let own = scores[[i, y.index()]];
            for (r, v) in row.iter_mut().enumerate() {
                *v = *v - own + d[[y.index(), r]];
            }
        }
        MarginMatrix { scores, rho }
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn rho(&self) -> ArrayView2<'_, f64> {
        self.rho.view()
    }

    pub fn n_samples(&self) -> usize {
        self.rho.nrows()
    }
}

pub fn compute_margins(
    ens: &Ensemble,
    data: &Dataset,
    embeddings: &LabelEmbeddings,
    delta: &DivergenceMatrix,
) -> MarginMatrix {
    let basis = WeakBasis::from_models(ens.models(), data.features(), embeddings);
    MarginMatrix::from_scores(basis.scores(ens.weights()), data.labels(), delta)
}

/// Highest-scoring candidate; ties go to the smallest class id.
pub fn argmax_class(scores: ArrayView1<'_, f64>, candidates: &[ClassId]) -> ClassId {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    let mut best = *sorted.first().expect("candidate set must be nonempty");
    let mut best_score = scores[best.index()];
    for &c in &sorted[1..] {
        let s = scores[c.index()];
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best
}

pub fn predict(
    ens: &Ensemble,
    x: ArrayView1<'_, f64>,
    embeddings: &LabelEmbeddings,
    candidates: &[ClassId],
) -> ClassId {
    let scores: Array1<f64> = (0..embeddings.class_count())
        .map(|r| {
            let r = ClassId::from_index(r);
            if candidates.contains(&r) {
                ensemble_score(ens, x, r, embeddings)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    argmax_class(scores.view(), candidates)
}
