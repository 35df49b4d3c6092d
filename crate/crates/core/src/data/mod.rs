//! Datasets, label embeddings, class splits and semantic divergences.
//!
//! Class identifiers are 1-based throughout the library API ([`ClassId`]);
//! files on disk store 0-based indices and the conversion happens only in
//! [`io`].

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;
pub mod synthetic;

pub use io::{load_dataset, save_dataset, DatasetBundle};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

/// A class label in `1..=C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(usize);

impl ClassId {
    /// Builds a class id from its 1-based value.
    ///
    /// Panics on 0.
    pub fn new(one_based: usize) -> Self {
        assert!(one_based >= 1, "class ids are 1-based");
        ClassId(one_based)
    }

    /// Builds a class id from a 0-based row index.
    pub fn from_index(index: usize) -> Self {
        ClassId(index + 1)
    }

    /// 0-based row index into embedding and divergence matrices.
    #[inline]
    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Feature matrix (N x m) with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<ClassId>,
}

impl Dataset {
    /// Validates shape, finiteness and that every label lies in `1..=class_count`.
    pub fn new(features: Array2<f64>, labels: Vec<ClassId>, class_count: usize) -> Result<Self> {
        let (n, m) = features.dim();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset must have at least one sample and one feature, got {n}x{m}"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} feature rows",
                labels.len(),
                n
            )));
        }
        if let Some(((i, j), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at sample {i}, column {j}"
            )));
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, y)| y.get() > class_count) {
            return Err(Error::InvalidInput(format!(
                "label {y} of sample {i} exceeds class count {class_count}"
            )));
        }
        Ok(Dataset { features, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn sample(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Fails unless every label belongs to `allowed`.
    pub fn check_labels_in(&self, allowed: &[ClassId]) -> Result<()> {
        match self.labels.iter().enumerate().find(|(_, y)| !allowed.contains(y)) {
            Some((i, y)) => Err(Error::InvalidInput(format!(
                "sample {i} has label {y}, which is not among the permitted classes"
            ))),
            None => Ok(()),
        }
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Class embedding matrix (C x d), row `r.index()` is the embedding of class `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbeddings {
    matrix: Array2<f64>,
}

impl LabelEmbeddings {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (c, d) = matrix.dim();
        if c < 2 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "label embeddings need at least 2 classes and 1 dimension, got {c}x{d}"
            )));
        }
        for (r, row) in matrix.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite embedding for class index {r}")));
            }
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidInput(format!("all-zero embedding for class index {r}")));
            }
        }
        Ok(LabelEmbeddings { matrix })
    }

    pub fn class_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn embed_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn get(&self, class: ClassId) -> ArrayView1<'_, f64> {
        self.matrix.row(class.index())
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }
}

/// Disjoint seen (training) and unseen (target) class sets covering `1..=C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSplit {
    seen: Vec<ClassId>,
    unseen: Vec<ClassId>,
    // seen_mask[r.index()] is true for r in the seen set
    seen_mask: Vec<bool>,
}

impl ClassSplit {
    pub fn new(mut seen: Vec<ClassId>, mut unseen: Vec<ClassId>, class_count: usize) -> Result<Self> {
        seen.sort_unstable();
        unseen.sort_unstable();
        if seen.is_empty() || unseen.is_empty() {
            return Err(Error::InvalidInput("seen and unseen class sets must both be nonempty".into()));
        }
        let mut owner = vec![0u8; class_count];
        for (set, tag) in [(&seen, 1u8), (&unseen, 2u8)] {
            for c in set.iter() {
                if c.get() > class_count {
                    return Err(Error::InvalidInput(format!(
                        "class {c} exceeds class count {class_count}"
                    )));
                }
                if owner[c.index()] != 0 {
                    return Err(Error::InvalidInput(format!(
                        "class {c} appears twice in the split"
                    )));
                }
                owner[c.index()] = tag;
            }
        }
        if let Some(r) = owner.iter().position(|&o| o == 0) {
            return Err(Error::InvalidInput(format!(
                "class {} is neither seen nor unseen",
                ClassId::from_index(r)
            )));
        }
        let seen_mask = owner.iter().map(|&o| o == 1).collect();
        Ok(ClassSplit {
            seen,
            unseen,
            seen_mask,
        })
    }

    /// Seen classes `1..=seen_count`, unseen the rest.
    pub fn leading(seen_count: usize, class_count: usize) -> Result<Self> {
        let seen = (1..=seen_count).map(ClassId::new).collect();
        let unseen = (seen_count + 1..=class_count).map(ClassId::new).collect();
        ClassSplit::new(seen, unseen, class_count)
    }

    pub fn seen(&self) -> &[ClassId] {
        &self.seen
    }

    pub fn unseen(&self) -> &[ClassId] {
        &self.unseen
    }

    pub fn class_count(&self) -> usize {
        self.seen_mask.len()
    }

    pub fn is_seen(&self, class: ClassId) -> bool {
        self.seen_mask[class.index()]
    }
}

/// Symmetric C x C matrix of pairwise label divergences in `[0, 1]` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceMatrix {
    matrix: Array2<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl DivergenceMatrix {
    pub fn new(matrix: Array2<f64>) -> Result<Self> {
        let (c, c2) = matrix.dim();
        if c != c2 || c < 2 {
            return Err(Error::DimensionMismatch(format!(
                "divergence matrix must be square with at least 2 classes, got {c}x{c2}"
            )));
        }
        for ((a, b), &v) in matrix.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!(
                    "divergence at row {a}, column {b} is {v}, outside [0, 1]"
                )));
            }
            if a == b && v != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal divergence at row {a}")));
            }
            if (v - matrix[[b, a]]).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidInput(format!(
                    "divergence matrix not symmetric at row {a}, column {b}"
                )));
            }
        }
        Ok(DivergenceMatrix { matrix })
    }

    #[inline]
    pub fn get(&self, a: ClassId, b: ClassId) -> f64 {
        self.matrix[[a.index(), b.index()]]
    }

    pub fn class_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }
}

/// Normalized cosine divergence between label embeddings.
///
/// `(1 - cos(a, b)) / (1 - min cos)` where the minimum runs over all class
/// pairs, so the most dissimilar pair sits at exactly 1.
pub fn cosine_divergence(embeddings: &LabelEmbeddings) -> Result<DivergenceMatrix> {
    let e = embeddings.matrix();
    let c = e.nrows();
    let norms: Array1<f64> = e.rows().into_iter().map(|row| row.dot(&row).sqrt()).collect();
    let mut cos = Array2::<f64>::ones((c, c));
    let mut min_cos = f64::INFINITY;
    for a in 0..c {
        for b in a + 1..c {
            let v = e.row(a).dot(&e.row(b)) / (norms[a] * norms[b]);
            cos[[a, b]] = v;
            cos[[b, a]] = v;
            min_cos = min_cos.min(v);
        }
    }
    let denom = 1.0 - min_cos;
    if !(denom > 1e-12) {
        return Err(Error::DegenerateEmbedding);
    }
    let mut delta = Array2::<f64>::zeros((c, c));
    for a in 0..c {
        for b in a + 1..c {
            let v = ((1.0 - cos[[a, b]]) / denom).clamp(0.0, 1.0);
            delta[[a, b]] = v;
            delta[[b, a]] = v;
        }
    }
    DivergenceMatrix::new(delta)
}

/// Divergence from shortest-path lengths in a label hierarchy: `1 - 1 / (len + 1)`.
pub fn path_divergence(path_lengths: &Array2<i64>) -> Result<DivergenceMatrix> {
    let (c, c2) = path_lengths.dim();
    if c != c2 {
        return Err(Error::InvalidPathMatrix(format!("matrix is {c}x{c2}, not square")));
    }
    for ((a, b), &len) in path_lengths.indexed_iter() {
        if len < 0 {
            return Err(Error::InvalidPathMatrix(format!(
                "negative path length {len} at row {a}, column {b}"
            )));
        }
        if len != path_lengths[[b, a]] {
            return Err(Error::InvalidPathMatrix(format!("asymmetric at row {a}, column {b}")));
        }
        if a == b && len != 0 {
            return Err(Error::InvalidPathMatrix(format!("nonzero diagonal at row {a}")));
        }
    }
    DivergenceMatrix::new(path_lengths.mapv(|len| 1.0 - 1.0 / (len as f64 + 1.0)))
}

/// How the validation set is carved out of the seen-class training pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HoldoutMode {
    /// Stratified per-class sample holdout.
    #[default]
    Samples,
    /// Whole seen classes are held out and treated as unseen during training.
    Classes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holdout {
    pub fraction: f64,
    pub mode: HoldoutMode,
}

impl Default for Holdout {
    fn default() -> Self {
        Holdout {
            fraction: 0.2,
            mode: HoldoutMode::Samples,
        }
    }
}

/// Training / validation partition of a seen-class pool.
#[derive(Debug, Clone)]
pub struct Partition {
    pub train: Dataset,
    pub validation: Dataset,
    /// Class split used by the training objective.
    pub train_split: ClassSplit,
    /// Classes the validation error is computed over.
    pub validation_candidates: Vec<ClassId>,
}

/// Splits `data` into training and validation parts, deterministically in `seed`.
pub fn partition(data: &Dataset, split: &ClassSplit, holdout: &Holdout, seed: u64) -> Result<Partition> {
    if !(holdout.fraction > 0.0 && holdout.fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "validation fraction must lie in (0, 1), got {}",
            holdout.fraction
        )));
    }
    data.check_labels_in(split.seen())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class: Vec<Vec<usize>> = split
        .seen()
        .iter()
        .map(|&c| (0..data.n_samples()).filter(|&i| data.labels()[i] == c).collect())
        .collect();

    match holdout.mode {
        HoldoutMode::Samples => {
            let mut train_idx = Vec::new();
            let mut val_idx = Vec::new();
            for mut members in by_class {
                members.shuffle(&mut rng);
                let n_val = if members.len() >= 2 {
                    ((members.len() as f64 * holdout.fraction).round() as usize).clamp(1, members.len() - 1)
                } else {
                    0
                };
                val_idx.extend_from_slice(&members[..n_val]);
                train_idx.extend_from_slice(&members[n_val..]);
            }
            train_idx.sort_unstable();
            val_idx.sort_unstable();
            if val_idx.is_empty() {
                return Err(Error::InvalidInput("validation partition is empty".into()));
            }
            Ok(Partition {
                train: data.subset(&train_idx),
                validation: data.subset(&val_idx),
                train_split: split.clone(),
                validation_candidates: split.seen().to_vec(),
            })
        }
        HoldoutMode::Classes => {
            let cs = split.seen().len();
            let n_held = ((cs as f64 * holdout.fraction).round() as usize).max(2);
            if n_held + 2 > cs {
                return Err(Error::InvalidInput(format!(
                    "class holdout needs at least 2 held-out and 2 remaining seen classes, have {cs} seen"
                )));
            }
            let mut classes = split.seen().to_vec();
            classes.shuffle(&mut rng);
            let mut held: Vec<ClassId> = classes[..n_held].to_vec();
            held.sort_unstable();
            let kept: Vec<ClassId> = split.seen().iter().copied().filter(|c| !held.contains(c)).collect();
            let mut unseen = split.unseen().to_vec();
            unseen.extend_from_slice(&held);
            let (val_idx, train_idx): (Vec<usize>, Vec<usize>) =
                (0..data.n_samples()).partition(|&i| held.contains(&data.labels()[i]));
            if val_idx.is_empty() || train_idx.is_empty() {
                return Err(Error::InvalidInput("class holdout produced an empty partition".into()));
            }
            Ok(Partition {
                train: data.subset(&train_idx),
                validation: data.subset(&val_idx),
                train_split: ClassSplit::new(kept, unseen, split.class_count())?,
                validation_candidates: held,
            })
        }
    }
}
