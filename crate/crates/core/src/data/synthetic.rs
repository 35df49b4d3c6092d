//! Synthetic zero-shot data: `x = A phi(y) + noise` with a fixed random linear map `A`.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ClassId, ClassSplit, Dataset, LabelEmbeddings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub seen: usize,
    pub embed_dim: usize,
    /// Rank of the class-embedding matrix; values `>= embed_dim` give full-rank embeddings.
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub samples_per_class: usize,
    pub noise_scale: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 15,
            seen: 10,
            embed_dim: 16,
            latent_dim: 8,
            feature_dim: 16,
            samples_per_class: 60,
            noise_scale: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Samples of the seen classes.
    pub train: Dataset,
    /// Samples of the unseen classes.
    pub test: Dataset,
    pub embeddings: LabelEmbeddings,
    pub split: ClassSplit,
    /// The m x d generating map.
    pub feature_map: Array2<f64>,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.seen < 2 || self.seen >= self.classes {
            return Err(Error::InvalidInput(format!(
                "need 2 <= seen < classes, got seen = {}, classes = {}",
                self.seen, self.classes
            )));
        }
        if self.embed_dim == 0 || self.latent_dim == 0 || self.feature_dim == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidInput("dimensions and samples per class must be positive".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid noise scale {}", self.noise_scale)));
        }
        Ok(())
    }
}

/// Generates seen-class training data, unseen-class test data and unit-sphere
/// class embeddings. Classes `1..=seen` are seen, the rest unseen.
///
/// With `latent_dim < seen` the seen embeddings span the embedding subspace,
/// so every feature direction an unseen class uses also occurs in training.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };

    let (c, d, m) = (spec.classes, spec.embed_dim, spec.feature_dim);
    let mut phi = if spec.latent_dim >= d {
        Array2::from_shape_simple_fn((c, d), &mut gauss)
    } else {
        let z = Array2::from_shape_simple_fn((c, spec.latent_dim), &mut gauss);
        let basis = Array2::from_shape_simple_fn((spec.latent_dim, d), &mut gauss);
        z.dot(&basis)
    };
    for mut row in phi.rows_mut() {
        let norm = row.dot(&row).sqrt();
        row /= norm;
    }
    let scale = 1.0 / (d as f64).sqrt();
    let map = Array2::from_shape_simple_fn((m, d), || gauss() * scale);

    let mut draw = |classes: std::ops::RangeInclusive<usize>| {
        let n = classes.clone().count() * spec.samples_per_class;
        let mut x = Array2::<f64>::zeros((n, m));
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for k in classes {
            let class = ClassId::new(k);
            let mean: Array1<f64> = map.dot(&phi.row(class.index()));
            for _ in 0..spec.samples_per_class {
                for j in 0..m {
                    x[[row, j]] = mean[j] + spec.noise_scale * gauss();
                }
                labels.push(class);
                row += 1;
            }
        }
        (x, labels)
    };
    let (train_x, train_y) = draw(1..=spec.seen);
    let (test_x, test_y) = draw(spec.seen + 1..=c);

    Ok(SyntheticData {
        train: Dataset::new(train_x, train_y, c)?,
        test: Dataset::new(test_x, test_y, c)?,
        embeddings: LabelEmbeddings::new(phi)?,
        split: ClassSplit::leading(spec.seen, c)?,
        feature_map: map,
    })
}
