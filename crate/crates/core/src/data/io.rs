//! On-disk dataset layout.
//!
//! ```text
//! dir/
//!   features.csv     N x m, no header
//!   labels.csv       N rows, one 0-based class index each
//!   embeddings.csv   C x d
//!   split.json       {"seen": [..], "unseen": [..], "val_fraction": f, "val_mode": "samples"|"classes"}
//!   delta.csv        optional, C x C divergences
//!   spath.csv        optional, C x C integer path lengths
//!   test/features.csv, test/labels.csv   optional unseen-class evaluation set
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ClassId, ClassSplit, Dataset, DivergenceMatrix, Holdout, HoldoutMode, LabelEmbeddings};
use crate::error::{Error, LoadErrorKind, Result};

/// Everything a training or evaluation run reads from a data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    /// Seen-class training pool (validation is carved out of it).
    pub train: Dataset,
    pub test: Option<Dataset>,
    pub embeddings: LabelEmbeddings,
    pub split: ClassSplit,
    pub holdout: Holdout,
    pub delta: Option<DivergenceMatrix>,
    pub path_lengths: Option<Array2<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitFile {
    seen: Vec<usize>,
    unseen: Vec<usize>,
    val_fraction: f64,
    val_mode: HoldoutMode,
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, 0, LoadErrorKind::Parse, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::load(path, i + 1, LoadErrorKind::Parse, e.to_string()))?;
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

/// Reads a dense float matrix; `expect` pins (rows, cols) when known.
fn read_float_matrix(path: &Path, expect_rows: Option<usize>, expect_cols: Option<usize>) -> Result<Array2<f64>> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(Error::load(path, 0, LoadErrorKind::DimensionMismatch, "file has no rows"));
    }
    if let Some(n) = expect_rows {
        if rows.len() != n {
            return Err(Error::load(
                path,
                rows.len().min(n) + 1,
                LoadErrorKind::DimensionMismatch,
                format!("expected {n} rows, found {}", rows.len()),
            ));
        }
    }
    let cols = expect_cols.unwrap_or(rows[0].len());
    let mut data = Vec::with_capacity(rows.len() * cols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::load(
                path,
                i + 1,
                LoadErrorKind::DimensionMismatch,
                format!("expected {cols} columns, found {}", row.len()),
            ));
        }
        for (j, field) in row.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::load(path, i + 1, LoadErrorKind::Parse, format!("column {}: cannot parse {field:?}", j + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::load(
                    path,
                    i + 1,
                    LoadErrorKind::NonFinite,
                    format!("column {}: {field}", j + 1),
                ));
            }
            data.push(v);
        }
    }
    Ok(Array2::from_shape_vec((rows.len(), cols), data).expect("shape checked"))
}

fn read_labels(path: &Path, n: usize, allowed: &[ClassId], class_count: usize) -> Result<Vec<ClassId>> {
    let rows = read_rows(path)?;
    if rows.len() != n {
        return Err(Error::load(
            path,
            rows.len().min(n) + 1,
            LoadErrorKind::DimensionMismatch,
            format!("expected {n} labels to match the feature rows, found {}", rows.len()),
        ));
    }
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != 1 {
                return Err(Error::load(
                    path,
                    i + 1,
                    LoadErrorKind::DimensionMismatch,
                    format!("expected one label, found {} fields", row.len()),
                ));
            }
            let idx: usize = row[0]
                .parse()
                .map_err(|_| Error::load(path, i + 1, LoadErrorKind::Parse, format!("cannot parse label {:?}", row[0])))?;
            if idx >= class_count {
                return Err(Error::load(
                    path,
                    i + 1,
                    LoadErrorKind::OutOfRange,
                    format!("label {idx} outside 0..{class_count}"),
                ));
            }
            let class = ClassId::from_index(idx);
            if !allowed.contains(&class) {
                return Err(Error::load(
                    path,
                    i + 1,
                    LoadErrorKind::OutOfRange,
                    format!("label {idx} is not in the permitted class set for this file"),
                ));
            }
            Ok(class)
        })
        .collect()
}

fn read_split(path: &Path) -> Result<(ClassSplit, Holdout)> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: SplitFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let class_count = file.seen.len() + file.unseen.len();
    let to_ids = |v: &[usize]| v.iter().map(|&i| ClassId::from_index(i)).collect::<Vec<_>>();
    let split = ClassSplit::new(to_ids(&file.seen), to_ids(&file.unseen), class_count)
        .map_err(|e| Error::load(path, 0, LoadErrorKind::Invariant, e.to_string()))?;
    let holdout = Holdout {
        fraction: file.val_fraction,
        mode: file.val_mode,
    };
    if !(holdout.fraction > 0.0 && holdout.fraction < 1.0) {
        return Err(Error::load(
            path,
            0,
            LoadErrorKind::OutOfRange,
            format!("val_fraction {} outside (0, 1)", holdout.fraction),
        ));
    }
    Ok((split, holdout))
}

fn read_dataset(dir: &Path, allowed: &[ClassId], class_count: usize) -> Result<Dataset> {
    let fpath = dir.join("features.csv");
    let features = read_float_matrix(&fpath, None, None)?;
    let labels = read_labels(&dir.join("labels.csv"), features.nrows(), allowed, class_count)?;
    Dataset::new(features, labels, class_count)
        .map_err(|e| Error::load(fpath, 0, LoadErrorKind::Invariant, e.to_string()))
}

fn read_delta(path: &Path, c: usize) -> Result<DivergenceMatrix> {
    let m = read_float_matrix(path, Some(c), Some(c))?;
    for ((a, b), &v) in m.indexed_iter() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::load(
                path,
                a + 1,
                LoadErrorKind::OutOfRange,
                format!("column {}: divergence {v} outside [0, 1]", b + 1),
            ));
        }
    }
    DivergenceMatrix::new(m).map_err(|e| Error::load(path, 0, LoadErrorKind::Invariant, e.to_string()))
}

fn read_path_lengths(path: &Path, c: usize) -> Result<Array2<i64>> {
    let rows = read_rows(path)?;
    if rows.len() != c {
        return Err(Error::load(
            path,
            rows.len().min(c) + 1,
            LoadErrorKind::DimensionMismatch,
            format!("expected {c} rows, found {}", rows.len()),
        ));
    }
    let mut out = Array2::<i64>::zeros((c, c));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::load(
                path,
                i + 1,
                LoadErrorKind::DimensionMismatch,
                format!("expected {c} columns, found {}", row.len()),
            ));
        }
        for (j, field) in row.iter().enumerate() {
            out[[i, j]] = field.parse().map_err(|_| {
                Error::load(path, i + 1, LoadErrorKind::Parse, format!("column {}: cannot parse {field:?}", j + 1))
            })?;
        }
    }
    Ok(out)
}

/// Loads and validates a data directory.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let (split, holdout) = read_split(&dir.join("split.json"))?;
    let c = split.class_count();

    let epath = dir.join("embeddings.csv");
    let embeddings = LabelEmbeddings::new(read_float_matrix(&epath, Some(c), None)?)
        .map_err(|e| Error::load(&epath, 0, LoadErrorKind::Invariant, e.to_string()))?;

    let train = read_dataset(dir, split.seen(), c)?;
    let test_dir = dir.join("test");
    let test = if test_dir.join("features.csv").exists() {
        let test = read_dataset(&test_dir, split.unseen(), c)?;
        if test.feature_dim() != train.feature_dim() {
            return Err(Error::load(
                test_dir.join("features.csv"),
                1,
                LoadErrorKind::DimensionMismatch,
                format!("{} columns, training features have {}", test.feature_dim(), train.feature_dim()),
            ));
        }
        Some(test)
    } else {
        None
    };

    let dpath = dir.join("delta.csv");
    let delta = if dpath.exists() { Some(read_delta(&dpath, c)?) } else { None };
    let spath = dir.join("spath.csv");
    let path_lengths = if spath.exists() {
        Some(read_path_lengths(&spath, c)?)
    } else {
        None
    };

    Ok(DatasetBundle {
        train,
        test,
        embeddings,
        split,
        holdout,
        delta,
        path_lengths,
    })
}

fn write_csv<I, R>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    for row in rows {
        writer
            .write_record(row)
            .map_err(|e| Error::io(path, e.into()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn write_matrix(path: &Path, m: ndarray::ArrayView2<'_, f64>) -> Result<()> {
    write_csv(path, m.rows().into_iter().map(|r| r.iter().map(|&v| format_float(v)).collect::<Vec<_>>()))
}

fn write_dataset(dir: &Path, data: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix(&dir.join("features.csv"), data.features())?;
    write_csv(
        &dir.join("labels.csv"),
        data.labels().iter().map(|y| vec![y.index().to_string()]),
    )
}

/// Writes a bundle in the layout read by [`load_dataset`].
pub fn save_dataset(dir: impl AsRef<Path>, bundle: &DatasetBundle) -> Result<()> {
    let dir = dir.as_ref();
    write_dataset(dir, &bundle.train)?;
    if let Some(test) = &bundle.test {
        write_dataset(&dir.join("test"), test)?;
    }
    write_matrix(&dir.join("embeddings.csv"), bundle.embeddings.matrix())?;
    let split = SplitFile {
        seen: bundle.split.seen().iter().map(|c| c.index()).collect(),
        unseen: bundle.split.unseen().iter().map(|c| c.index()).collect(),
        val_fraction: bundle.holdout.fraction,
        val_mode: bundle.holdout.mode,
    };
    write_json(&dir.join("split.json"), &split)?;
    if let Some(delta) = &bundle.delta {
        write_matrix(&dir.join("delta.csv"), delta.matrix())?;
    }
    if let Some(p) = &bundle.path_lengths {
        write_csv(
            &dir.join("spath.csv"),
            p.rows().into_iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
        )?;
    }
    Ok(())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: PathBuf::from(path),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{cosine_divergence, generate_synthetic, SyntheticSpec};

    fn bundle() -> DatasetBundle {
        let spec = SyntheticSpec {
            classes: 6,
            seen: 4,
            embed_dim: 3,
            latent_dim: 3,
            feature_dim: 5,
            samples_per_class: 4,
            noise_scale: 0.3,
        };
        let data = generate_synthetic(&spec, 5).unwrap();
        DatasetBundle {
            delta: Some(cosine_divergence(&data.embeddings).unwrap()),
            train: data.train,
            test: Some(data.test),
            embeddings: data.embeddings,
            split: data.split,
            holdout: Holdout::default(),
            path_lengths: None,
        }
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        save_dataset(dir.path(), &b).unwrap();
        let loaded = load_dataset(dir.path()).unwrap();
        assert_eq!(loaded, b);
    }

    #[test]
    fn ragged_embeddings_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &bundle()).unwrap();
        let path = dir.path().join("embeddings.csv");
        let mut text = fs::read_to_string(&path).unwrap();
        text = text.replacen('\n', ",0.5\n", 2).replacen(",0.5\n", "\n", 1);
        fs::write(&path, text).unwrap();
        match load_dataset(dir.path()) {
            Err(Error::Load { kind, row, file, .. }) => {
                assert_eq!(kind, LoadErrorKind::DimensionMismatch);
                assert_eq!(row, 2);
                assert!(file.ends_with("embeddings.csv"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn delta_out_of_range_cites_position() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &bundle()).unwrap();
        let path = dir.path().join("delta.csv");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut fields: Vec<&str> = lines[2].split(',').collect();
        fields[3] = "1.5";
        lines[2] = fields.join(",");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        let err = load_dataset(dir.path()).unwrap_err();
        match &err {
            Error::Load { kind, row, message, .. } => {
                assert_eq!(*kind, LoadErrorKind::OutOfRange);
                assert_eq!(*row, 3);
                assert!(message.contains("column 4"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_out_of_range_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &bundle()).unwrap();
        let path = dir.path().join("labels.csv");
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replacen('0', "9", 1)).unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Load {
                kind: LoadErrorKind::OutOfRange,
                row: 1,
                ..
            })
        ));
        fs::remove_file(dir.path().join("features.csv")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::MissingFile(_))));
    }

    #[test]
    fn non_finite_feature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &bundle()).unwrap();
        let path = dir.path().join("features.csv");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut fields: Vec<&str> = lines[1].split(',').collect();
        fields[0] = "NaN";
        lines[1] = fields.join(",");
        fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(matches!(
            load_dataset(dir.path()),
            Err(Error::Load {
                kind: LoadErrorKind::NonFinite,
                row: 2,
                ..
            })
        ));
    }

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        let v = 1.0 / 3.0;
        assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
    }
}
