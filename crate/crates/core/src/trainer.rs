//! The alternating training loop, evaluation metrics and the beta sweep.
//!
//! Each outer iteration adds the weak model that most violates the dual
//! constraint, re-solves the ensemble weights, recomputes the dual matrix
//! from the new weights and the previous sample weights, updates the sample
//! weights, scores the validation set and anneals the pace. The returned
//! ensemble is the prefix with the lowest validation error.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::Serialize;

use crate::boosting::{
    compute_q, learn_weak_model, solve_weights, violation_score, DualMatrix, SolverSettings, WeightProblem,
};
use crate::data::io::format_float;
use crate::data::{partition, ClassId, ClassSplit, Dataset, DivergenceMatrix, Holdout, LabelEmbeddings};
use crate::error::{Error, Result};
use crate::objective::{total_objective, Hyperparams};
use crate::scoring::{argmax_class, Ensemble, WeakBasis};
use crate::selection::{anneal, g_value, update_all_s, PaceMode, PaceParams};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// L1 strength per training sample; `nu = nu_over_n * N`.
    pub nu_over_n: f64,
    /// Correlation-penalty strength per training sample; `beta = beta_over_n * N`.
    pub beta_over_n: f64,
    pub pace: PaceParams,
    pub solver: SolverSettings,
    /// Early stopping is only considered from this iteration on.
    pub t_es: usize,
    pub max_iters_outer: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            nu_over_n: 1e-4,
            beta_over_n: 0.2,
            pace: PaceParams::new(PaceMode::Quantile, 1.0, 0.1, 1e6, 1.5, 0.5, 0.1).expect("valid default pace"),
            solver: SolverSettings::default(),
            t_es: 20,
            max_iters_outer: 500,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        Hyperparams::new(self.nu_over_n, self.beta_over_n)?;
        self.pace.validate()?;
        self.solver.validate()?;
        if self.t_es < 1 || self.max_iters_outer < 1 {
            return Err(Error::InvalidInput("t_es and max_iters_outer must be at least 1".into()));
        }
        Ok(())
    }
}

/// Borrowed training inputs. `data` is the whole seen-class pool; the
/// validation set is carved out of it according to `holdout`.
#[derive(Debug, Clone, Copy)]
pub struct TrainInputs<'a> {
    pub data: &'a Dataset,
    pub embeddings: &'a LabelEmbeddings,
    pub split: &'a ClassSplit,
    pub delta: &'a DivergenceMatrix,
    pub holdout: Holdout,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Full objective after the sample-weight update.
    pub objective: f64,
    /// Objective at the start of the iteration, before the new model is added.
    pub objective_before_add: f64,
    /// Objective with the new model added at weight 0.
    pub objective_after_add: f64,
    /// Objective after the weight solve, before the sample-weight update.
    pub objective_after_w: f64,
    pub train_er: f64,
    pub val_er: f64,
    pub mean_cov: f64,
    pub selected: usize,
    pub violation: f64,
    pub lambda: f64,
    pub zeta: f64,
    pub solver_converged: bool,
    pub solver_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The best new column violated the dual constraint by less than `nu + epsilon`.
    Tolerance,
    EarlyStop,
    MaxIterations,
    /// The dual matrix produced an exactly zero weak-learner matrix.
    ZeroSignal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    /// Violation score of the last generated column, including a rejected one.
    pub last_violation: Option<f64>,
    /// Number of weak models kept (the 1-based iteration of minimal validation error; 0 if none).
    pub best_k: usize,
    pub nu: f64,
    pub beta: f64,
}

pub const TRACE_HEADER: [&str; 8] = [
    "iter", "objective", "train_er", "val_er", "mean_cov", "selected", "violation", "lambda",
];

impl TrainTrace {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
        w.write_record(TRACE_HEADER).map_err(|e| Error::io(path, e.into()))?;
        for r in &self.records {
            w.write_record([
                r.iter.to_string(),
                format_float(r.objective),
                format_float(r.train_er),
                format_float(r.val_er),
                format_float(r.mean_cov),
                r.selected.to_string(),
                format_float(r.violation),
                format_float(r.lambda),
            ])
            .map_err(|e| Error::io(path, e.into()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn solver_always_converged(&self) -> bool {
        self.records.iter().all(|r| r.solver_converged)
    }
}

fn error_rate(scores: ArrayView2<'_, f64>, labels: &[ClassId], candidates: &[ClassId]) -> f64 {
    let wrong = scores
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, y)| argmax_class(*row, candidates) != **y)
        .count();
    wrong as f64 / labels.len() as f64
}

/// Trains with self-paced sample selection.
pub fn train(inputs: &TrainInputs<'_>, config: &TrainConfig) -> Result<(Ensemble, TrainTrace)> {
    run(inputs, config, true)
}

/// Same loop with every sample weight pinned to 1 and no annealing.
pub fn train_boosting_only(inputs: &TrainInputs<'_>, config: &TrainConfig) -> Result<(Ensemble, TrainTrace)> {
    run(inputs, config, false)
}

fn run(inputs: &TrainInputs<'_>, config: &TrainConfig, self_paced: bool) -> Result<(Ensemble, TrainTrace)> {
    config.validate()?;
    let c = inputs.embeddings.class_count();
    if inputs.delta.class_count() != c || inputs.split.class_count() != c {
        return Err(Error::DimensionMismatch(format!(
            "embeddings cover {c} classes, divergences {} and split {}",
            inputs.delta.class_count(),
            inputs.split.class_count()
        )));
    }
    let part = partition(inputs.data, inputs.split, &inputs.holdout, config.seed)?;
    let train = &part.train;
    let split = &part.train_split;
    if split.unseen().len() < 2 {
        return Err(Error::DegenerateTargetSet(split.unseen().len()));
    }
    let n = train.n_samples();
    let hp = Hyperparams::new(config.nu_over_n * n as f64, config.beta_over_n * n as f64)?;
    let labels = train.labels();

    let mut basis = WeakBasis::new(train.features(), inputs.embeddings);
    let mut val_basis = WeakBasis::new(part.validation.features(), inputs.embeddings);
    let mut models = Vec::new();
    let mut w: Vec<f64> = Vec::new();
    let mut weight_history: Vec<Vec<f64>> = Vec::new();

    let mut s = vec![1.0; n];
    let mut q = DualMatrix::initial(&s, c);
    let mut current = WeightProblem {
        basis: &basis,
        labels,
        delta: inputs.delta,
        split,
        s: &s,
        hp,
    }
    .evaluate(&w)?;
    let mut pace = config.pace;
    if self_paced && pace.mode == PaceMode::Quantile {
        pace = anneal(&pace, &current.costs, 0);
    }

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut last_violation = None;
    let mut stop_reason = StopReason::MaxIterations;

    for t in 1..=config.max_iters_outer {
        let Some(h) = learn_weak_model(&q, train, inputs.embeddings, config.solver.power_tol) else {
            if t == 1 {
                return Err(Error::TrivialProblem);
            }
            stop_reason = StopReason::ZeroSignal;
            break;
        };
        let violation = violation_score(&h, &q, train, inputs.embeddings);
        last_violation = Some(violation);
        if violation < hp.nu + config.solver.epsilon {
            stop_reason = StopReason::Tolerance;
            break;
        }

        let g_sum = |s: &[f64], pace: &PaceParams| s.iter().map(|&si| g_value(si, pace)).sum::<f64>();
        let objective_before_add = total_objective(&current.costs, &s, &pace, &w, &hp);

        basis.push(&h, train.features(), inputs.embeddings);
        val_basis.push(&h, part.validation.features(), inputs.embeddings);
        models.push(h);
        w.push(0.0);

        let problem = WeightProblem {
            basis: &basis,
            labels,
            delta: inputs.delta,
            split,
            s: &s,
            hp,
        };
        let objective_after_add = problem.objective(&w)? + g_sum(&s, &pace);
        let solution = solve_weights(&problem, &w, &config.solver)?;
        w = solution.w;
        let eval = problem.evaluate(&w)?;
        let objective_after_w = eval.objective + g_sum(&s, &pace);

        // dual from the new weights and the previous sample weights
        q = compute_q(&eval.margins, &eval.costs, &s, inputs.delta, labels, split, &hp)?;
        if self_paced {
            s = update_all_s(&eval.costs, &pace);
        }
        let objective = total_objective(&eval.costs, &s, &pace, &w, &hp);

        let train_er = error_rate(eval.margins.scores(), labels, split.seen());
        let val_scores = val_basis.scores(&w);
        let val_er = error_rate(val_scores.view(), part.validation.labels(), &part.validation_candidates);

        records.push(IterationRecord {
            iter: t,
            objective,
            objective_before_add,
            objective_after_add,
            objective_after_w,
            train_er,
            val_er,
            mean_cov: eval.costs.mean_cov(),
            selected: s.iter().filter(|&&si| si > 0.0).count(),
            violation,
            lambda: pace.lambda,
            zeta: pace.zeta,
            solver_converged: solution.converged,
            solver_iterations: solution.iterations,
        });
        weight_history.push(w.clone());

        if self_paced {
            pace = anneal(&pace, &eval.costs, t);
        }
        current = eval;

        let prior_min = records[..records.len() - 1]
            .iter()
            .map(|r| r.val_er)
            .fold(f64::INFINITY, f64::min);
        if t >= config.t_es && val_er > prior_min {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }

    let best_k = best_iteration(&records);
    let ensemble = if best_k == 0 {
        Ensemble::empty()
    } else {
        Ensemble::new(models[..best_k].to_vec(), weight_history[best_k - 1].clone())?
    };
    Ok((
        ensemble,
        TrainTrace {
            records,
            stop_reason,
            last_violation,
            best_k,
            nu: hp.nu,
            beta: hp.beta,
        },
    ))
}

/// 1-based index of the last record with minimal validation error, 0 for an empty trace.
///
/// Ties go to the later iteration: at equal validation error it has the
/// lower training objective.
pub fn best_iteration(records: &[IterationRecord]) -> usize {
    let mut best = 0;
    let mut best_err = f64::INFINITY;
    for r in records {
        if r.val_er <= best_err {
            best_err = r.val_er;
            best = r.iter;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub error_rate: f64,
    pub mean_delta: f64,
    /// Accuracy per true class present in the evaluation set.
    pub per_class: BTreeMap<ClassId, f64>,
}

impl EvalReport {
    pub fn from_predictions(truth: &[ClassId], predicted: &[ClassId], delta: &DivergenceMatrix) -> Result<Self> {
        assert_eq!(truth.len(), predicted.len(), "one prediction per sample");
        if truth.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        let n = truth.len() as f64;
        let mut hits: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
        let mut wrong = 0;
        let mut delta_sum = 0.0;
        for (&y, &p) in truth.iter().zip(predicted) {
            let entry = hits.entry(y).or_default();
            entry.1 += 1;
            if y == p {
                entry.0 += 1;
            } else {
                wrong += 1;
            }
            delta_sum += delta.get(y, p);
        }
        Ok(EvalReport {
            error_rate: wrong as f64 / n,
            mean_delta: delta_sum / n,
            per_class: hits
                .into_iter()
                .map(|(c, (ok, total))| (c, ok as f64 / total as f64))
                .collect(),
        })
    }

    /// Writes `report.json` with 0-based class keys.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct ReportFile {
            error_rate: f64,
            mean_delta: f64,
            per_class: BTreeMap<usize, f64>,
        }
        let file = ReportFile {
            error_rate: self.error_rate,
            mean_delta: self.mean_delta,
            per_class: self.per_class.iter().map(|(c, a)| (c.index(), *a)).collect(),
        };
        crate::data::io::write_json(path.as_ref(), &file)
    }
}

/// Error rate and mean divergence of predictions restricted to `candidates`.
pub fn evaluate(
    ens: &Ensemble,
    test: &Dataset,
    embeddings: &LabelEmbeddings,
    delta: &DivergenceMatrix,
    candidates: &[ClassId],
) -> Result<EvalReport> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("evaluation needs at least one candidate class".into()));
    }
    let basis = WeakBasis::from_models(ens.models(), test.features(), embeddings);
    let scores = basis.scores(ens.weights());
    let predicted: Vec<ClassId> = scores
        .rows()
        .into_iter()
        .map(|row| argmax_class(row, candidates))
        .collect();
    EvalReport::from_predictions(test.labels(), &predicted, delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub beta_over_n: f64,
    pub test_er: f64,
    pub mean_delta: f64,
}

/// One train + evaluate per `beta / N` value, all with the base seed; runs execute in parallel.
pub fn sweep_beta(
    inputs: &TrainInputs<'_>,
    test: &Dataset,
    base: &TrainConfig,
    beta_grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if beta_grid.is_empty() {
        return Err(Error::InvalidInput("beta grid is empty".into()));
    }
    beta_grid
        .par_iter()
        .map(|&beta_over_n| {
            let config = TrainConfig {
                beta_over_n,
                ..base.clone()
            };
            let (ens, _) = train(inputs, &config)?;
            let report = evaluate(&ens, test, inputs.embeddings, inputs.delta, inputs.split.unseen())?;
            Ok(SweepRow {
                beta_over_n,
                test_er: report.error_rate,
                mean_delta: report.mean_delta,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    w.write_record(["beta_over_n", "test_er", "mean_delta"])
        .map_err(|e| Error::io(path, e.into()))?;
    for r in rows {
        w.write_record([format_float(r.beta_over_n), format_float(r.test_er), format_float(r.mean_delta)])
            .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
