use serde::{Deserialize, Serialize};

use super::{compute_q, DualMatrix};
use crate::data::{ClassId, ClassSplit, Dataset, DivergenceMatrix, LabelEmbeddings};
use crate::error::{Error, Result};
use crate::objective::{dual_constraint_sums, objective_gradient_w, sample_costs, Hyperparams, SampleCosts};
use crate::scoring::{Ensemble, MarginMatrix, WeakBasis};

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// The weight solve stops once the projected-gradient norm is at most
    /// `grad_tol * max(1, |objective|)`.
    pub grad_tol: f64,
    pub shrink: f64,
    pub grow: f64,
    /// Column generation stops once the best new column violates by less than `nu + epsilon`.
    pub epsilon: f64,
    pub power_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iters: 5000,
            grad_tol: 1e-7,
            shrink: 0.5,
            grow: 2.0,
            epsilon: 1e-6,
            power_tol: 1e-10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iters > 0
            && self.grad_tol > 0.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.grow >= 1.0
            && self.epsilon > 0.0
            && self.power_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid solver settings {self:?}")))
        }
    }
}

/// The weight subproblem `min_{w >= 0} sum_i s_i l_i(w) + nu ||w||_1` over a fixed model basis.
#[derive(Debug, Clone, Copy)]
pub struct WeightProblem<'a> {
    pub basis: &'a WeakBasis,
    pub labels: &'a [ClassId],
    pub delta: &'a DivergenceMatrix,
    pub split: &'a ClassSplit,
    pub s: &'a [f64],
    pub hp: Hyperparams,
}

/// Everything computed at one weight vector.
#[derive(Debug, Clone)]
pub struct WeightEvaluation {
    pub objective: f64,
    pub margins: MarginMatrix,
    pub costs: SampleCosts,
}

impl<'a> WeightProblem<'a> {
    pub fn evaluate(&self, w: &[f64]) -> Result<WeightEvaluation> {
        let margins = MarginMatrix::from_scores(self.basis.scores(w), self.labels, self.delta);
        let costs = sample_costs(&margins, self.labels, self.delta, self.split, &self.hp)?;
        let fit: f64 = costs.l.iter().zip(self.s).map(|(l, s)| s * l).sum();
        Ok(WeightEvaluation {
            objective: fit + self.hp.nu * w.iter().sum::<f64>(),
            margins,
            costs,
        })
    }

    pub fn objective(&self, w: &[f64]) -> Result<f64> {
        Ok(self.evaluate(w)?.objective)
    }

    pub fn dual(&self, eval: &WeightEvaluation) -> Result<DualMatrix> {
        compute_q(&eval.margins, &eval.costs, self.s, self.delta, self.labels, self.split, &self.hp)
    }

    /// Objective and gradient at `w`.
    pub fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let eval = self.evaluate(w)?;
        let q = self.dual(&eval)?;
        Ok((eval.objective, objective_gradient_w(self.basis, self.labels, &q, &self.hp)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightSolution {
    pub w: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub projected_grad_norm: f64,
}

/// Norm of the gradient projected onto the feasible directions of `w >= 0`.
pub fn projected_gradient_norm(w: &[f64], g: &[f64]) -> f64 {
    w.iter()
        .zip(g)
        .map(|(&wj, &gj)| if wj > 0.0 { gj } else { gj.min(0.0) })
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Projected gradient descent with Barzilai-Borwein trial steps and Armijo
/// backtracking along the projection arc, started from `warm` (clamped to `w >= 0`).
///
/// Returns the best iterate found; its objective never exceeds the warm start's.
pub fn solve_weights(problem: &WeightProblem<'_>, warm: &[f64], settings: &SolverSettings) -> Result<WeightSolution> {
    settings.validate()?;
    let k = problem.basis.len();
    if warm.len() != k {
        return Err(Error::DimensionMismatch(format!("warm start has {} weights for {k} models", warm.len())));
    }
    let mut w: Vec<f64> = warm.iter().map(|v| v.max(0.0)).collect();
    let (mut f, mut g) = problem.value_and_gradient(&w)?;
    let mut step = {
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if gmax > 0.0 { 1.0 / gmax } else { 1.0 }
    };

    let mut iterations = 0;
    let tol = |f: f64| settings.grad_tol * f.abs().max(1.0);
    let mut pg = projected_gradient_norm(&w, &g);
    while pg > tol(f) && iterations < settings.max_iters {
        iterations += 1;
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wj, gj)| (wj - step * gj).max(0.0)).collect();
            let decrease: f64 = g.iter().zip(trial.iter().zip(&w)).map(|(gj, (t, wj))| gj * (t - wj)).sum();
            if trial == w {
                break;
            }
            let (ft, gt) = problem.value_and_gradient(&trial)?;
            if ft <= f + ARMIJO * decrease {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= settings.shrink;
        }
        let Some((trial, ft, gt)) = accepted else {
            // no representable descent step remains
            break;
        };
        let (mut ss, mut sy) = (0.0, 0.0);
        for j in 0..k {
            let dw = trial[j] - w[j];
            ss += dw * dw;
            sy += dw * (gt[j] - g[j]);
        }
        step = if sy > 0.0 { ss / sy } else { step * settings.grow };
        step = step.clamp(MIN_STEP, MAX_STEP);
        w = trial;
        f = ft;
        g = gt;
        pg = projected_gradient_norm(&w, &g);
    }

    Ok(WeightSolution {
        w,
        objective: f,
        iterations,
        converged: pg <= tol(f),
        projected_grad_norm: pg,
    })
}

/// Weight solve for an ensemble, warm-started from its current weights.
#[allow(clippy::too_many_arguments)]
pub fn solve_w(
    ens: &Ensemble,
    data: &Dataset,
    embeddings: &LabelEmbeddings,
    delta: &DivergenceMatrix,
    split: &ClassSplit,
    s: &[f64],
    hp: &Hyperparams,
    settings: &SolverSettings,
) -> Result<WeightSolution> {
    if ens.is_empty() {
        return Err(Error::InvalidInput("weight solve needs at least one weak model".into()));
    }
    let basis = WeakBasis::from_models(ens.models(), data.features(), embeddings);
    let problem = WeightProblem {
        basis: &basis,
        labels: data.labels(),
        delta,
        split,
        s,
        hp: *hp,
    };
    solve_weights(&problem, ens.weights(), settings)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `max_j (sum_{i,r} Q_ir (h_j(x_i, y_i) - h_j(x_i, r)) - nu)`; at most ~0 at an optimum.
    pub max_constraint_violation: f64,
    /// `max_j |w_j (nu - sum_{i,r} ...)|`.
    pub max_complementarity: f64,
}

/// Dual feasibility and complementary slackness of `w` given the dual matrix recomputed at `w`.
pub fn kkt_residual(
    w: &[f64],
    q_at_w: &DualMatrix,
    basis: &WeakBasis,
    labels: &[ClassId],
    hp: &Hyperparams,
) -> KktResidual {
    let sums = dual_constraint_sums(basis, labels, q_at_w);
    if sums.is_empty() {
        return KktResidual {
            max_constraint_violation: 0.0,
            max_complementarity: 0.0,
        };
    }
    KktResidual {
        max_constraint_violation: sums.iter().map(|v| v - hp.nu).fold(f64::NEG_INFINITY, f64::max),
        max_complementarity: w
            .iter()
            .zip(&sums)
            .map(|(wj, v)| (wj * (hp.nu - v)).abs())
            .fold(0.0, f64::max),
    }
}
