//! Self-paced sample weighting with the mixture-weighting regularizer
//! `g(s; lambda, zeta) = -zeta ln(s + zeta / lambda)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::SampleCosts;

/// `zeta = lambda * QUANTILE_ZETA_RATIO` in quantile mode.
pub const QUANTILE_ZETA_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaceMode {
    /// `(lambda, zeta) <- mu (lambda, zeta)` until `lambda >= lambda_max`.
    Geometric,
    /// `lambda` tracks a growing quantile of the current costs.
    Quantile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaceParams {
    pub lambda: f64,
    pub zeta: f64,
    pub lambda_max: f64,
    pub mu: f64,
    pub mode: PaceMode,
    pub p0: f64,
    pub p_step: f64,
    pub frozen: bool,
}

impl PaceParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: PaceMode,
        lambda: f64,
        zeta: f64,
        lambda_max: f64,
        mu: f64,
        p0: f64,
        p_step: f64,
    ) -> Result<Self> {
        let pace = PaceParams {
            lambda,
            zeta,
            lambda_max,
            mu,
            mode,
            p0,
            p_step,
            frozen: false,
        };
        pace.validate()?;
        Ok(pace)
    }

    pub fn geometric(lambda: f64, zeta: f64, lambda_max: f64, mu: f64) -> Result<Self> {
        PaceParams::new(PaceMode::Geometric, lambda, zeta, lambda_max, mu, 1.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.lambda > 0.0 && self.lambda.is_finite() && self.zeta > 0.0 && self.zeta.is_finite()) {
            return bad(format!("pace needs lambda, zeta > 0, got ({}, {})", self.lambda, self.zeta));
        }
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return bad(format!("annealing factor mu must exceed 1, got {}", self.mu));
        }
        if !(self.p0 > 0.0 && self.p0 <= 1.0) || !(self.p_step >= 0.0 && self.p_step.is_finite()) {
            return bad(format!("proportion schedule needs 0 < p0 <= 1 and p_step >= 0, got ({}, {})", self.p0, self.p_step));
        }
        if self.lambda_max.is_nan() {
            return bad("lambda_max is NaN".into());
        }
        Ok(())
    }

    /// Costs at or below this get full weight.
    pub fn easy_threshold(&self) -> f64 {
        self.zeta * self.lambda / (self.zeta + self.lambda)
    }

    /// Proportion of samples targeted after `t` completed iterations.
    pub fn proportion(&self, t: usize) -> f64 {
        (self.p0 + t as f64 * self.p_step).min(1.0)
    }
}

pub fn g_value(s: f64, pace: &PaceParams) -> f64 {
    -pace.zeta * (s + pace.zeta / pace.lambda).ln()
}

/// Closed-form minimizer of `s l + g(s)` over `[0, 1]`.
pub fn optimal_s(l: f64, pace: &PaceParams) -> f64 {
    if l <= pace.easy_threshold() {
        1.0
    } else if l >= pace.lambda {
        0.0
    } else {
        (pace.zeta / l - pace.zeta / pace.lambda).clamp(0.0, 1.0)
    }
}

pub fn update_all_s(costs: &SampleCosts, pace: &PaceParams) -> Vec<f64> {
    costs.l.iter().map(|&l| optimal_s(l, pace)).collect()
}

/// Lower empirical quantile: the smallest cost whose empirical CDF reaches `p`.
fn lower_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Pace for the next iteration, given the costs after iteration `t`.
///
/// Quantile mode sets `lambda` to the `p_t` cost quantile, so roughly a
/// `p_t` fraction of samples get nonzero weight. At `p_t = 1` it instead
/// lifts the easy threshold to the largest cost, so every sample gets full
/// weight.
pub fn anneal(pace: &PaceParams, costs: &SampleCosts, t: usize) -> PaceParams {
    let mut next = *pace;
    if pace.frozen {
        return next;
    }
    match pace.mode {
        PaceMode::Geometric => {
            if pace.lambda < pace.lambda_max {
                next.lambda *= pace.mu;
                next.zeta *= pace.mu;
            } else {
                next.frozen = true;
            }
        }
        PaceMode::Quantile => {
            let p = pace.proportion(t);
            let lambda = if p >= 1.0 {
                let max = costs.l.iter().cloned().fold(0.0, f64::max);
                max * (1.0 + 1.0 / QUANTILE_ZETA_RATIO)
            } else {
                lower_quantile(&costs.l, p)
            };
            next.lambda = lambda.max(1e-12);
            next.zeta = next.lambda * QUANTILE_ZETA_RATIO;
            if p >= 1.0 && next.lambda >= pace.lambda_max {
                next.frozen = true;
            }
        }
    }
    next
}
