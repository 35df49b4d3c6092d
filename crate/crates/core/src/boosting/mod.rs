//! Column generation: the dual matrix `Q`, weak-model generation from its
//! top singular pair, and the non-negative L1-regularized weight solve.

mod dual;
mod solver;
mod weak;

pub use dual::{compute_q, DualMatrix};
pub use solver::{
    kkt_residual, projected_gradient_norm, solve_w, solve_weights, KktResidual, SolverSettings, WeightEvaluation,
    WeightProblem, WeightSolution,
};
pub use weak::{learn_weak_model, top_singular_pair, violation_score, weak_learner_matrix, TopSingular};
