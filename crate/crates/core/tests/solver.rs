mod common;

use bzscr::boosting::{kkt_residual, solve_w, solve_weights, SolverSettings};
use bzscr::scoring::Ensemble;
use bzscr::Error;
use common::*;

fn check_against_grid(seed: u64, k: usize) {
    let mut rng = rng(seed);
    let mut shape = random_shape(&mut rng);
    shape.k = k;
    let t = toy(&mut rng, &shape, 0.5, 0.8);
    let problem = t.problem();
    let settings = SolverSettings::default();
    let sol = solve_weights(&problem, &vec![0.0; k], &settings).unwrap();
    assert!(sol.converged, "seed {seed}: solver stopped at {}", sol.projected_grad_norm);
    let (grid_w, grid_f) = grid_minimum(|w| problem.objective(w).unwrap(), k, 30.0);
    assert!(
        (sol.objective - grid_f).abs() <= 1e-6,
        "seed {seed}: solver {} at {:?}, grid {grid_f} at {grid_w:?}",
        sol.objective,
        sol.w
    );

    let q = problem.dual(&problem.evaluate(&sol.w).unwrap()).unwrap();
    let kkt = kkt_residual(&sol.w, &q, &t.basis, t.data.labels(), &t.hp);
    assert!(kkt.max_constraint_violation <= 1e-5, "seed {seed}: {kkt:?}");
    assert!(kkt.max_complementarity <= 1e-5, "seed {seed}: {kkt:?}");
}

#[test]
fn one_dimensional_solves_match_grid_search() {
    for seed in 0..10 {
        check_against_grid(seed, 1);
    }
}

#[test]
fn two_dimensional_solves_match_grid_search() {
    for seed in 20..25 {
        check_against_grid(seed, 2);
    }
}

#[test]
fn never_worse_than_the_warm_start() {
    let mut rng = rng(77);
    for _ in 0..20 {
        let shape = random_shape(&mut rng);
        let t = toy(&mut rng, &shape, 0.2, 1.1);
        let problem = t.problem();
        let start = problem.objective(&t.w).unwrap();
        let tight = SolverSettings {
            max_iters: 3,
            ..SolverSettings::default()
        };
        let sol = solve_weights(&problem, &t.w, &tight).unwrap();
        assert!(sol.objective <= start);
        assert!(sol.w.iter().all(|&v| v >= 0.0));
        assert_eq!(sol.objective, problem.objective(&sol.w).unwrap());
    }
}

#[test]
fn huge_nu_drives_all_weights_to_zero() {
    let mut rng = rng(3);
    let shape = random_shape(&mut rng);
    let t = toy(&mut rng, &shape, 1e6, 0.5);
    let sol = solve_weights(&t.problem(), &t.w, &SolverSettings::default()).unwrap();
    assert!(sol.w.iter().all(|&v| v == 0.0), "{:?}", sol.w);
}

#[test]
fn ensemble_solve_agrees_with_basis_solve() {
    let mut rng = rng(12);
    let shape = random_shape(&mut rng);
    let t = toy(&mut rng, &shape, 0.4, 0.6);
    let ens = Ensemble::new(t.models.clone(), t.w.clone()).unwrap();
    let settings = SolverSettings::default();
    let a = solve_w(&ens, &t.data, &t.embeddings, &t.delta, &t.split, &t.s, &t.hp, &settings).unwrap();
    let b = solve_weights(&t.problem(), &t.w, &settings).unwrap();
    assert_eq!(a, b);

    let empty = solve_w(&Ensemble::empty(), &t.data, &t.embeddings, &t.delta, &t.split, &t.s, &t.hp, &settings);
    assert!(matches!(empty, Err(Error::InvalidInput(_))));
}

#[test]
fn invalid_settings_rejected() {
    let mut rng = rng(1);
    let shape = random_shape(&mut rng);
    let t = toy(&mut rng, &shape, 0.4, 0.6);
    for bad in [
        SolverSettings { shrink: 1.0, ..SolverSettings::default() },
        SolverSettings { grad_tol: 0.0, ..SolverSettings::default() },
        SolverSettings { max_iters: 0, ..SolverSettings::default() },
    ] {
        assert!(solve_weights(&t.problem(), &t.w, &bad).is_err());
    }
    assert!(matches!(
        solve_weights(&t.problem(), &[0.0; 9], &SolverSettings::default()),
        Err(Error::DimensionMismatch(_))
    ));
}
