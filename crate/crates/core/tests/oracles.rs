//! Solver and basis checks against independent reference computations.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsepc::pc_basis::design_matrix;
use sparsepc::solvers::{bpdn_matrix, Algorithm, SolverOptions};
use sparsepc::theory::basis_pursuit_value;
use sparsepc::{build_basis, solve_bpdn, solve_weighted_bpdn, MeasurementSet, WeightProvenance, WeightVector};

fn sparse_instance(d: usize, q: usize, n: usize, s: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let basis = build_basis(d, q, None).unwrap();
    let p = basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = DVector::zeros(p);
    let mut idx: Vec<usize> = (0..p).collect();
    idx.shuffle(&mut rng);
    for &j in &idx[..s] {
        c[j] = rng.random_range(-1.5..1.5);
    }
    let xi = DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..=1.0));
    let psi = design_matrix(&basis, &xi).unwrap();
    let u = &psi * c;
    (psi, u)
}

#[test]
fn noiseless_objective_matches_linear_program() {
    for seed in 0..12 {
        // Sparsity beyond the recovery regime exercises long paths.
        let s = if seed % 2 == 0 { 10 } else { 25 };
        let (psi, u) = sparse_instance(6, 4, 80, s, 40 + seed);
        let lp = basis_pursuit_value(&psi, &u, &vec![1.0; psi.ncols()]).unwrap().unwrap();
        let m = MeasurementSet::from_matrix(psi, u).unwrap();
        let fit = solve_bpdn(&m, 0.0).unwrap();
        assert!(fit.converged);
        assert!((fit.objective - lp).abs() <= 1e-9 * lp, "seed {seed}: {} vs {lp}", fit.objective);
    }
}

#[test]
fn weighted_objective_matches_linear_program() {
    for seed in 0..6 {
        let (psi, u) = sparse_instance(4, 3, 25, 6, 90 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..psi.ncols()).map(|_| rng.random_range(0.1..3.0)).collect();
        let lp = basis_pursuit_value(&psi, &u, &w).unwrap().unwrap();
        let m = MeasurementSet::from_matrix(psi, u).unwrap();
        let wv = WeightVector::new(w, WeightProvenance::PriorBound).unwrap();
        let fit = solve_weighted_bpdn(&m, 0.0, &wv).unwrap();
        assert!((fit.objective - lp).abs() <= 1e-9 * lp, "seed {seed}: {} vs {lp}", fit.objective);
    }
}

#[test]
fn homotopy_and_projected_gradient_agree_with_noise() {
    let (psi, mut u) = sparse_instance(5, 3, 40, 8, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    u.iter_mut().for_each(|v| *v += 0.01 * rng.random_range(-1.0..1.0));
    for eps in [0.02, 0.05, 0.2] {
        let h = bpdn_matrix(&psi, &u, eps, &SolverOptions::default()).unwrap();
        let g = bpdn_matrix(
            &psi,
            &u,
            eps,
            &SolverOptions::default().with_algorithm(Algorithm::SpectralProjectedGradient),
        )
        .unwrap();
        assert!((h.objective - g.objective).abs() <= 1e-4 * h.objective.max(1.0));
    }
}

#[test]
fn monte_carlo_gram_is_near_identity() {
    let basis = build_basis(2, 2, None).unwrap();
    let n = 1_000_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let xi = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..=1.0));
    let psi = design_matrix(&basis, &xi).unwrap();
    let gram = psi.tr_mul(&psi) / n as f64;
    let err = (gram - DMatrix::identity(6, 6)).amax();
    assert!(err < 1e-2, "{err}");
}
