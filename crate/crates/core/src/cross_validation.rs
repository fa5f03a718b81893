//! Choice of the BPDN tolerance ε by a single reconstruction/validation split.
//!
//! The rows are split at random into `N_r = ⌊4N/5⌋` reconstruction rows and
//! `N_v = N − N_r` validation rows. Every grid tolerance is solved on the
//! reconstruction rows and scored by the validation residual. The best grid
//! value ε* is rescaled to the full sample count as `ε = √(N/N_r)·ε*`.

use crate::pc_basis::MeasurementSet;
use crate::solvers::{EpsilonSolver, RecoveryResult, SolverOptions};
use crate::{Error, Real, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Number of logarithmically spaced points in the default grid (zero is added).
pub const DEFAULT_GRID_POINTS: usize = 20;

/// One grid evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPoint<T> {
    pub epsilon: T,
    pub validation_error: T,
    /// Whether the reconstruction solve met the tolerance, judged from its
    /// residual rather than from the solver's own convergence flag.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult<T> {
    pub epsilon_star: T,
    /// `√(N/N_r)·ε*`.
    pub epsilon: T,
    pub grid: Vec<CvPoint<T>>,
    pub split_seed: u64,
    pub n_reconstruction: usize,
    pub n_validation: usize,
}

/// Reconstruction and validation row sets, each in ascending order.
pub fn split_rows(n: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "cross-validation needs at least 5 samples, have {n}"
        )));
    }
    let nr = 4 * n / 5;
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rec = rows[..nr].to_vec();
    let mut val = rows[nr..].to_vec();
    rec.sort_unstable();
    val.sort_unstable();
    Ok((rec, val))
}

/// `0` followed by `points` log-spaced values from `1e-4·scale` to `scale`.
pub fn default_grid<T: Real>(scale: T, points: usize) -> Vec<T> {
    let mut g = vec![T::zero()];
    if points == 1 {
        g.push(scale);
    } else {
        for i in 0..points {
            let e = -4.0 + 4.0 * i as f64 / (points - 1) as f64;
            g.push(scale * T::lit(10f64.powf(e)));
        }
    }
    g
}

/// Runs the split-and-score procedure. With `grid = None` the default grid is
/// scaled by the norm of the reconstruction observations. The grid must be
/// ascending and nonnegative; ties in validation error go to the smaller ε.
pub fn select_epsilon<T: Real, S: EpsilonSolver<T> + ?Sized>(
    m: &MeasurementSet<T>,
    solver: &S,
    grid: Option<&[T]>,
    split_seed: u64,
) -> Result<CvResult<T>> {
    let (rec_rows, val_rows) = split_rows(m.n(), split_seed)?;
    let rec = m.select_rows(&rec_rows)?;
    let val = m.select_rows(&val_rows)?;
    let grid: Vec<T> = match grid {
        Some(g) => g.to_vec(),
        None => default_grid(rec.u().norm(), DEFAULT_GRID_POINTS),
    };
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty tolerance grid".into()));
    }
    if grid.iter().any(|e| !(*e >= T::zero()) || !e.is_finite())
        || grid.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::InvalidArgument(
            "tolerance grid must be finite, nonnegative and ascending".into(),
        ));
    }
    let fits = solver.solve_many(&rec, &grid)?;
    let opts = SolverOptions::<T>::default();
    let rec_norm = rec.u().norm();
    let points: Vec<CvPoint<T>> = grid
        .iter()
        .zip(&fits)
        .map(|(&epsilon, r)| CvPoint {
            epsilon,
            validation_error: (val.psi() * r.coefficients() - val.u()).norm(),
            feasible: opts.is_feasible(r.residual, epsilon, rec_norm),
        })
        .collect();
    let mut best: Option<&CvPoint<T>> = None;
    for p in points.iter().filter(|p| p.feasible) {
        if best.is_none_or(|b| p.validation_error < b.validation_error) {
            best = Some(p);
        }
    }
    let Some(best) = best else {
        let listed: Vec<String> = grid.iter().map(|e| format!("{e:e}")).collect();
        return Err(Error::Numerical(format!(
            "no grid tolerance was feasible on the reconstruction set: [{}]",
            listed.join(", ")
        )));
    };
    let epsilon_star = best.epsilon;
    Ok(CvResult {
        epsilon_star,
        epsilon: correction_factor::<T>(m.n(), rec_rows.len()) * epsilon_star,
        grid: points,
        split_seed,
        n_reconstruction: rec_rows.len(),
        n_validation: val_rows.len(),
    })
}

/// `√(N/N_r)`.
pub fn correction_factor<T: Real>(n: usize, n_r: usize) -> T {
    (T::from_usize_lossy(n) / T::from_usize_lossy(n_r)).sqrt()
}

/// Cross-validates ε and then solves on all samples with the corrected value.
pub fn cv_and_solve<T: Real, S: EpsilonSolver<T> + ?Sized>(
    m: &MeasurementSet<T>,
    solver: &S,
    grid: Option<&[T]>,
    split_seed: u64,
) -> Result<(CvResult<T>, RecoveryResult<T>)> {
    let cv = select_epsilon(m, solver, grid, split_seed)?;
    let fit = solver.solve(m, cv.epsilon)?;
    Ok((cv, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc_basis::{build_basis, design_matrix};
    use crate::solvers::{L1Method, L1Solver};
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::Rng;

    fn instance(n: usize, p: usize, noise: f64, seed: u64) -> (MeasurementSet<f64>, f64) {
        let basis = build_basis(6, 3, Some(p)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = DMatrix::from_fn(n, 6, |_, _| rng.random_range(-1.0..=1.0));
        let psi = design_matrix(&basis, &xi).unwrap();
        let c = DVector::from_fn(p, |j, _| if j % 9 == 0 { 1.0 / (1.0 + j as f64) } else { 0.0 });
        let e = DVector::from_fn(n, |_, _| noise * rng.random_range(-1.0..1.0));
        let enorm = e.norm();
        (MeasurementSet::from_matrix(psi.clone(), psi * c + e).unwrap(), enorm)
    }

    fn standard() -> L1Solver<f64> {
        L1Solver::new(L1Method::Standard)
    }

    #[test]
    fn split_sizes() {
        let (r, v) = split_rows(100, 4).unwrap();
        assert_eq!((r.len(), v.len()), (80, 20));
        let f: f64 = correction_factor(100, 80);
        assert!((f - 1.118033988749895).abs() < 1e-15);
        assert!(split_rows(4, 0).is_err());
    }

    #[test]
    fn noiseless_selects_zero() {
        let (m, _) = instance(60, 40, 0.0, 2);
        let cv = select_epsilon(&m, &standard(), None, 1).unwrap();
        assert_eq!(cv.epsilon_star, 0.0);
        assert_eq!(cv.epsilon, 0.0);
        assert_eq!(cv.grid.len(), DEFAULT_GRID_POINTS + 1);
    }

    #[test]
    fn corrected_epsilon_identity() {
        let (m, _) = instance(47, 60, 0.05, 3);
        let cv = select_epsilon(&m, &standard(), None, 9).unwrap();
        assert_eq!(cv.epsilon, (47.0f64 / 37.0).sqrt() * cv.epsilon_star);
        assert_eq!(cv.n_reconstruction, 37);
        let best = cv
            .grid
            .iter()
            .filter(|p| p.feasible)
            .map(|p| p.validation_error)
            .fold(f64::INFINITY, f64::min);
        let chosen = cv.grid.iter().find(|p| p.epsilon == cv.epsilon_star).unwrap();
        assert_eq!(chosen.validation_error, best);
    }

    #[test]
    fn ties_go_to_smaller_epsilon() {
        // Every tolerance yields the zero vector, so all validation errors tie.
        let (m, _) = instance(20, 10, 0.0, 5);
        let zero = |m: &MeasurementSet<f64>, e: f64| {
            Ok(RecoveryResult {
                c: vec![0.0; m.p()],
                residual: m.u().norm(),
                objective: 0.0,
                epsilon_used: e,
                iterations: 0,
                converged: true,
            })
        };
        let a = m.u().norm() + 1.0;
        let cv = select_epsilon(&m, &zero, Some(&[a, 2.0 * a, 3.0 * a]), 0).unwrap();
        assert_eq!(cv.epsilon_star, a);
    }

    #[test]
    fn planted_noise_is_recovered_in_scale() {
        let mut hits = 0;
        for seed in 0..20 {
            let (m, enorm) = instance(80, 84, 0.02, 100 + seed);
            let cv = select_epsilon(&m, &standard(), None, seed).unwrap();
            if cv.epsilon >= enorm / 3.0 && cv.epsilon <= 3.0 * enorm {
                hits += 1;
            }
        }
        assert!(hits >= 16, "{hits} of 20");
    }

    #[test]
    fn feasibility_comes_from_the_residual() {
        // A solver that reports non-convergence but meets every tolerance.
        let (m, _) = instance(30, 20, 0.01, 6);
        let unsettled = |m: &MeasurementSet<f64>, e: f64| {
            let mut r = standard().solve(m, e)?;
            r.converged = false;
            Ok(r)
        };
        let cv = select_epsilon(&m, &unsettled, None, 2).unwrap();
        let plain = select_epsilon(&m, &standard(), None, 2).unwrap();
        assert_eq!(cv.epsilon, plain.epsilon);
    }

    #[test]
    fn all_infeasible_is_an_error() {
        let psi = DMatrix::from_element(10, 1, 1.0);
        let u = DVector::from_fn(10, |i, _| i as f64);
        let m = MeasurementSet::from_matrix(psi, u).unwrap();
        match select_epsilon(&m, &standard(), Some(&[1e-9, 1e-8]), 0) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("1e-9")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_validation() {
        let (m, _) = instance(20, 10, 0.0, 5);
        assert!(select_epsilon(&m, &standard(), Some(&[]), 0).is_err());
        assert!(select_epsilon(&m, &standard(), Some(&[0.2, 0.1]), 0).is_err());
    }

    #[test]
    fn pipeline_resolves_on_all_rows() {
        let (m, _) = instance(50, 60, 0.01, 8);
        let (cv, fit) = cv_and_solve(&m, &standard(), None, 3).unwrap();
        assert_eq!(fit.epsilon_used, cv.epsilon);
        assert!(fit.residual <= cv.epsilon * (1.0 + 1e-6) + 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let (m, _) = instance(30, 20, 0.01, 8);
        let cv = select_epsilon(&m, &standard(), None, 3).unwrap();
        let text = serde_json::to_string(&cv).unwrap();
        let back: CvResult<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cv);
    }

    proptest! {
        #[test]
        fn split_is_partition(n in 5usize..300, seed in any::<u64>()) {
            let (r, v) = split_rows(n, seed).unwrap();
            prop_assert_eq!(r.len(), 4 * n / 5);
            let mut all: Vec<usize> = r.iter().chain(&v).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(split_rows(n, seed).unwrap(), (r, v));
        }
    }
}
