//! Replicated recovery experiments: configuration, sample generation, the
//! replication loop, error statistics and report emission.
//!
//! Every replication of every sample size draws its own samples from a seed
//! derived from the base seed, `N` and the replication index, and all methods
//! of a run see the same samples. Failed solves are recorded and excluded.

mod config;
mod problem;
mod report;
mod samples;

pub use config::{
    derive_seed, EpsilonRule, ExperimentConfig, Method, Problem, TaylorSettings, WeightSource,
};
pub use problem::{reference_solution, ProblemInstance};
pub use report::{emit, percentile, ErrorReport, FailureRecord, ReplicateRecord, ReportFormat, ReportRow, Stat};
pub use samples::{load_samples, read_samples, save_samples, write_samples, SampleFile};

use crate::cross_validation::{default_grid, select_epsilon, split_rows, CvResult};
use crate::pc_basis::{design_matrix, MeasurementSet};
use crate::random_field::exponential_kl;
use crate::solvers::{
    least_squares, weighted_least_squares, EpsilonSolver, L1Method, L1Solver, RecoveryResult,
};
use crate::weights::{
    damped_weights, default_eps_w, elliptic_bound, taylor_bound, DecayModel, TaylorBoundSpec,
};
use crate::{Error, Result};
use nalgebra::DVector;
use problem::tag;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;

/// `(mean, standard deviation)` of a PC expansion in an orthonormal basis
/// whose first function is the constant.
pub fn pc_mean_std(c: &DVector<f64>) -> (f64, f64) {
    let var: f64 = c.iter().skip(1).map(|v| v * v).sum();
    (c[0], var.sqrt())
}

/// Relative coefficient-space error `‖ĉ − c*‖ / ‖c*‖`.
pub fn relative_rms(c_hat: &DVector<f64>, c_star: &DVector<f64>) -> f64 {
    (c_hat - c_star).norm() / c_star.norm()
}

/// Relative error on `n_test` fresh points: `‖Ψ(ĉ − c*)‖ / ‖Ψ c*‖`.
pub fn validation_rms(
    problem: &ProblemInstance,
    c_hat: &DVector<f64>,
    c_star: &DVector<f64>,
    n_test: usize,
    seed: u64,
) -> Result<f64> {
    let psi = design_matrix(problem.basis(), &problem.draw_points(n_test, seed))?;
    Ok((&psi * (c_hat - c_star)).norm() / (&psi * c_star).norm())
}

/// Relative errors of mean, standard deviation and coefficients.
pub fn error_stats(c_hat: &DVector<f64>, c_star: &DVector<f64>) -> (f64, f64, f64) {
    let (m_hat, s_hat) = pc_mean_std(c_hat);
    let (m, s) = pc_mean_std(c_star);
    (
        (m_hat - m).abs() / m.abs(),
        (s_hat - s).abs() / s,
        relative_rms(c_hat, c_star),
    )
}

/// A-priori magnitude bounds for the configured weight source, before the
/// per-replication scaling. `None` when no bounds are configured.
pub fn prior_bounds(
    problem: &ProblemInstance,
    truth: &DVector<f64>,
) -> Result<Option<Vec<f64>>> {
    let cfg = problem.config();
    let seed = derive_seed(cfg.seed, &[tag::BOUNDS]);
    let mut bounds = match cfg.weight_source {
        WeightSource::None => return Ok(None),
        WeightSource::TrueCoeffs => truth.iter().map(|c| c.abs()).collect(),
        WeightSource::EllipticBound => {
            let model = problem.model().ok_or_else(|| {
                Error::InvalidArgument("elliptic_bound needs the elliptic problem".into())
            })?;
            let g = model.fitted_decay_rates(cfg.q, cfg.gk_samples, seed)?;
            elliptic_bound(&DecayModel::new(g, 1.0)?, problem.basis())?
        }
        WeightSource::TaylorBound => {
            let t = &cfg.taylor;
            let spec = TaylorBoundSpec {
                t: exponential_kl(t.l_c, cfg.d)?.nu_integrals(t.sigma_t),
                k_max: t.k_max,
                tc_bar: t.tc_bar,
                mc_samples: t.mc_samples,
            };
            let b = taylor_bound(&spec, problem.basis(), seed)?;
            if !(b[0] > 0.0) {
                return Err(Error::Numerical("Taylor bound of the mean is zero".into()));
            }
            let b0 = b[0];
            b.into_iter().map(|v| v / b0).collect()
        }
    };
    misrank(&mut bounds, cfg.misrank_fraction, seed);
    Ok(Some(bounds))
}

/// Permutes the values at a random `fraction` of the positions among themselves.
pub fn misrank(bounds: &mut [f64], fraction: f64, seed: u64) {
    let k = (fraction * bounds.len() as f64).round() as usize;
    if k < 2 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut pos: Vec<usize> = (0..bounds.len()).collect();
    pos.shuffle(&mut rng);
    pos.truncate(k);
    let mut vals: Vec<f64> = pos.iter().map(|&j| bounds[j]).collect();
    vals.shuffle(&mut rng);
    for (j, v) in pos.into_iter().zip(vals) {
        bounds[j] = v;
    }
}

/// Bounds in the units of the observations: relative bounds are scaled by
/// `|ĉ_1|`; true magnitudes are used as they are.
pub fn scale_bounds(source: WeightSource, bounds: &[f64], u: &DVector<f64>) -> Vec<f64> {
    if source == WeightSource::TrueCoeffs {
        return bounds.to_vec();
    }
    let c1 = u.mean().abs();
    bounds.iter().map(|v| v * c1).collect()
}

/// Solves one method on one sample set the way a replication does. The
/// cross-validation record is returned when ε was cross-validated.
pub fn recover(
    cfg: &ExperimentConfig,
    bounds: Option<&[f64]>,
    m: &MeasurementSet<f64>,
    split_seed: u64,
    method: Method,
) -> Result<(Option<CvResult<f64>>, RecoveryResult<f64>)> {
    Replicate {
        cfg,
        bounds,
        m,
        split_seed,
    }
    .run(method)
}

struct Replicate<'a> {
    cfg: &'a ExperimentConfig,
    bounds: Option<&'a [f64]>,
    m: &'a MeasurementSet<f64>,
    split_seed: u64,
}

type Fit = (Option<CvResult<f64>>, RecoveryResult<f64>);

impl Replicate<'_> {
    fn scaled_bounds(&self) -> Result<Vec<f64>> {
        let b = self
            .bounds
            .ok_or_else(|| Error::InvalidArgument("method needs a weight source".into()))?;
        Ok(scale_bounds(self.cfg.weight_source, b, self.m.u()))
    }

    fn solve_l1(&self, solver: &L1Solver<f64>) -> Result<Fit> {
        let (cv, eps) = match self.cfg.epsilon {
            EpsilonRule::Fixed { value } => (None, value),
            EpsilonRule::CrossValidation { grid_points } => {
                let (rec, _) = split_rows(self.m.n(), self.split_seed)?;
                let scale = self.m.select_rows(&rec)?.u().norm();
                let grid = default_grid(scale, grid_points);
                let cv = select_epsilon(self.m, solver, Some(&grid), self.split_seed)?;
                let eps = cv.epsilon;
                (Some(cv), eps)
            }
        };
        Ok((cv, solver.solve(self.m, eps)?))
    }

    fn run(&self, method: Method) -> Result<Fit> {
        let eps_w = || default_eps_w(self.m.u().as_slice(), self.cfg.eps_w_scale);
        match method {
            Method::L1 => self.solve_l1(&L1Solver::new(L1Method::Standard)),
            Method::WeightedL1 => {
                let w = damped_weights(&self.scaled_bounds()?, eps_w()?, 1.0)?;
                self.solve_l1(&L1Solver::new(L1Method::Weighted(w)))
            }
            Method::ReweightedL1 => self.solve_l1(&L1Solver::new(L1Method::Reweighted {
                eps_w: eps_w()?,
                max_iter: self.cfg.reweight_iters,
            })),
            Method::Wls => Ok((None, weighted_least_squares(self.m, &self.scaled_bounds()?)?)),
            Method::LsReference => {
                let all: Vec<usize> = (0..self.m.p()).collect();
                let c = least_squares(self.m, &all)?;
                let residual = (self.m.psi() * &c - self.m.u()).norm();
                Ok((
                    None,
                    RecoveryResult {
                        objective: c.lp_norm(1),
                        c: c.iter().copied().collect(),
                        residual,
                        epsilon_used: residual,
                        iterations: 1,
                        converged: true,
                    },
                ))
            }
        }
    }
}

/// Runs the configured sweep. `cache_dir` holds reference solutions.
pub fn run_experiment(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<ErrorReport> {
    let problem = ProblemInstance::new(cfg)?;
    let truth = problem.truth(cache_dir)?;
    let bounds = prior_bounds(&problem, &truth)?;
    let jobs: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    let outcomes: Vec<Vec<(Method, u64, Result<ReplicateRecord>)>> = jobs
        .par_iter()
        .map(|&(n, rep)| {
            let seed = derive_seed(cfg.seed, &[tag::SAMPLES, n as u64, rep as u64]);
            let split_seed = derive_seed(cfg.seed, &[tag::SPLIT, n as u64, rep as u64]);
            let m = match problem.sample(n, seed) {
                Ok(m) => m,
                Err(e) => {
                    let msg = e.to_string();
                    return cfg
                        .methods
                        .iter()
                        .map(|&meth| (meth, seed, Err(Error::Numerical(msg.clone()))))
                        .collect();
                }
            };
            let r = Replicate {
                cfg,
                bounds: bounds.as_deref(),
                m: &m,
                split_seed,
            };
            cfg.methods
                .iter()
                .map(|&method| {
                    let rec = r.run(method).map(|(_, fit)| {
                        let c = fit.coefficients();
                        let (rel_err_mean, rel_err_std, rel_rms) = error_stats(&c, &truth);
                        ReplicateRecord {
                            n,
                            rep,
                            method,
                            seed,
                            epsilon: fit.epsilon_used,
                            converged: fit.converged,
                            rel_err_mean,
                            rel_err_std,
                            rel_rms,
                        }
                    });
                    (method, seed, rec)
                })
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for ((n, rep), per_method) in jobs.into_iter().zip(outcomes) {
        for (method, seed, out) in per_method {
            match out {
                Ok(r) => records.push(r),
                Err(e) => failures.push(FailureRecord {
                    n,
                    rep,
                    method,
                    seed,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok(ErrorReport::aggregate(cfg, records, failures))
}
