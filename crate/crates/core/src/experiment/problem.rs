//! Test problems: a PC basis, a way to draw observations, and the truth.

use super::config::{derive_seed, hash_json, ExperimentConfig, Problem};
use crate::elliptic::EllipticModel;
use crate::pc_basis::{assemble, build_basis, design_matrix, MeasurementSet, OrderedBasis};
use crate::solvers::least_squares_matrix;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Seed tags that keep the random streams of a run apart.
pub(crate) mod tag {
    pub const TRUTH: u64 = 1;
    pub const SAMPLES: u64 = 2;
    pub const REFERENCE: u64 = 3;
    pub const BOUNDS: u64 = 4;
    pub const SPLIT: u64 = 5;
}

/// A configured problem ready to produce measurement sets.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    cfg: ExperimentConfig,
    basis: OrderedBasis,
    planted: Option<DVector<f64>>,
    model: Option<EllipticModel>,
}

impl ProblemInstance {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let basis = build_basis(cfg.d, cfg.q, cfg.p_keep)?;
        let p = basis.len();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[tag::TRUTH]));
        let (planted, model) = match cfg.problem {
            Problem::SyntheticSparse => {
                if cfg.sparsity > p {
                    return Err(Error::InvalidArgument(format!(
                        "sparsity {} exceeds basis size {p}",
                        cfg.sparsity
                    )));
                }
                let mut c = DVector::zeros(p);
                c[0] = 1.0;
                let mut rest: Vec<usize> = (1..p).collect();
                rest.shuffle(&mut rng);
                for &j in &rest[..cfg.sparsity - 1] {
                    let mag: f64 = rng.random_range(0.1..1.0);
                    c[j] = if rng.random_bool(0.5) { mag } else { -mag };
                }
                (Some(c), None)
            }
            Problem::SyntheticDecay => {
                let mut mags: Vec<f64> = (2..=p).map(|j| (j as f64).powf(-cfg.decay_rate)).collect();
                mags.shuffle(&mut rng);
                let mut c = DVector::zeros(p);
                c[0] = 1.0;
                for (j, m) in mags.into_iter().enumerate() {
                    c[j + 1] = if rng.random_bool(0.5) { m } else { -m };
                }
                (Some(c), None)
            }
            Problem::Elliptic => (None, Some(EllipticModel::new(cfg.elliptic.clone())?)),
        };
        Ok(Self {
            cfg: cfg.clone(),
            basis,
            planted,
            model,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn basis(&self) -> &OrderedBasis {
        &self.basis
    }

    pub fn model(&self) -> Option<&EllipticModel> {
        self.model.as_ref()
    }

    /// The planted coefficient vector of a synthetic problem.
    pub fn planted(&self) -> Option<&DVector<f64>> {
        self.planted.as_ref()
    }

    /// `n` uniform points on `[−1, 1]^d`.
    pub fn draw_points(&self, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, self.cfg.d, |_, _| rng.random_range(-1.0..=1.0))
    }

    /// Noise-free observations at the given points.
    pub fn evaluate(&self, xi: &DMatrix<f64>) -> Result<DVector<f64>> {
        match (&self.planted, &self.model) {
            (Some(c), _) => Ok(design_matrix(&self.basis, xi)? * c),
            (None, Some(m)) => m.sample_qoi(xi),
            (None, None) => unreachable!("instance has a truth or a model"),
        }
    }

    /// `n` fresh observations with the configured noise added.
    pub fn sample(&self, n: usize, seed: u64) -> Result<MeasurementSet<f64>> {
        let xi = self.draw_points(n, seed);
        let mut u = self.evaluate(&xi)?;
        if self.cfg.noise_std > 0.0 {
            let normal = Normal::new(0.0, self.cfg.noise_std)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            for v in u.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        assemble(&self.basis, &xi, &u)
    }

    /// Coefficients errors are measured against: the planted vector, or the
    /// cached least-squares reference for the elliptic problem.
    pub fn truth(&self, cache_dir: Option<&Path>) -> Result<DVector<f64>> {
        if let Some(c) = &self.planted {
            return Ok(c.clone());
        }
        let big_n = self
            .cfg
            .reference_samples
            .unwrap_or(10 * self.basis.len());
        reference_solution(self, big_n, derive_seed(self.cfg.seed, &[tag::REFERENCE]), cache_dir)
    }
}

#[derive(Serialize, Deserialize)]
struct CachedReference {
    key: String,
    big_n: usize,
    seed: u64,
    c: Vec<f64>,
}

/// Least-squares fit on `big_n ≥ 3P` fresh noise-free samples. With a cache
/// directory the result is stored as `reference-<key>.json`, the key being a
/// hash of everything the fit depends on, and reused on later calls.
pub fn reference_solution(
    problem: &ProblemInstance,
    big_n: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<DVector<f64>> {
    let p = problem.basis.len();
    if big_n < 3 * p {
        return Err(Error::InvalidArgument(format!(
            "reference fit needs at least 3P = {} samples, got {big_n}",
            3 * p
        )));
    }
    let cfg = &problem.cfg;
    let key = hash_json(&serde_json::json!({
        "problem": cfg.problem,
        "d": cfg.d,
        "q": cfg.q,
        "p_keep": cfg.p_keep,
        "seed": cfg.seed,
        "sparsity": cfg.sparsity,
        "decay_rate": cfg.decay_rate,
        "elliptic": cfg.elliptic,
        "big_n": big_n,
        "sample_seed": seed,
    }));
    let path = cache_dir.map(|d| d.join(format!("reference-{}.json", &key[..16])));
    if let Some(path) = &path {
        if let Ok(text) = std::fs::read_to_string(path) {
            let cached: CachedReference = serde_json::from_str(&text)?;
            if cached.key == key && cached.c.len() == p {
                return Ok(DVector::from_vec(cached.c));
            }
        }
    }
    let xi = problem.draw_points(big_n, seed);
    let u = problem.evaluate(&xi)?;
    let psi = design_matrix(&problem.basis, &xi)?;
    let support: Vec<usize> = (0..p).collect();
    let c = least_squares_matrix(&psi, &u, &support)?;
    if let Some(path) = &path {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let record = CachedReference {
            key,
            big_n,
            seed,
            c: c.iter().copied().collect(),
        };
        std::fs::write(path, serde_json::to_string(&record)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::Method;

    fn sparse_cfg() -> ExperimentConfig {
        ExperimentConfig {
            problem: Problem::SyntheticSparse,
            d: 3,
            q: 3,
            sparsity: 5,
            methods: vec![Method::L1],
            ..Default::default()
        }
    }

    #[test]
    fn planted_sparse_has_requested_support() {
        let inst = ProblemInstance::new(&sparse_cfg()).unwrap();
        let c = inst.planted().unwrap();
        assert_eq!(c.len(), 20);
        assert_eq!(c[0], 1.0);
        assert_eq!(c.iter().filter(|v| **v != 0.0).count(), 5);
    }

    #[test]
    fn planted_decay_magnitudes() {
        let cfg = ExperimentConfig { d: 3, q: 2, ..Default::default() };
        let inst = ProblemInstance::new(&cfg).unwrap();
        let mut mags: Vec<f64> = inst.planted().unwrap().iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (j, m) in mags.iter().enumerate() {
            assert_eq!(*m, ((j + 1) as f64).powf(-2.0));
        }
    }

    #[test]
    fn reference_recovers_planted_vector() {
        let inst = ProblemInstance::new(&sparse_cfg()).unwrap();
        let c = reference_solution(&inst, 60, 9, None).unwrap();
        assert!((c - inst.planted().unwrap()).amax() < 1e-8);
        assert!(reference_solution(&inst, 59, 9, None).is_err());
    }

    #[test]
    fn reference_cache_hit_is_bitwise_identical() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            problem: Problem::Elliptic,
            d: 2,
            q: 2,
            elliptic: crate::elliptic::EllipticConfig { d: 2, mesh_n: 64, ..Default::default() },
            methods: vec![Method::L1],
            weight_source: crate::experiment::WeightSource::None,
            ..Default::default()
        };
        let inst = ProblemInstance::new(&cfg).unwrap();
        let a = inst.truth(Some(dir.path())).unwrap();
        let files: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let b = inst.truth(Some(dir.path())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, inst.truth(None).unwrap());
    }

    #[test]
    fn noise_is_added_with_requested_spread() {
        let cfg = ExperimentConfig { noise_std: 0.5, ..sparse_cfg() };
        let inst = ProblemInstance::new(&cfg).unwrap();
        let m = inst.sample(4000, 3).unwrap();
        let clean = inst.evaluate(m.xi()).unwrap();
        let e = m.u() - clean;
        let sd = (e.norm_squared() / 4000.0).sqrt();
        assert!((sd - 0.5).abs() < 0.03, "{sd}");
    }
}
