//! One-dimensional stochastic diffusion problem
//! `−(a(x, ξ) u′)′ = 1` on `(0, 1)`, `u(0) = u(1) = 0`, with conductivity
//! `a(x, ξ) = ā + σ_a Σ_k √λ_k φ_k(x) ξ_k` built from a Gaussian-kernel KL
//! expansion. The quantity of interest is `u(x_q, ξ)`.
//!
//! The discretisation is vertex-centred finite volumes on a uniform mesh of
//! `mesh_n` cells: conductivity is sampled at the nodes and averaged
//! harmonically onto the faces, and the tridiagonal system is solved by the
//! Thomas algorithm. The scheme is exact for constant `a` and second-order
//! accurate for smooth `a`.

use crate::pc_basis::eval_legendre_1d;
use crate::random_field::{default_grid_size, gaussian_kl, KlExpansion};
use crate::solvers::least_squares_matrix;
use crate::weights::{fit_gk, gk_from_radius};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EllipticConfig {
    pub a_bar: f64,
    pub sigma_a: f64,
    pub d: usize,
    pub l_c: f64,
    pub mesh_n: usize,
    pub qoi_x: f64,
    /// Nyström grid for the KL expansion; `None` means `8d`.
    pub kl_grid: Option<usize>,
    /// Skip the construction-time check that the worst-case conductivity
    /// `ā − σ_a Σ √λ_k ‖φ_k‖_∞` is positive. Each realization is still checked
    /// on the mesh when solved.
    pub skip_bound_check: bool,
}

impl Default for EllipticConfig {
    fn default() -> Self {
        Self {
            a_bar: 0.1,
            sigma_a: 0.021,
            d: 10,
            l_c: 1.0 / 16.0,
            mesh_n: 256,
            qoi_x: 0.5,
            kl_grid: None,
            skip_bound_check: false,
        }
    }
}

impl EllipticConfig {
    /// The 40-dimensional configuration. Its worst-case conductivity bound is
    /// negative, so the construction check is disabled.
    pub fn paper_scale() -> Self {
        Self {
            d: 40,
            skip_bound_check: true,
            ..Self::default()
        }
    }
}

/// An assembled forward model: configuration, KL expansion and the KL modes
/// tabulated at the mesh nodes.
#[derive(Debug, Clone)]
pub struct EllipticModel {
    cfg: EllipticConfig,
    kl: KlExpansion,
    nodes: Vec<f64>,
    modes: DMatrix<f64>,
    a_min: f64,
}

impl EllipticModel {
    pub fn new(cfg: EllipticConfig) -> Result<Self> {
        let kl = gaussian_kl(cfg.l_c, cfg.d, cfg.kl_grid.unwrap_or(default_grid_size(cfg.d)))?;
        Self::with_expansion(cfg, kl)
    }

    pub fn with_expansion(cfg: EllipticConfig, kl: KlExpansion) -> Result<Self> {
        if cfg.mesh_n < 8 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs at least 8 cells, got {}",
                cfg.mesh_n
            )));
        }
        if !(cfg.qoi_x > 0.0 && cfg.qoi_x < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "QOI location {} is not inside (0, 1)",
                cfg.qoi_x
            )));
        }
        if kl.dim() != cfg.d {
            return Err(Error::DimensionMismatch(format!(
                "expansion has {} modes, configuration asks for {}",
                kl.dim(),
                cfg.d
            )));
        }
        if !(cfg.a_bar > 0.0) || !(cfg.sigma_a >= 0.0) {
            return Err(Error::InvalidArgument(
                "mean conductivity must be positive and sigma_a nonnegative".into(),
            ));
        }
        let a_min = cfg.a_bar
            - cfg.sigma_a
                * (0..cfg.d)
                    .map(|k| kl.lambdas()[k].sqrt() * kl.sup_norm(k))
                    .sum::<f64>();
        if a_min <= 0.0 && !cfg.skip_bound_check {
            return Err(Error::InvalidArgument(format!(
                "worst-case conductivity {a_min:.4e} is not positive; \
                 enable skip_bound_check to accept per-realization checks"
            )));
        }
        let nodes: Vec<f64> = (0..=cfg.mesh_n)
            .map(|i| i as f64 / cfg.mesh_n as f64)
            .collect();
        let modes = kl.mode_table(&nodes);
        Ok(Self {
            cfg,
            kl,
            nodes,
            modes,
            a_min,
        })
    }

    pub fn config(&self) -> &EllipticConfig {
        &self.cfg
    }

    pub fn expansion(&self) -> &KlExpansion {
        &self.kl
    }

    /// `ā − σ_a Σ √λ_k ‖φ_k‖_∞`; may be negative when the check was skipped.
    pub fn a_min(&self) -> f64 {
        self.a_min
    }

    /// Conductivity at the mesh nodes.
    pub fn nodal_conductivity(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.cfg.d {
            return Err(Error::DimensionMismatch(format!(
                "{} random variables for a {}-dimensional model",
                xi.len(),
                self.cfg.d
            )));
        }
        Ok((0..self.nodes.len())
            .map(|i| {
                let s: f64 = (0..self.cfg.d).map(|k| self.modes[(i, k)] * xi[k]).sum();
                self.cfg.a_bar + self.cfg.sigma_a * s
            })
            .collect())
    }

    /// Nodal solution `u_0, …, u_n` (boundary values included).
    pub fn solve_field(&self, xi: &[f64]) -> Result<Vec<f64>> {
        let a = self.nodal_conductivity(xi)?;
        if let Some((i, v)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Numerical(format!(
                "conductivity {v:.4e} is not positive at x = {}",
                self.nodes[i]
            )));
        }
        solve_diffusion(&a)
    }

    /// `u(x_q, ξ)`, linearly interpolated between nodes when `x_q` is not a node.
    pub fn qoi(&self, xi: &[f64]) -> Result<f64> {
        let u = self.solve_field(xi)?;
        let n = self.cfg.mesh_n as f64;
        let s = self.cfg.qoi_x * n;
        let i = (s.floor() as usize).min(self.cfg.mesh_n - 1);
        let t = s - i as f64;
        Ok(if t == 0.0 { u[i] } else { (1.0 - t) * u[i] + t * u[i + 1] })
    }

    /// QOI for every row of `xi`, in parallel.
    pub fn sample_qoi(&self, xi: &DMatrix<f64>) -> Result<DVector<f64>> {
        let rows: Vec<Vec<f64>> = (0..xi.nrows())
            .map(|i| xi.row(i).iter().copied().collect())
            .collect();
        let u: Result<Vec<f64>> = rows.par_iter().map(|r| self.qoi(r)).collect();
        Ok(DVector::from_vec(u?))
    }

    /// Degree-`q` univariate coefficients of the QOI along coordinate `k`, with
    /// every other coordinate held at zero, fitted by least squares to
    /// `n_samples` uniform draws.
    pub fn one_dim_study(&self, k: usize, q: usize, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
        if k >= self.cfg.d {
            return Err(Error::InvalidArgument(format!(
                "dimension {k} out of range for d = {}",
                self.cfg.d
            )));
        }
        if n_samples < 3 * (q + 1) {
            return Err(Error::InvalidArgument(format!(
                "{n_samples} samples are too few for degree {q} (need {})",
                3 * (q + 1)
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let z: Vec<f64> = (0..n_samples).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let u: Result<Vec<f64>> = z
            .par_iter()
            .map(|&zk| {
                let mut xi = vec![0.0; self.cfg.d];
                xi[k] = zk;
                self.qoi(&xi)
            })
            .collect();
        let u = DVector::from_vec(u?);
        let mut psi = DMatrix::zeros(n_samples, q + 1);
        for (i, &zi) in z.iter().enumerate() {
            for a in 0..=q {
                psi[(i, a)] = eval_legendre_1d(a, zi)?;
            }
        }
        let support: Vec<usize> = (0..=q).collect();
        Ok(least_squares_matrix(&psi, &u, &support)?.iter().copied().collect())
    }

    /// Decay rates `g_k` fitted to the one-dimensional studies of every coordinate.
    pub fn fitted_decay_rates(&self, q: usize, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
        let degrees: Vec<u32> = (0..=q as u32).collect();
        (0..self.cfg.d)
            .map(|k| fit_gk(&degrees, &self.one_dim_study(k, q, n_samples, seed)?))
            .collect()
    }

    /// `r_k = σ_a √λ_k ‖φ_k‖_∞ / a_min`.
    pub fn analyticity_ratios(&self) -> Result<Vec<f64>> {
        if self.a_min <= 0.0 {
            return Err(Error::Numerical(format!(
                "worst-case conductivity {:.4e} is not positive",
                self.a_min
            )));
        }
        Ok((0..self.cfg.d)
            .map(|k| self.cfg.sigma_a * self.kl.lambdas()[k].sqrt() * self.kl.sup_norm(k) / self.a_min)
            .collect())
    }

    /// Decay rates from the analyticity ratios, `g_k = −ln(r_k/(√3 ln 2))`.
    pub fn theoretical_decay_rates(&self) -> Result<Vec<f64>> {
        gk_from_radius(&self.analyticity_ratios()?)
    }
}

/// Finite-volume solve of `−(a u′)′ = 1`, homogeneous Dirichlet data, given
/// positive nodal conductivities on a uniform mesh.
pub fn solve_diffusion(a: &[f64]) -> Result<Vec<f64>> {
    let n = a.len() - 1;
    if n < 2 {
        return Err(Error::InvalidArgument("mesh needs at least two cells".into()));
    }
    let h = 1.0 / n as f64;
    let face: Vec<f64> = a.windows(2).map(|w| 2.0 * w[0] * w[1] / (w[0] + w[1])).collect();
    // Interior unknowns u_1..u_{n-1}; rows scaled by h.
    let m = n - 1;
    let mut diag: Vec<f64> = (0..m).map(|i| face[i] + face[i + 1]).collect();
    let off: Vec<f64> = (0..m.saturating_sub(1)).map(|i| -face[i + 1]).collect();
    let mut rhs = vec![h * h; m];
    for i in 1..m {
        let f = off[i - 1] / diag[i - 1];
        diag[i] -= f * off[i - 1];
        rhs[i] -= f * rhs[i - 1];
        if !(diag[i] > 0.0) {
            return Err(Error::Numerical(format!("singular pivot at node {}", i + 1)));
        }
    }
    let mut u = vec![0.0; n + 1];
    u[m] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        u[i + 1] = (rhs[i] - off[i] * u[i + 2]) / diag[i];
    }
    Ok(u)
}
