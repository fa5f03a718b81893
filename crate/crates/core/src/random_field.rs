//! Karhunen–Loève expansions of stationary random fields on `[0, 1]`.
//!
//! Two covariance kernels are supported:
//!
//! * exponential, `exp(−|x₁ − x₂|/l_c)`, with analytic eigenpairs;
//! * Gaussian, `exp(−(x₁ − x₂)²/l_c²)`, discretised by the Nyström method on
//!   Gauss–Legendre nodes.
//!
//! Eigenfunctions are orthonormal in `L²(0, 1)`.
//!
//! # Exponential kernel
//!
//! The analytic solution lives on the symmetric interval `[−½, ½]`, so a wall
//! coordinate `y ∈ [0, 1]` is shifted to `x = y − ½` before evaluation.
//! Frequencies come in two interleaved families; the `i`-th one (1-based)
//! lies in `((i−1)π, iπ)`:
//!
//! * odd `i`: `1/l_c − ω tan(ω/2) = 0`, `φ_i(x) = cos(ω_i x)/√(½ + sin(ω_i)/(2ω_i))`;
//! * even `i`: `ω + tan(ω/2)/l_c = 0`, `φ_i(x) = sin(ω_i x)/√(½ − sin(ω_i)/(2ω_i))`.
//!
//! In both cases `λ_i = 2 l_c/(l_c² ω_i² + 1)`.

use crate::quadrature::gauss_legendre_on;
use crate::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

/// Eigenvalues below this are treated as zero in the Nyström discretisation.
pub const EIGENVALUE_CLIP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    Gaussian { l_c: f64 },
    Exponential { l_c: f64 },
}

impl Kernel {
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match *self {
            Kernel::Gaussian { l_c } => (-((x1 - x2) / l_c).powi(2)).exp(),
            Kernel::Exponential { l_c } => (-(x1 - x2).abs() / l_c).exp(),
        }
    }

    pub fn correlation_length(&self) -> f64 {
        match *self {
            Kernel::Gaussian { l_c } | Kernel::Exponential { l_c } => l_c,
        }
    }
}

#[derive(Debug, Clone)]
enum Modes {
    Analytic {
        omega: Vec<f64>,
        norm: Vec<f64>,
    },
    Nystrom {
        nodes: Vec<f64>,
        weights: Vec<f64>,
        /// Column `k` holds `φ_k` at the nodes.
        values: DMatrix<f64>,
    },
}

/// Truncated KL expansion with `d` modes.
#[derive(Debug, Clone)]
pub struct KlExpansion {
    kernel: Kernel,
    lambdas: Vec<f64>,
    modes: Modes,
}

fn check_inputs(l_c: f64, d: usize) -> Result<()> {
    if !(l_c > 0.0 && l_c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "correlation length must be positive, got {l_c}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    Ok(())
}

/// Bisection on a sign-changing continuous function, run until the bracket
/// cannot shrink further in floating point.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    let mut flo = f(lo);
    if flo == 0.0 {
        return Some(lo);
    }
    if flo.signum() == f(hi).signum() {
        return None;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

/// Residual of the defining equation of the `i`-th frequency (1-based).
pub fn exponential_root_residual(l_c: f64, i: usize, omega: f64) -> f64 {
    if i % 2 == 1 {
        1.0 / l_c - omega * (0.5 * omega).tan()
    } else {
        omega + (0.5 * omega).tan() / l_c
    }
}

/// `λ(ω) = 2 l_c/(l_c² ω² + 1)`.
pub fn exponential_eigenvalue(l_c: f64, omega: f64) -> f64 {
    2.0 * l_c / (l_c * l_c * omega * omega + 1.0)
}

/// Analytic KL expansion of the exponential kernel.
pub fn exponential_kl(l_c: f64, d: usize) -> Result<KlExpansion> {
    check_inputs(l_c, d)?;
    let mut omega = Vec::with_capacity(d);
    let mut norm = Vec::with_capacity(d);
    for i in 1..=d {
        let (lo, hi) = ((i - 1) as f64 * PI, i as f64 * PI);
        // Pole-free forms of the two root equations.
        let root = if i % 2 == 1 {
            bisect(|w| (0.5 * w).cos() / l_c - w * (0.5 * w).sin(), lo, hi)
        } else {
            bisect(|w| w * (0.5 * w).cos() + (0.5 * w).sin() / l_c, lo, hi)
        };
        let w = root.ok_or_else(|| {
            Error::Numerical(format!("no root bracketed in branch {i}: ({lo}, {hi})"))
        })?;
        let half = if i % 2 == 1 { 0.5 + w.sin() / (2.0 * w) } else { 0.5 - w.sin() / (2.0 * w) };
        omega.push(w);
        norm.push(half.sqrt());
    }
    Ok(KlExpansion {
        kernel: Kernel::Exponential { l_c },
        lambdas: omega.iter().map(|&w| exponential_eigenvalue(l_c, w)).collect(),
        modes: Modes::Analytic { omega, norm },
    })
}

/// Default Nyström grid size for `d` modes.
pub fn default_grid_size(d: usize) -> usize {
    8 * d
}

/// Nyström KL expansion of the Gaussian kernel on `n_grid` Gauss–Legendre nodes.
pub fn gaussian_kl(l_c: f64, d: usize, n_grid: usize) -> Result<KlExpansion> {
    check_inputs(l_c, d)?;
    if n_grid < 4 * d {
        return Err(Error::InvalidArgument(format!(
            "grid of {n_grid} nodes is too coarse for {d} modes (need at least {})",
            4 * d
        )));
    }
    let kernel = Kernel::Gaussian { l_c };
    let (nodes, weights) = gauss_legendre_on(n_grid, 0.0, 1.0);
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b = DMatrix::from_fn(n_grid, n_grid, |i, j| sw[i] * kernel.eval(nodes[i], nodes[j]) * sw[j]);
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..n_grid).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let positive = order
        .iter()
        .take_while(|&&k| eig.eigenvalues[k] >= EIGENVALUE_CLIP)
        .count();
    if positive < d {
        return Err(Error::Numerical(format!(
            "only {positive} numerically positive eigenvalues, {d} requested"
        )));
    }
    let mut lambdas = Vec::with_capacity(d);
    let mut values = DMatrix::zeros(n_grid, d);
    for (k, &col) in order.iter().take(d).enumerate() {
        lambdas.push(eig.eigenvalues[col]);
        let v = eig.eigenvectors.column(col);
        let imax = v.iamax();
        let sign = if v[imax] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n_grid {
            values[(i, k)] = sign * v[i] / sw[i];
        }
    }
    Ok(KlExpansion {
        kernel,
        lambdas,
        modes: Modes::Nystrom {
            nodes,
            weights,
            values,
        },
    })
}

impl KlExpansion {
    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    /// Eigenvalues, nonincreasing.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Frequencies `ω_i` of the exponential kernel.
    pub fn frequencies(&self) -> Option<&[f64]> {
        match &self.modes {
            Modes::Analytic { omega, .. } => Some(omega),
            Modes::Nystrom { .. } => None,
        }
    }

    /// `φ_k(x)` for `x ∈ [0, 1]`, `k` 0-based.
    pub fn eigenfunction(&self, k: usize, x: f64) -> f64 {
        match &self.modes {
            Modes::Analytic { omega, norm } => {
                let s = omega[k] * (x - 0.5);
                if k.is_multiple_of(2) {
                    s.cos() / norm[k]
                } else {
                    s.sin() / norm[k]
                }
            }
            Modes::Nystrom {
                nodes,
                weights,
                values,
            } => {
                let acc: f64 = nodes
                    .iter()
                    .zip(weights)
                    .enumerate()
                    .map(|(i, (&xj, &wj))| wj * self.kernel.eval(x, xj) * values[(i, k)])
                    .sum();
                acc / self.lambdas[k]
            }
        }
    }

    /// `‖φ_k‖_∞` on `[0, 1]`: closed form for the exponential kernel, a dense
    /// sample (2001 points plus the grid nodes) for the Gaussian kernel.
    pub fn sup_norm(&self, k: usize) -> f64 {
        match &self.modes {
            Modes::Analytic { omega, norm } => {
                let peak = if k.is_multiple_of(2) || omega[k] >= PI {
                    1.0
                } else {
                    (0.5 * omega[k]).sin()
                };
                peak / norm[k]
            }
            Modes::Nystrom { nodes, .. } => (0..=2000)
                .map(|i| i as f64 / 2000.0)
                .chain(nodes.iter().copied())
                .map(|x| self.eigenfunction(k, x).abs())
                .fold(0.0, f64::max),
        }
    }

    /// `√λ_k φ_k(x_i)` for every point, as an `n × d` matrix.
    pub fn mode_table(&self, xs: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), self.dim(), |i, k| {
            self.lambdas[k].sqrt() * self.eigenfunction(k, xs[i])
        })
    }

    /// Maximum deviation of the eigenfunction Gram matrix from the identity,
    /// by `n_quad`-point Gauss–Legendre quadrature on `[0, 1]`.
    pub fn orthonormality_error(&self, n_quad: usize) -> f64 {
        let (x, w) = gauss_legendre_on(n_quad, 0.0, 1.0);
        let d = self.dim();
        let vals = DMatrix::from_fn(n_quad, d, |i, k| self.eigenfunction(k, x[i]));
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in a..d {
                let g: f64 = (0..n_quad).map(|i| w[i] * vals[(i, a)] * vals[(i, b)]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `mean + σ Σ_k √λ_k φ_k(x) ξ_k`.
    pub fn eval_field(&self, mean: f64, sigma: f64, x: f64, xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} random variables for {} modes",
                xi.len(),
                self.dim()
            )));
        }
        let sum: f64 = xi
            .iter()
            .enumerate()
            .map(|(k, &z)| self.lambdas[k].sqrt() * self.eigenfunction(k, x) * z)
            .sum();
        Ok(mean + sigma * sum)
    }

    /// Mode functions `ν_i(y) = σ_T √λ_i φ_i(y)` at one point.
    pub fn nu(&self, sigma_t: f64, y: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|k| sigma_t * self.lambdas[k].sqrt() * self.eigenfunction(k, y))
            .collect()
    }

    /// `t_i = ∫₀¹ ν_i(y) dy` by Gauss–Legendre quadrature with enough nodes
    /// to resolve the highest mode.
    pub fn nu_integrals(&self, sigma_t: f64) -> Vec<f64> {
        let top = self.frequencies().map_or(0.0, |w| w[w.len() - 1]);
        let n = 64 + (2.0 * top) as usize;
        let (x, w) = gauss_legendre_on(n, 0.0, 1.0);
        (0..self.dim())
            .map(|k| {
                let integral: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| wi * self.eigenfunction(k, xi))
                    .sum();
                sigma_t * self.lambdas[k].sqrt() * integral
            })
            .collect()
    }

    pub fn write_eigenvalues_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["k", "lambda"])?;
        for (k, l) in self.lambdas.iter().enumerate() {
            wr.write_record([(k + 1).to_string(), format!("{l:.17e}")])?;
        }
        wr.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    /// Eigenfunctions sampled on `xs`: columns `x, phi1, ..., phid`.
    pub fn write_eigenfunctions_csv<W: Write>(&self, xs: &[f64], w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["x".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("phi{k}")));
        wr.write_record(&header)?;
        for &x in xs {
            let mut rec = vec![format!("{x:.17e}")];
            rec.extend((0..self.dim()).map(|k| format!("{:.17e}", self.eigenfunction(k, x))));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn save_eigenvalues_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_eigenvalues_csv(f)
    }
}
