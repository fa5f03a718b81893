//! Weighted null-space constants
//! `β_W = max_{c ∈ 𝒩(Ψ)} ‖(Wc)_C‖₁ / ‖(Wc)_{Cᶜ}‖₁` and `γ_W = β_W/(1 + β_W)`.
//!
//! For a fixed sign pattern `σ` on `C` the numerator is linear, so
//! `max σᵀ(Wc)_C` subject to `c = Zz`, `‖(Wc)_{Cᶜ}‖₁ ≤ 1` is a linear program
//! (`Z` spans the null space). The maximum over all patterns is exact. `σ`
//! and `−σ` give the same value, so only patterns with a leading `+1` are
//! solved.

use super::ric::{normalize_columns, ric_bruteforce};
use super::simplex::{maximize, LpOutcome};
use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest support for which the sign-pattern enumeration is used.
pub const MAX_EXACT_SUPPORT: usize = 12;
/// Relative singular-value cutoff defining the numerical null space.
pub const NULL_SPACE_TOL: f64 = 1e-10;
/// Random directions used by the Monte Carlo lower bound.
pub const DEFAULT_MC_DIRECTIONS: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpaceConstants<T> {
    /// `β_W`; infinite when a null vector vanishes off `C`.
    pub beta: T,
    /// `β/(1+β)`, equal to 1 when `β` is infinite.
    pub gamma: T,
    /// True for the exhaustive LP value, false for a Monte Carlo lower bound.
    pub exact: bool,
    /// Null-space dimension.
    pub null_dim: usize,
}

impl<T: Real> NullSpaceConstants<T> {
    fn from_beta(beta: f64, exact: bool, null_dim: usize) -> Self {
        let gamma = if beta.is_infinite() { 1.0 } else { beta / (1.0 + beta) };
        Self {
            beta: T::lit(beta),
            gamma: T::lit(gamma),
            exact,
            null_dim,
        }
    }
}

/// Orthonormal basis of `𝒩(Ψ)` as the columns of a `P × r` matrix, from the
/// SVD of `Ψ` padded with zero rows to a square matrix.
pub fn null_space_basis(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = psi.shape();
    let mut sq = DMatrix::zeros(n.max(p), p);
    sq.view_mut((0, 0), (n, p)).copy_from(psi);
    let svd = SVD::new(sq, false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.max();
    let cut = NULL_SPACE_TOL * smax.max(f64::MIN_POSITIVE);
    let cols: Vec<usize> = (0..p).filter(|&i| svd.singular_values[i] <= cut).collect();
    DMatrix::from_fn(p, cols.len(), |j, k| vt[(cols[k], j)])
}

fn check_inputs(p: usize, w: &[f64], support: &[usize]) -> Result<()> {
    if w.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {p} columns",
            w.len()
        )));
    }
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("weights must be finite and positive".into()));
    }
    if support.is_empty() {
        return Err(Error::InvalidArgument("support set is empty".into()));
    }
    let mut seen = vec![false; p];
    for &j in support {
        if j >= p || seen[j] {
            return Err(Error::InvalidArgument(format!(
                "support index {j} is out of range or repeated"
            )));
        }
        seen[j] = true;
    }
    if support.len() == p {
        return Err(Error::InvalidArgument("support covers every column".into()));
    }
    Ok(())
}

fn complement(p: usize, support: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; p];
    for &j in support {
        inside[j] = true;
    }
    (0..p).filter(|&j| !inside[j]).collect()
}

/// LP for one sign pattern. Variables `[z⁺ (r), z⁻ (r), t (m)]`; rows
/// `±w_j(Zz)_j − t_j ≤ 0` for `j ∈ Cᶜ` and `Σ t_j ≤ 1`.
fn pattern_value(z: &DMatrix<f64>, w: &[f64], sup: &[usize], comp: &[usize], sigma: &[f64]) -> Result<f64> {
    let r = z.ncols();
    let m = comp.len();
    let nvar = 2 * r + m;
    let mut a = DMatrix::zeros(2 * m + 1, nvar);
    for (i, &j) in comp.iter().enumerate() {
        for k in 0..r {
            let v = w[j] * z[(j, k)];
            a[(2 * i, k)] = v;
            a[(2 * i, r + k)] = -v;
            a[(2 * i + 1, k)] = -v;
            a[(2 * i + 1, r + k)] = v;
        }
        a[(2 * i, 2 * r + i)] = -1.0;
        a[(2 * i + 1, 2 * r + i)] = -1.0;
        a[(2 * m, 2 * r + i)] = 1.0;
    }
    let mut b = vec![0.0; 2 * m + 1];
    b[2 * m] = 1.0;
    let mut c = vec![0.0; nvar];
    for k in 0..r {
        let g: f64 = sup.iter().zip(sigma).map(|(&j, &s)| s * w[j] * z[(j, k)]).sum();
        c[k] = g;
        c[r + k] = -g;
    }
    Ok(match maximize(&c, &a, &b)? {
        LpOutcome::Optimal { value, .. } => value,
        LpOutcome::Unbounded => f64::INFINITY,
    })
}

fn exact_beta(z: &DMatrix<f64>, w: &[f64], support: &[usize]) -> Result<f64> {
    let p = z.nrows();
    let comp = complement(p, support);
    let k = support.len();
    let patterns: Vec<u64> = (0..1u64 << (k - 1)).collect();
    let values: Result<Vec<f64>> = patterns
        .par_iter()
        .map(|&bits| {
            let sigma: Vec<f64> = (0..k)
                .map(|i| if i > 0 && (bits >> (i - 1)) & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            pattern_value(z, w, support, &comp, &sigma)
        })
        .collect();
    Ok(values?.into_iter().fold(0.0, f64::max))
}

fn ratio(c: &DVector<f64>, w: &[f64], support: &[usize], comp: &[usize]) -> f64 {
    let num: f64 = support.iter().map(|&j| (w[j] * c[j]).abs()).sum();
    let den: f64 = comp.iter().map(|&j| (w[j] * c[j]).abs()).sum();
    if den == 0.0 {
        if num == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        num / den
    }
}

fn mc_beta(z: &DMatrix<f64>, w: &[f64], support: &[usize], directions: usize, seed: u64) -> f64 {
    let comp = complement(z.nrows(), support);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = z.ncols();
    (0..directions)
        .map(|_| {
            let g = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
            ratio(&(z * g), w, support, &comp)
        })
        .fold(0.0, f64::max)
}

fn prepare(psi: &DMatrix<f64>, w: &[f64], support: &[usize]) -> Result<DMatrix<f64>> {
    check_inputs(psi.ncols(), w, support)?;
    Ok(null_space_basis(psi))
}

/// `β_W` and `γ_W` for the support `C`. Exact (sign-pattern LPs) when
/// `|C| ≤ 12`, otherwise a Monte Carlo lower bound over random null-space
/// directions. A trivial null space gives `β = 0`.
pub fn beta_gamma<T: Real>(
    psi: &DMatrix<T>,
    w: &[T],
    support: &[usize],
) -> Result<NullSpaceConstants<T>> {
    let psi = psi.map(|x| x.as_f64());
    let w: Vec<f64> = w.iter().map(|x| x.as_f64()).collect();
    let z = prepare(&psi, &w, support)?;
    if z.ncols() == 0 {
        return Ok(NullSpaceConstants::from_beta(0.0, true, 0));
    }
    if support.len() <= MAX_EXACT_SUPPORT {
        Ok(NullSpaceConstants::from_beta(exact_beta(&z, &w, support)?, true, z.ncols()))
    } else {
        let b = mc_beta(&z, &w, support, DEFAULT_MC_DIRECTIONS, 0);
        Ok(NullSpaceConstants::from_beta(b, false, z.ncols()))
    }
}

/// Monte Carlo lower bound on `β_W` from `directions` Gaussian null-space draws.
pub fn beta_gamma_mc<T: Real>(
    psi: &DMatrix<T>,
    w: &[T],
    support: &[usize],
    directions: usize,
    seed: u64,
) -> Result<NullSpaceConstants<T>> {
    let psi = psi.map(|x| x.as_f64());
    let w: Vec<f64> = w.iter().map(|x| x.as_f64()).collect();
    let z = prepare(&psi, &w, support)?;
    if z.ncols() == 0 {
        return Ok(NullSpaceConstants::from_beta(0.0, true, 0));
    }
    let b = mc_beta(&z, &w, support, directions, seed);
    Ok(NullSpaceConstants::from_beta(b, false, z.ncols()))
}

/// Values of the weighted/unweighted sandwich and the RIC bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBoundReport {
    pub beta_w: f64,
    pub beta_i: f64,
    /// `min_C w / max_{Cᶜ} w`.
    pub c_lower: f64,
    /// `max_C w / min_{Cᶜ} w`.
    pub c_upper: f64,
    pub lower: f64,
    pub upper: f64,
    pub delta_2c: f64,
    /// `√2 δ/(1 − δ)`, present when `δ_{2|C|} < 1`.
    pub ric_bound: Option<f64>,
    pub sandwich_holds: bool,
    pub ric_bound_holds: Option<bool>,
}

/// Evaluates `c·β_I ≤ β_W ≤ C·β_I` and, when `δ_{2|C|} < 1`,
/// `β_I ≤ √2 δ_{2|C|}/(1 − δ_{2|C|})`. All quantities use the
/// column-normalized matrix, the convention of [`ric_bruteforce`]. Violations
/// are reported, not raised. Comparisons allow a relative slack of 1e-9.
pub fn check_beta_bounds<T: Real>(
    psi: &DMatrix<T>,
    w: &[T],
    support: &[usize],
) -> Result<BetaBoundReport> {
    let a = normalize_columns(&psi.map(|x| x.as_f64()))?;
    let w: Vec<f64> = w.iter().map(|x| x.as_f64()).collect();
    if support.len() > MAX_EXACT_SUPPORT {
        return Err(Error::TooLarge(format!(
            "support of size {} exceeds the exact limit {MAX_EXACT_SUPPORT}",
            support.len()
        )));
    }
    let bw = beta_gamma(&a, &w, support)?.beta;
    let bi = beta_gamma(&a, &vec![1.0; a.ncols()], support)?.beta;
    let comp = complement(a.ncols(), support);
    let on = |set: &[usize], f: fn(f64, f64) -> f64, init: f64| set.iter().map(|&j| w[j]).fold(init, f);
    let c_lower = on(support, f64::min, f64::INFINITY) / on(&comp, f64::max, 0.0);
    let c_upper = on(support, f64::max, 0.0) / on(&comp, f64::min, f64::INFINITY);
    let slack = |x: f64| x.abs() * 1e-9 + 1e-12;
    let lower = c_lower * bi;
    let upper = c_upper * bi;
    let sandwich_holds = lower <= bw + slack(bw) && bw <= upper + slack(upper);
    let s2 = (2 * support.len()).min(a.ncols());
    let delta_2c = ric_bruteforce(&a, s2)?.delta;
    let ric_bound = (delta_2c < 1.0).then(|| 2f64.sqrt() * delta_2c / (1.0 - delta_2c));
    let ric_bound_holds = ric_bound.map(|b| bi <= b + slack(b));
    Ok(BetaBoundReport {
        beta_w: bw,
        beta_i: bi,
        c_lower,
        c_upper,
        lower,
        upper,
        delta_2c,
        ric_bound,
        sandwich_holds,
        ric_bound_holds,
    })
}

/// `min ‖Wc‖₁ s.t. Ψc = u`, evaluated through its dual
/// `max uᵀv s.t. |ψ_jᵀv| ≤ w_j`. Returns `None` when the dual is unbounded,
/// i.e. `u` is outside the range of `Ψ`.
pub fn basis_pursuit_value(psi: &DMatrix<f64>, u: &DVector<f64>, w: &[f64]) -> Result<Option<f64>> {
    let (n, p) = psi.shape();
    if u.len() != n || w.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "matrix {n}×{p}, {} observations, {} weights",
            u.len(),
            w.len()
        )));
    }
    if w.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("weights must be finite and positive".into()));
    }
    let mut a = DMatrix::zeros(2 * p, 2 * n);
    for j in 0..p {
        for i in 0..n {
            let v = psi[(i, j)];
            a[(2 * j, i)] = v;
            a[(2 * j, n + i)] = -v;
            a[(2 * j + 1, i)] = -v;
            a[(2 * j + 1, n + i)] = v;
        }
    }
    let b: Vec<f64> = w.iter().flat_map(|&x| [x, x]).collect();
    let c: Vec<f64> = u.iter().copied().chain(u.iter().map(|x| -x)).collect();
    Ok(match maximize(&c, &a, &b)? {
        LpOutcome::Optimal { value, .. } => Some(value),
        LpOutcome::Unbounded => None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc_basis::{build_basis, design_matrix};
    use rand::Rng;

    fn example(alpha: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 3, &[alpha, 0.0, 1.0, 0.0, alpha, 1.0])
    }

    #[test]
    fn null_space_of_example() {
        let z = null_space_basis(&example(3.0));
        assert_eq!(z.ncols(), 1);
        let v = z.column(0) / z[(0, 0)];
        assert!((v[1] - 1.0).abs() < 1e-12 && (v[2] + 3.0).abs() < 1e-12);
        assert!((example(3.0) * z).norm() < 1e-12);
    }

    #[test]
    fn example_beta_is_half_alpha() {
        for alpha in [0.5, 1.0, 2.0, 3.0, 7.0] {
            let nc = beta_gamma(&example(alpha), &[1.0; 3], &[2]).unwrap();
            assert!(nc.exact);
            assert!((nc.beta - alpha / 2.0).abs() < 1e-10, "alpha {alpha}: {}", nc.beta);
            assert!((nc.gamma - nc.beta / (1.0 + nc.beta)).abs() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_in_support_weights() {
        let psi = example(3.0);
        let b1 = beta_gamma(&psi, &[1.0, 1.0, 1.0], &[2]).unwrap().beta;
        let b2 = beta_gamma(&psi, &[1.0, 1.0, 0.1], &[2]).unwrap().beta;
        assert!((b2 - b1 / 10.0).abs() < 1e-12);
    }

    #[test]
    fn support_only_null_vector_is_unbounded() {
        // Columns 0 and 1 are equal, so (1, −1, 0) is a null vector supported on C.
        let psi = DMatrix::from_row_slice(2, 3, &[1.0f64, 1.0, 0.0, 2.0, 2.0, 1.0]);
        let nc = beta_gamma(&psi, &[1.0; 3], &[0, 1]).unwrap();
        assert!(nc.beta.is_infinite());
        assert_eq!(nc.gamma, 1.0);
    }

    #[test]
    fn trivial_null_space() {
        let nc = beta_gamma(&DMatrix::<f64>::identity(3, 3), &[1.0; 3], &[0]).unwrap();
        assert_eq!((nc.beta, nc.null_dim), (0.0, 0));
    }

    #[test]
    fn input_validation() {
        let psi = example(1.0);
        assert!(beta_gamma(&psi, &[1.0; 2], &[0]).is_err());
        assert!(beta_gamma(&psi, &[1.0, 0.0, 1.0], &[0]).is_err());
        assert!(beta_gamma(&psi, &[1.0; 3], &[]).is_err());
        assert!(beta_gamma(&psi, &[1.0; 3], &[0, 0]).is_err());
        assert!(beta_gamma(&psi, &[1.0; 3], &[0, 1, 2]).is_err());
    }

    fn random_legendre(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let basis = build_basis(8, 3, Some(p)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = DMatrix::from_fn(n, 8, |_, _| rng.random_range(-1.0..=1.0));
        design_matrix(&basis, &xi).unwrap()
    }

    #[test]
    fn monte_carlo_never_exceeds_exact() {
        for seed in 0..4 {
            let psi = random_legendre(8, 14, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            let w: Vec<f64> = (0..14).map(|_| rng.random_range(0.5..2.0)).collect();
            let sup = [1, 4, 9];
            let exact = beta_gamma(&psi, &w, &sup).unwrap().beta;
            let mc = beta_gamma_mc(&psi, &w, &sup, 5000, seed).unwrap();
            assert!(!mc.exact);
            assert!(mc.beta <= exact + 1e-9);
            assert!(mc.beta > 0.3 * exact);
        }
    }

    #[test]
    fn large_support_falls_back_to_sampling() {
        let psi = random_legendre(10, 30, 3);
        let sup: Vec<usize> = (0..13).collect();
        let nc = beta_gamma(&psi, &[1.0; 30], &sup).unwrap();
        assert!(!nc.exact);
    }

    #[test]
    fn uniform_weights_collapse_sandwich() {
        let psi = random_legendre(10, 20, 1);
        let r = check_beta_bounds(&psi, &[2.0; 20], &[0, 5]).unwrap();
        assert_eq!((r.c_lower, r.c_upper), (1.0, 1.0));
        assert!((r.beta_w - r.beta_i).abs() < 1e-9 * (1.0 + r.beta_i));
        assert!(r.sandwich_holds);
    }

    #[test]
    fn random_instances_satisfy_bounds() {
        for seed in 0..5 {
            let psi = random_legendre(10, 20, 10 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..20).map(|_| rng.random_range(0.2..5.0)).collect();
            let r = check_beta_bounds(&psi, &w, &[2, 11]).unwrap();
            assert!(r.sandwich_holds, "{r:?}");
            assert_ne!(r.ric_bound_holds, Some(false), "{r:?}");
        }
    }

    #[test]
    fn example_bound_chain() {
        let r = check_beta_bounds(&example(2.0), &[1.0; 3], &[2]).unwrap();
        // Column normalization turns (α,0),(0,α),(1,1) into (1,0),(0,1),(1,1)/√2.
        assert!((r.beta_w - 1.0 / 2f64.sqrt()).abs() < 1e-10);
        assert!(r.sandwich_holds);
    }

    #[test]
    fn dual_value_matches_example() {
        for (alpha, expect) in [(1.0, 1.0), (3.0, 2.0)] {
            let u = DVector::from_vec(vec![alpha, alpha]);
            let v = basis_pursuit_value(&example(alpha), &u, &[1.0; 3]).unwrap().unwrap();
            assert!((v - expect).abs() < 1e-12);
        }
        let psi = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let u = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(basis_pursuit_value(&psi, &u, &[1.0]).unwrap(), None);
    }
}
