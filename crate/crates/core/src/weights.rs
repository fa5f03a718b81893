//! Weight vectors from a-priori coefficient information.
//!
//! Weights enter the weighted ℓ1 problem only up to a common factor (the
//! minimiser does not change when every weight is multiplied by `t > 0`), so
//! the bounds below omit unknown leading constants.

use crate::pc_basis::{eval_legendre_1d, ln_factorial, OrderedBasis};
use crate::quadrature::gauss_legendre;
use crate::solvers::{WeightProvenance, WeightVector};
use crate::{Error, Real, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Default multiple of `|mean(u)|` used as the damping `ε_w`.
pub const DEFAULT_EPS_W_SCALE: f64 = 5e-5;

/// Coefficients with magnitude at or below this are ignored by [`fit_gk`].
pub const FIT_FLOOR: f64 = 1e-14;

/// Default Monte Carlo sample count for [`taylor_bound`].
pub const DEFAULT_MC_SAMPLES: usize = 200_000;

/// `w_j = (|c_j| + eps_w)^(-p)`.
pub fn damped_weights<T: Real>(c_est: &[T], eps_w: T, p: T) -> Result<WeightVector<T>> {
    if !(eps_w > T::zero()) || !eps_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps_w must be positive, got {eps_w}"
        )));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "exponent p must lie in [0, 1], got {p}"
        )));
    }
    let w = c_est
        .iter()
        .map(|c| (c.abs() + eps_w).powf(-p))
        .collect();
    WeightVector::new(w, WeightProvenance::PriorBound)
}

/// `scale · |mean(u)|`, falling back to `scale · std(u)` when the mean is zero.
pub fn default_eps_w<T: Real>(u: &[T], scale: T) -> Result<T> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if !(scale > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let n = T::from_usize_lossy(u.len());
    let mean = u.iter().fold(T::zero(), |a, &x| a + x) / n;
    if mean != T::zero() {
        return Ok(scale * mean.abs());
    }
    let var = u.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean)) / n;
    if var == T::zero() {
        return Err(Error::InvalidArgument(
            "samples have zero mean and zero spread; no scale for eps_w".into(),
        ));
    }
    Ok(scale * var.sqrt())
}

/// Exponential decay model `|c_α| ≤ C0 (|α|!/α!) exp(−Σ g_k α_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    pub g: Vec<f64>,
    pub c0: f64,
}

impl DecayModel {
    pub fn new(g: Vec<f64>, c0: f64) -> Result<Self> {
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("decay rates must be finite".into()));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "prefactor must be positive, got {c0}"
            )));
        }
        Ok(Self { g, c0 })
    }
}

/// Evaluates the decay model for every basis function. The multinomial factor
/// is formed in log space, so high degrees do not overflow.
pub fn elliptic_bound(model: &DecayModel, basis: &OrderedBasis) -> Result<Vec<f64>> {
    if model.g.len() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} decay rates for a {}-dimensional basis",
            model.g.len(),
            basis.dim()
        )));
    }
    Ok(basis
        .indices()
        .iter()
        .map(|a| {
            let ln_multinomial = ln_factorial(a.total_degree()) - a.ln_factorial();
            let decay: f64 = a.nonzeros().map(|(k, e)| model.g[k] * e as f64).sum();
            model.c0 * (ln_multinomial - decay).exp()
        })
        .collect())
}

/// Decay rates from analyticity radii: `g_k = −ln(r_k / (√3 ln 2))`.
pub fn gk_from_radius(r: &[f64]) -> Result<Vec<f64>> {
    let denom = 3f64.sqrt() * std::f64::consts::LN_2;
    r.iter()
        .map(|&rk| {
            if rk > 0.0 && rk.is_finite() {
                Ok(-(rk / denom).ln())
            } else {
                Err(Error::InvalidArgument(format!(
                    "radius must be positive, got {rk}"
                )))
            }
        })
        .collect()
}

/// Least-squares slope of `−ln|c|` against degree, over coefficients with
/// `|c| > 1e-14`.
pub fn fit_gk(degrees: &[u32], coeffs: &[f64]) -> Result<f64> {
    if degrees.len() != coeffs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} degrees and {} coefficients",
            degrees.len(),
            coeffs.len()
        )));
    }
    let pts: Vec<(f64, f64)> = degrees
        .iter()
        .zip(coeffs)
        .filter(|(_, c)| c.abs() > FIT_FLOOR)
        .map(|(&k, c)| (k as f64, -c.abs().ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 coefficients above {FIT_FLOOR:e}, have {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument(
            "all usable coefficients share one degree".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Inputs of the dimensional Taylor bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorBoundSpec {
    /// `t_i`, integrals of the input-field modes.
    pub t: Vec<f64>,
    /// Highest Taylor order kept.
    pub k_max: usize,
    /// Mean input value `T̄`; must be nonzero.
    pub tc_bar: f64,
    pub mc_samples: usize,
}

impl TaylorBoundSpec {
    fn validate(&self, basis: &OrderedBasis) -> Result<()> {
        if self.t.len() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} mode integrals for a {}-dimensional basis",
                self.t.len(),
                basis.dim()
            )));
        }
        if self.tc_bar == 0.0 || !self.tc_bar.is_finite() {
            return Err(Error::InvalidArgument(
                "mean input value must be finite and nonzero".into(),
            ));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidArgument("mc_samples must be at least 1".into()));
        }
        Ok(())
    }

    fn term_scale(&self, k: usize) -> f64 {
        (-(ln_factorial(k as u32) + k as f64 * self.tc_bar.abs().ln())).exp()
    }
}

/// Moments `E[ψ_j(ξ) s(ξ)^k]` with `s = Σ t_i ξ_i`, indexed `[j][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorMoments {
    pub mean: Vec<Vec<f64>>,
    /// Standard error of each Monte Carlo average; zero for exact entries.
    pub stderr: Vec<Vec<f64>>,
}

impl TaylorMoments {
    fn bound(&self, spec: &TaylorBoundSpec) -> Vec<f64> {
        self.mean
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, m)| spec.term_scale(k) * m.abs())
                    .sum()
            })
            .collect()
    }
}

/// Whether `E[ψ_α s^k]` vanishes identically: ψ_α is orthogonal to every
/// polynomial of lower total degree, and the uniform measure is symmetric.
fn structurally_zero(degree: u32, k: usize) -> bool {
    degree as usize > k || (degree as usize + k) % 2 == 1
}

const MC_BLOCK: usize = 4096;

/// Monte Carlo estimate of the Taylor moments. Samples are drawn in fixed
/// blocks, each from its own seeded stream, and block sums are combined in
/// block order, so the result does not depend on the thread count. Moments
/// that vanish by orthogonality or symmetry are set to zero exactly.
pub fn taylor_moments_mc(
    spec: &TaylorBoundSpec,
    basis: &OrderedBasis,
    seed: u64,
) -> Result<TaylorMoments> {
    spec.validate(basis)?;
    let p = basis.len();
    let kk = spec.k_max + 1;
    let d = basis.dim();
    let blocks = spec.mc_samples.div_ceil(MC_BLOCK);
    let partial: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = MC_BLOCK.min(spec.mc_samples - b * MC_BLOCK);
            let mut sum = vec![0.0; p * kk];
            let mut sq = vec![0.0; p * kk];
            let mut xi = vec![0.0; d];
            let mut row = vec![0.0; p];
            let mut pw = vec![0.0; kk];
            for _ in 0..count {
                for x in xi.iter_mut() {
                    *x = rng.random_range(-1.0..=1.0);
                }
                let s: f64 = xi.iter().zip(&spec.t).map(|(x, t)| x * t).sum();
                pw[0] = 1.0;
                for k in 1..kk {
                    pw[k] = pw[k - 1] * s;
                }
                basis.eval_row(&xi, &mut row)?;
                for (j, &v) in row.iter().enumerate() {
                    for (k, &sk) in pw.iter().enumerate() {
                        let y = v * sk;
                        sum[j * kk + k] += y;
                        sq[j * kk + k] += y * y;
                    }
                }
            }
            Ok((sum, sq))
        })
        .collect();
    let mut sum = vec![0.0; p * kk];
    let mut sq = vec![0.0; p * kk];
    for part in partial {
        let (s, q) = part?;
        for i in 0..p * kk {
            sum[i] += s[i];
            sq[i] += q[i];
        }
    }
    let m = spec.mc_samples as f64;
    let mut mean = vec![vec![0.0; kk]; p];
    let mut stderr = vec![vec![0.0; kk]; p];
    for (j, a) in basis.indices().iter().enumerate() {
        for k in 0..kk {
            if structurally_zero(a.total_degree(), k) {
                continue;
            }
            let mu = sum[j * kk + k] / m;
            let var = (sq[j * kk + k] / m - mu * mu).max(0.0);
            mean[j][k] = mu;
            stderr[j][k] = (var / m).sqrt();
        }
    }
    Ok(TaylorMoments { mean, stderr })
}

/// Dimensional Taylor bound
/// `b_j = Σ_{k≤K} |E[ψ_j (Σ t_i ξ_i)^k]| / (k! |T̄|^k)` with Monte Carlo moments.
pub fn taylor_bound(spec: &TaylorBoundSpec, basis: &OrderedBasis, seed: u64) -> Result<Vec<f64>> {
    Ok(taylor_moments_mc(spec, basis, seed)?.bound(spec))
}

/// `E[ψ_a(ξ) ξ^m]` for one uniform variable, by Gauss–Legendre quadrature
/// exact for the degree involved.
fn univariate_moment(a: u32, m: u32) -> f64 {
    if a > m || (a + m) % 2 == 1 {
        return 0.0;
    }
    let n = ((a + m) / 2 + 1) as usize;
    let (x, w) = gauss_legendre(n);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| 0.5 * wi * eval_legendre_1d::<f64>(a as usize, xi).unwrap() * xi.powi(m as i32))
        .sum()
}

/// Exact Taylor moments by multinomial expansion of `s^k`.
pub fn taylor_moments_exact(spec: &TaylorBoundSpec, basis: &OrderedBasis) -> Result<TaylorMoments> {
    spec.validate(basis)?;
    let kk = spec.k_max + 1;
    let d = basis.dim();
    let max_m = (spec.k_max + basis.max_degree()) as u32;
    let table: Vec<Vec<f64>> = (0..=basis.max_degree() as u32)
        .map(|a| (0..=max_m).map(|m| univariate_moment(a, m)).collect())
        .collect();
    let mean = basis
        .indices()
        .par_iter()
        .map(|alpha| {
            let a = alpha.as_slice();
            (0..kk)
                .map(|k| {
                    let deg = alpha.total_degree() as usize;
                    if structurally_zero(deg as u32, k) {
                        return 0.0;
                    }
                    // m_i = a_i + 2 j_i with Σ j_i = (k − |α|)/2.
                    let mut m = a.to_vec();
                    let mut total = 0.0;
                    distribute(&mut m, 0, (k - deg) / 2, &mut |m| {
                        let mut term = ln_factorial(k as u32).exp();
                        for i in 0..d {
                            term *= spec.t[i].powi(m[i] as i32) / ln_factorial(m[i]).exp()
                                * table[a[i] as usize][m[i] as usize];
                        }
                        total += term;
                    });
                    total
                })
                .collect()
        })
        .collect();
    Ok(TaylorMoments {
        mean,
        stderr: vec![vec![0.0; kk]; basis.len()],
    })
}

fn distribute(m: &mut [u32], from: usize, pairs: usize, f: &mut impl FnMut(&[u32])) {
    if pairs == 0 {
        f(m);
        return;
    }
    for i in from..m.len() {
        m[i] += 2;
        distribute(m, i, pairs - 1, f);
        m[i] -= 2;
    }
}

/// Taylor bound with exact moments; no sampling error.
pub fn taylor_bound_exact(spec: &TaylorBoundSpec, basis: &OrderedBasis) -> Result<Vec<f64>> {
    Ok(taylor_moments_exact(spec, basis)?.bound(spec))
}

/// Writes `index,bound` rows (1-based index).
pub fn write_bounds_csv<W: Write>(bounds: &[f64], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["index", "bound"])?;
    for (j, b) in bounds.iter().enumerate() {
        wr.write_record([(j + 1).to_string(), format!("{b:.17e}")])?;
    }
    wr.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

pub fn save_bounds_csv(bounds: &[f64], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_bounds_csv(bounds, f)
}

/// Reads a two-column `index,value` file; indices must run 1, 2, 3, ...
pub fn read_bounds_csv<R: std::io::Read>(r: R) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Format("expected index,value rows".into()));
        }
        let idx: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad index '{}'", &rec[0])))?;
        if idx != out.len() + 1 {
            return Err(Error::Format(format!(
                "index {idx} out of sequence, expected {}",
                out.len() + 1
            )));
        }
        let v: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad value '{}'", &rec[1])))?;
        out.push(v);
    }
    Ok(out)
}

pub fn load_bounds_csv(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_bounds_csv(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc_basis::{build_basis, MultiIndex};
    use crate::quadrature::gauss_legendre;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn damped_examples() {
        let w = damped_weights(&[1.0, 0.0], 1.0, 1.0).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 1.0]);
        assert_eq!(w.provenance(), WeightProvenance::PriorBound);
        let w = damped_weights(&[3.0, -0.2, 0.0], 1e-3, 0.0).unwrap();
        assert!(w.as_slice().iter().all(|&x| x == 1.0));
        assert!(damped_weights(&[1.0], 0.0, 1.0).is_err());
        assert!(damped_weights(&[1.0], 1.0, 1.5).is_err());
    }

    #[test]
    fn eps_w_defaults() {
        assert_relative_eq!(default_eps_w(&[2.0, 2.0, 2.0], 5e-5).unwrap(), 1e-4);
        assert_relative_eq!(default_eps_w(&[2.0, 2.0, 2.0], 5e-2).unwrap(), 0.1);
        let alt = [1.0, -1.0, 1.0, -1.0];
        assert_relative_eq!(default_eps_w(&alt, 5e-5).unwrap(), 5e-5);
        assert!(default_eps_w(&[0.0, 0.0], 5e-5).is_err());
    }

    #[test]
    fn elliptic_bound_examples() {
        let basis = OrderedBasis::from_indices(
            2,
            2,
            vec![MultiIndex::zero(2), MultiIndex::new(vec![1, 1])],
        )
        .unwrap();
        let b = elliptic_bound(&DecayModel::new(vec![1.0, 2.0], 1.0).unwrap(), &basis).unwrap();
        assert_eq!(b[0], 1.0);
        assert_relative_eq!(b[1], 2.0 * (-3.0f64).exp(), max_relative = 1e-14);
        let b = elliptic_bound(&DecayModel::new(vec![1.0, 2.0], 4.5).unwrap(), &basis).unwrap();
        assert_eq!(b[0], 4.5);
    }

    #[test]
    fn elliptic_bound_high_degree_is_finite() {
        let basis =
            OrderedBasis::from_indices(2, 60, vec![MultiIndex::new(vec![30, 30])]).unwrap();
        let b = elliptic_bound(&DecayModel::new(vec![2.0, 2.0], 1.0).unwrap(), &basis).unwrap();
        // C(60, 30) e^{-120}
        let expect = (118264581564861424.0f64).ln() - 120.0;
        assert_relative_eq!(b[0].ln(), expect, max_relative = 1e-12);
    }

    #[test]
    fn gk_from_radius_inverts() {
        let r = [0.5, 0.1];
        let g = gk_from_radius(&r).unwrap();
        for (gk, rk) in g.iter().zip(r) {
            assert_relative_eq!((-gk).exp() * 3f64.sqrt() * 2f64.ln(), rk, max_relative = 1e-14);
        }
        assert!(gk_from_radius(&[0.0]).is_err());
    }

    #[test]
    fn fit_examples() {
        let c = [1.0, (-2.0f64).exp(), (-4.0f64).exp()];
        assert_relative_eq!(fit_gk(&[0, 1, 2], &c).unwrap(), 2.0, max_relative = 1e-12);
        let with_zero = [1.0, 0.0, (-4.0f64).exp(), (-6.0f64).exp()];
        assert_relative_eq!(fit_gk(&[0, 1, 2, 3], &with_zero).unwrap(), 2.0, max_relative = 1e-12);
        assert!(fit_gk(&[0, 1], &[1.0, 0.0]).is_err());
    }

    fn spec(t: Vec<f64>, k_max: usize) -> TaylorBoundSpec {
        TaylorBoundSpec {
            t,
            k_max,
            tc_bar: 2.0,
            mc_samples: 50_000,
        }
    }

    #[test]
    fn taylor_constant_function_at_least_one() {
        let basis = build_basis(3, 2, None).unwrap();
        let b = taylor_bound(&spec(vec![0.3, -0.2, 0.1], 3), &basis, 1).unwrap();
        assert!(b[0] >= 1.0);
    }

    #[test]
    fn taylor_first_order_term() {
        let basis = build_basis(3, 1, None).unwrap();
        let t = vec![0.4, -0.25, 0.1];
        let s = spec(t.clone(), 1);
        let mc = taylor_moments_mc(&s, &basis, 9).unwrap();
        for i in 0..3 {
            let exact = t[i] / 3f64.sqrt();
            assert!((mc.mean[i + 1][1] - exact).abs() <= 3.0 * mc.stderr[i + 1][1]);
        }
        let b = taylor_bound_exact(&s, &basis).unwrap();
        for i in 0..3 {
            assert_relative_eq!(b[i + 1], t[i].abs() / (3f64.sqrt() * 2.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn taylor_zero_modes_leave_only_constant_term() {
        let basis = build_basis(2, 3, None).unwrap();
        let b = taylor_bound(&spec(vec![0.0, 0.0], 4), &basis, 3).unwrap();
        assert_eq!(b[0], 1.0);
        assert!(b[1..].iter().all(|&x| x == 0.0));
    }

    /// Oracle: tensor Gauss–Legendre quadrature of ψ_j s^k, d ≤ 3.
    fn quadrature_moments(t: &[f64], k_max: usize, basis: &OrderedBasis) -> Vec<Vec<f64>> {
        let n = 8;
        let (x, w) = gauss_legendre(n);
        let d = t.len();
        let mut out = vec![vec![0.0; k_max + 1]; basis.len()];
        let mut row = vec![0.0; basis.len()];
        for flat in 0..n.pow(d as u32) {
            let mut pt = vec![0.0; d];
            let mut wt = 1.0;
            let mut r = flat;
            for k in 0..d {
                pt[k] = x[r % n];
                wt *= 0.5 * w[r % n];
                r /= n;
            }
            basis.eval_row(&pt, &mut row).unwrap();
            let s: f64 = pt.iter().zip(t).map(|(a, b)| a * b).sum();
            for j in 0..basis.len() {
                for k in 0..=k_max {
                    out[j][k] += wt * row[j] * s.powi(k as i32);
                }
            }
        }
        out
    }

    #[test]
    fn exact_and_mc_moments_match_quadrature() {
        let basis = build_basis(3, 2, None).unwrap();
        let t = vec![0.7, -0.4, 0.25];
        let s = spec(t.clone(), 2);
        let oracle = quadrature_moments(&t, 2, &basis);
        let exact = taylor_moments_exact(&s, &basis).unwrap();
        let mc = taylor_moments_mc(&s, &basis, 17).unwrap();
        for j in 0..basis.len() {
            for k in 0..=2 {
                assert!((exact.mean[j][k] - oracle[j][k]).abs() < 1e-14);
                let dev = (mc.mean[j][k] - oracle[j][k]).abs();
                assert!(dev <= 3.0 * mc.stderr[j][k] + 1e-12, "j {j} k {k}: {dev}");
            }
        }
    }

    #[test]
    fn mc_is_reproducible() {
        let basis = build_basis(3, 2, None).unwrap();
        let s = spec(vec![0.7, -0.4, 0.25], 2);
        let a = taylor_bound(&s, &basis, 5).unwrap();
        let b = taylor_bound(&s, &basis, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn taylor_rejects_bad_spec() {
        let basis = build_basis(2, 2, None).unwrap();
        let mut s = spec(vec![0.1, 0.2], 2);
        s.tc_bar = 0.0;
        assert!(taylor_bound(&s, &basis, 0).is_err());
        let s = spec(vec![0.1], 2);
        assert!(taylor_bound(&s, &basis, 0).is_err());
    }

    #[test]
    fn bounds_csv() {
        let mut buf = Vec::new();
        write_bounds_csv(&[1.0, 0.25], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "index,bound");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("2,2.5"));
        assert_eq!(read_bounds_csv(text.as_bytes()).unwrap(), vec![1.0, 0.25]);
        assert!(read_bounds_csv("index,bound\n2,1.0\n".as_bytes()).is_err());
        assert!(read_bounds_csv("index,bound\n1,x\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn damped_weights_monotone(c in prop::collection::vec(-10.0f64..10.0, 2..20), eps in 1e-6f64..1.0, p in 0.0f64..=1.0) {
            let w = damped_weights(&c, eps, p).unwrap();
            for i in 0..c.len() {
                for j in 0..c.len() {
                    if c[i].abs() >= c[j].abs() {
                        prop_assert!(w.as_slice()[i] <= w.as_slice()[j]);
                    }
                }
            }
        }

        #[test]
        fn elliptic_bound_decreases_with_degree(g in prop::collection::vec(0.7f64..4.0, 3), alpha in prop::collection::vec(0u32..4, 3), k in 0usize..3) {
            // The multinomial factor grows by (|α|+1)/(α_k+1) when α_k increases.
            let growth = (alpha.iter().sum::<u32>() + 1) as f64 / (alpha[k] + 1) as f64;
            prop_assume!(g[k] > growth.ln());
            let mut next = alpha.clone();
            next[k] += 1;
            let basis = OrderedBasis::from_indices(3, 12, vec![MultiIndex::new(alpha), MultiIndex::new(next)]).unwrap();
            let b = elliptic_bound(&DecayModel::new(g, 1.0).unwrap(), &basis).unwrap();
            prop_assert!(b[1] < b[0]);
        }

        #[test]
        fn taylor_bound_permutation_invariant(t in prop::collection::vec(-1.0f64..1.0, 3)) {
            let basis = build_basis(3, 2, None).unwrap();
            let perm = [2usize, 0, 1];
            let tp: Vec<f64> = perm.iter().map(|&i| t[i]).collect();
            let b = taylor_bound_exact(&spec(t, 3), &basis).unwrap();
            let bp = taylor_bound_exact(&spec(tp, 3), &basis).unwrap();
            for (j, a) in basis.indices().iter().enumerate() {
                let moved: Vec<u32> = perm.iter().map(|&i| a.as_slice()[i]).collect();
                let jp = basis.position(&MultiIndex::new(moved)).unwrap();
                prop_assert!((b[j] - bp[jp]).abs() <= 1e-12 * (1.0 + b[j]));
            }
        }
    }
}
