//! Multivariate orthonormal Legendre polynomial chaos bases.
//!
//! A basis function is identified by a multi-index `α ∈ ℕ^d` and evaluates to
//! `ψ_α(ξ) = Π_k √(2α_k+1)·L_{α_k}(ξ_k)`, where `L_n` is the Legendre
//! polynomial with `L_n(1) = 1`. These are orthonormal under the uniform
//! probability density on `[-1, 1]^d`.
//!
//! # Ordering
//!
//! Bases are graded: indices appear in nondecreasing total degree. Inside a
//! degree block the comparator is
//!
//! 1. position of the last nonzero coordinate, ascending;
//! 2. exponents compared lexicographically, descending.
//!
//! For `d = 2, q = 2` this yields `00, 10, 01, 20, 11, 02`. Every function of
//! the first `m` variables precedes, within its degree block, any function that
//! activates variable `m + 1`, so truncating the list keeps interactions among
//! the leading variables. This tie-break inside a degree block is a
//! reconstruction and may differ from other codes that truncate graded bases.

use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

/// Samples may exceed `[-1, 1]` by this much before being rejected; they are clamped.
pub const CLAMP_TOL: f64 = 1e-12;

/// Upper limit on the number of indices materialised by [`build_basis`].
pub const MAX_BASIS_SIZE: usize = 5_000_000;

/// Exponent vector of one tensor-product basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex {
    alpha: Vec<u32>,
}

impl MultiIndex {
    pub fn new(alpha: Vec<u32>) -> Self {
        Self { alpha }
    }

    pub fn zero(d: usize) -> Self {
        Self { alpha: vec![0; d] }
    }

    /// Unit index `e_k` of dimension `d`.
    pub fn unit(d: usize, k: usize) -> Self {
        let mut alpha = vec![0; d];
        alpha[k] = 1;
        Self { alpha }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.alpha
    }

    /// `|α| = Σ α_k`.
    pub fn total_degree(&self) -> u32 {
        self.alpha.iter().sum()
    }

    /// `ln(α!) = Σ ln(α_k!)`.
    pub fn ln_factorial(&self) -> f64 {
        self.alpha.iter().map(|&a| ln_factorial(a)).sum()
    }

    /// Position of the last nonzero exponent, `None` for the zero index.
    pub fn last_nonzero(&self) -> Option<usize> {
        self.alpha.iter().rposition(|&a| a != 0)
    }

    /// `(dimension, exponent)` pairs of the nonzero entries.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0)
            .map(|(k, &a)| (k, a))
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(alpha: Vec<u32>) -> Self {
        Self::new(alpha)
    }
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Ordering of multi-indices within a graded basis (see module docs).
pub fn compare_graded(a: &MultiIndex, b: &MultiIndex) -> Ordering {
    a.total_degree()
        .cmp(&b.total_degree())
        .then_with(|| a.last_nonzero().cmp(&b.last_nonzero()))
        .then_with(|| b.alpha.cmp(&a.alpha))
}

/// `(d+q)! / (d! q!)`, the number of `d`-variate polynomials of total degree ≤ `q`.
pub fn basis_cardinality(d: usize, q: usize) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension d must be at least 1".into()));
    }
    let overflow = || Error::Overflow(format!("basis cardinality for d={d}, q={q}"));
    let mut acc: u128 = 1;
    for i in 1..=q as u128 {
        // acc * (d + i) / i stays integral at every step.
        acc = acc
            .checked_mul(d as u128 + i)
            .ok_or_else(overflow)?
            / i;
    }
    usize::try_from(acc).map_err(|_| overflow())
}

/// Serializable description of a truncated basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub d: usize,
    pub q: usize,
    #[serde(default)]
    pub p_keep: Option<usize>,
}

impl BasisSpec {
    pub fn build(&self) -> Result<OrderedBasis> {
        build_basis(self.d, self.q, self.p_keep)
    }
}

/// Truncated, graded list of multi-indices.
#[derive(Debug, Clone)]
pub struct OrderedBasis {
    d: usize,
    q: usize,
    indices: Vec<MultiIndex>,
    sparse: Vec<Vec<(usize, u32)>>,
}

impl OrderedBasis {
    /// Wraps an explicit list of indices. Each must have dimension `d` and degree ≤ `q`.
    pub fn from_indices(d: usize, q: usize, indices: Vec<MultiIndex>) -> Result<Self> {
        for (j, a) in indices.iter().enumerate() {
            if a.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "index {j} has dimension {}, expected {d}",
                    a.dim()
                )));
            }
            if a.total_degree() as usize > q {
                return Err(Error::InvalidArgument(format!(
                    "index {j} has degree {} > q = {q}",
                    a.total_degree()
                )));
            }
        }
        let sparse = indices.iter().map(|a| a.nonzeros().collect()).collect();
        Ok(Self {
            d,
            q,
            indices,
            sparse,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_degree(&self) -> usize {
        self.q
    }

    /// Number of retained basis functions `P`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn get(&self, j: usize) -> &MultiIndex {
        &self.indices[j]
    }

    pub fn spec(&self) -> BasisSpec {
        BasisSpec {
            d: self.d,
            q: self.q,
            p_keep: Some(self.len()),
        }
    }

    /// Position of `alpha` in the basis, if retained.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.indices.iter().position(|a| a == alpha)
    }

    /// Evaluates every basis function at one point.
    pub fn eval_row<T: Real>(&self, xi: &[T], out: &mut [T]) -> Result<()> {
        if xi.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, basis dimension is {}",
                xi.len(),
                self.d
            )));
        }
        let table = univariate_table(self.q, xi)?;
        let stride = self.q + 1;
        for (o, nz) in out.iter_mut().zip(&self.sparse) {
            let mut v = T::one();
            for &(k, a) in nz {
                v *= table[k * stride + a as usize];
            }
            *o = v;
        }
        Ok(())
    }

    /// Writes the index list as CSV: `j,degree,a1,...,ad`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["j".to_string(), "degree".to_string()];
        header.extend((1..=self.d).map(|k| format!("a{k}")));
        wr.write_record(&header)?;
        for (j, a) in self.indices.iter().enumerate() {
            let mut rec = vec![(j + 1).to_string(), a.total_degree().to_string()];
            rec.extend(a.as_slice().iter().map(|x| x.to_string()));
            wr.write_record(&rec)?;
        }
        wr.flush().map_err(|e| Error::Format(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

/// Builds the graded basis of total degree ≤ `q`, optionally keeping only the
/// first `p_keep` functions. The first function is always the constant.
pub fn build_basis(d: usize, q: usize, p_keep: Option<usize>) -> Result<OrderedBasis> {
    let full = basis_cardinality(d, q)?;
    let target = match p_keep {
        Some(0) => return Err(Error::InvalidArgument("P_keep must be positive".into())),
        Some(p) if p > full => {
            return Err(Error::InvalidArgument(format!(
                "P_keep = {p} exceeds the cardinality {full} of d={d}, q={q}"
            )))
        }
        Some(p) => p,
        None => full,
    };
    if target > MAX_BASIS_SIZE {
        return Err(Error::TooLarge(format!(
            "{target} basis functions requested (limit {MAX_BASIS_SIZE})"
        )));
    }

    let mut indices = Vec::with_capacity(target);
    indices.push(MultiIndex::zero(d));
    let mut scratch = vec![0u32; d];
    'outer: for degree in 1..=q as u32 {
        for last in 0..d {
            if !fill_block(&mut scratch, 0, last, degree, target, &mut indices) {
                break 'outer;
            }
        }
    }
    indices.truncate(target);
    OrderedBasis::from_indices(d, q, indices)
}

// Emits, in descending lexicographic order, every index with support in
// 0..=last, alpha[last] >= 1, and the given remaining degree. Returns false
// once `target` indices exist.
fn fill_block(
    alpha: &mut [u32],
    pos: usize,
    last: usize,
    remaining: u32,
    target: usize,
    out: &mut Vec<MultiIndex>,
) -> bool {
    if out.len() >= target {
        return false;
    }
    if pos == last {
        alpha[last] = remaining;
        out.push(MultiIndex::new(alpha.to_vec()));
        alpha[last] = 0;
        return out.len() < target;
    }
    for v in (0..remaining).rev() {
        alpha[pos] = v;
        let go_on = fill_block(alpha, pos + 1, last, remaining - v, target, out);
        alpha[pos] = 0;
        if !go_on {
            return false;
        }
    }
    true
}

fn check_point<T: Real>(xi: T) -> Result<T> {
    let one = T::one();
    let lim = T::lit(1.0 + CLAMP_TOL);
    if !xi.is_finite() || xi.abs() > lim {
        return Err(Error::InvalidArgument(format!(
            "sample coordinate {xi} outside [-1, 1]"
        )));
    }
    Ok(xi.clamp(-one, one))
}

/// Orthonormal Legendre polynomial `√(2k+1)·L_k(ξ)` by the three-term recurrence.
pub fn eval_legendre_1d<T: Real>(k: usize, xi: T) -> Result<T> {
    let x = check_point(xi)?;
    Ok(legendre_unchecked(k, x) * T::from_usize_lossy(2 * k + 1).sqrt())
}

fn legendre_unchecked<T: Real>(k: usize, x: T) -> T {
    let mut p0 = T::one();
    if k == 0 {
        return p0;
    }
    let mut p1 = x;
    for n in 1..k {
        let nf = T::from_usize_lossy(n);
        let p2 = (T::from_usize_lossy(2 * n + 1) * x * p1 - nf * p0) / (nf + T::one());
        p0 = p1;
        p1 = p2;
    }
    p1
}

// table[k * (q+1) + n] = ψ_n(ξ_k)
fn univariate_table<T: Real>(q: usize, xi: &[T]) -> Result<Vec<T>> {
    let stride = q + 1;
    let mut table = vec![T::zero(); xi.len() * stride];
    let norms: Vec<T> = (0..stride)
        .map(|n| T::from_usize_lossy(2 * n + 1).sqrt())
        .collect();
    for (k, &x) in xi.iter().enumerate() {
        let x = check_point(x)?;
        let row = &mut table[k * stride..(k + 1) * stride];
        let mut p0 = T::one();
        let mut p1 = x;
        row[0] = T::one();
        if q >= 1 {
            row[1] = x * norms[1];
        }
        for n in 1..q {
            let nf = T::from_usize_lossy(n);
            let p2 = (T::from_usize_lossy(2 * n + 1) * x * p1 - nf * p0) / (nf + T::one());
            p0 = p1;
            p1 = p2;
            row[n + 1] = p2 * norms[n + 1];
        }
    }
    Ok(table)
}

/// `ψ_α(ξ) = Π_k ψ_{α_k}(ξ_k)`.
pub fn eval_basis<T: Real>(alpha: &MultiIndex, xi: &[T]) -> Result<T> {
    if alpha.dim() != xi.len() {
        return Err(Error::DimensionMismatch(format!(
            "multi-index has {} entries, point has {}",
            alpha.dim(),
            xi.len()
        )));
    }
    let mut v = T::one();
    for (&a, &x) in alpha.as_slice().iter().zip(xi) {
        v *= eval_legendre_1d(a as usize, x)?;
    }
    Ok(v)
}

/// `sup_ξ |ψ_α(ξ)| = Π_k √(2α_k+1)`, attained at `ξ = (1, …, 1)`.
pub fn inf_norm<T: Real>(alpha: &MultiIndex) -> T {
    alpha
        .as_slice()
        .iter()
        .fold(T::one(), |acc, &a| acc * T::from_usize_lossy(2 * a as usize + 1).sqrt())
}

/// Sample points, the evaluated basis `Ψ` and observations `u`.
#[derive(Debug, Clone)]
pub struct MeasurementSet<T: Real> {
    xi: DMatrix<T>,
    psi: DMatrix<T>,
    u: DVector<T>,
}

impl<T: Real> MeasurementSet<T> {
    /// Builds a set from an already evaluated matrix. `xi` may have zero columns
    /// when the sample points are not tracked.
    pub fn from_parts(xi: DMatrix<T>, psi: DMatrix<T>, u: DVector<T>) -> Result<Self> {
        if psi.nrows() == 0 {
            return Err(Error::InvalidArgument("measurement set has no rows".into()));
        }
        if psi.nrows() != u.len() || (xi.ncols() > 0 && xi.nrows() != u.len()) {
            return Err(Error::DimensionMismatch(format!(
                "psi has {} rows, xi has {}, u has {}",
                psi.nrows(),
                xi.nrows(),
                u.len()
            )));
        }
        Ok(Self { xi, psi, u })
    }

    /// Measurement set with no tracked sample points.
    pub fn from_matrix(psi: DMatrix<T>, u: DVector<T>) -> Result<Self> {
        let n = psi.nrows();
        Self::from_parts(DMatrix::zeros(n, 0), psi, u)
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn p(&self) -> usize {
        self.psi.ncols()
    }

    pub fn xi(&self) -> &DMatrix<T> {
        &self.xi
    }

    pub fn psi(&self) -> &DMatrix<T> {
        &self.psi
    }

    pub fn u(&self) -> &DVector<T> {
        &self.u
    }

    /// Restriction to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let xi = if self.xi.ncols() > 0 {
            self.xi.select_rows(rows)
        } else {
            DMatrix::zeros(rows.len(), 0)
        };
        Self::from_parts(xi, self.psi.select_rows(rows), self.u.select_rows(rows))
    }
}

/// Evaluates `Ψ(i, j) = ψ_j(ξ^(i))` for every row of `xi`.
pub fn design_matrix<T: Real>(basis: &OrderedBasis, xi: &DMatrix<T>) -> Result<DMatrix<T>> {
    if xi.ncols() != basis.dim() {
        return Err(Error::DimensionMismatch(format!(
            "samples have {} columns, basis dimension is {}",
            xi.ncols(),
            basis.dim()
        )));
    }
    let n = xi.nrows();
    let p = basis.len();
    let mut rows = vec![T::zero(); n * p];
    rows.par_chunks_mut(p.max(1))
        .enumerate()
        .try_for_each(|(i, out)| {
            let point: Vec<T> = xi.row(i).iter().copied().collect();
            basis.eval_row(&point, out)
        })?;
    Ok(DMatrix::from_row_slice(n, p, &rows))
}

/// Assembles a [`MeasurementSet`] from sample points and observations.
pub fn assemble<T: Real>(
    basis: &OrderedBasis,
    xi_samples: &DMatrix<T>,
    u_values: &DVector<T>,
) -> Result<MeasurementSet<T>> {
    if xi_samples.nrows() == 0 {
        return Err(Error::InvalidArgument("no samples given".into()));
    }
    if xi_samples.nrows() != u_values.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sample points but {} observations",
            xi_samples.nrows(),
            u_values.len()
        )));
    }
    let psi = design_matrix(basis, xi_samples)?;
    let xi = xi_samples.map(|x| x.clamp(-T::one(), T::one()));
    MeasurementSet::from_parts(xi, psi, u_values.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use proptest::prelude::*;

    #[test]
    fn cardinality_examples() {
        assert_eq!(basis_cardinality(40, 3).unwrap(), 12341);
        assert_eq!(basis_cardinality(1, 5).unwrap(), 6);
        assert_eq!(basis_cardinality(2, 2).unwrap(), 6);
        assert_eq!(basis_cardinality(60, 10).unwrap(), 396_704_524_216);
        assert!(basis_cardinality(0, 3).is_err());
    }

    #[test]
    fn cardinality_overflow_is_reported() {
        assert!(matches!(
            basis_cardinality(1 << 40, 8),
            Err(Error::Overflow(_))
        ));
    }

    #[test]
    fn small_bases_in_documented_order() {
        let b = build_basis(2, 1, None).unwrap();
        let got: Vec<Vec<u32>> = b.indices().iter().map(|a| a.as_slice().to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1]]);

        let b = build_basis(2, 2, None).unwrap();
        let got: Vec<Vec<u32>> = b.indices().iter().map(|a| a.as_slice().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn degree_blocks_d3_q2() {
        let b = build_basis(3, 2, None).unwrap();
        assert_eq!(b.len(), 10);
        let mut counts = [0usize; 3];
        for a in b.indices() {
            counts[a.total_degree() as usize] += 1;
        }
        assert_eq!(counts, [1, 3, 6]);
        assert_eq!(
            b.indices()[4..].iter().map(|a| a.as_slice().to_vec()).collect::<Vec<_>>(),
            vec![
                vec![2, 0, 0],
                vec![1, 1, 0],
                vec![0, 2, 0],
                vec![1, 0, 1],
                vec![0, 1, 1],
                vec![0, 0, 2]
            ]
        );
    }

    #[test]
    fn truncated_d40_q3() {
        let b = build_basis(40, 3, Some(2500)).unwrap();
        assert_eq!(b.len(), 2500);
        assert!(b.indices().iter().all(|a| a.total_degree() <= 3));
        assert_eq!(b.get(0), &MultiIndex::zero(40));
        let full = build_basis(40, 3, None).unwrap();
        assert_eq!(full.len(), 12341);
        assert_eq!(&full.indices()[..2500], b.indices());
    }

    #[test]
    fn p_keep_errors() {
        assert!(build_basis(2, 2, Some(7)).is_err());
        assert!(build_basis(2, 2, Some(0)).is_err());
    }

    #[test]
    fn full_basis_sorted_and_unique() {
        let b = build_basis(4, 4, None).unwrap();
        for w in b.indices().windows(2) {
            assert_eq!(compare_graded(&w[0], &w[1]), Ordering::Less);
        }
        let set: std::collections::HashSet<_> = b.indices().iter().cloned().collect();
        assert_eq!(set.len(), b.len());
    }

    #[test]
    fn legendre_examples() {
        assert_eq!(eval_legendre_1d(0, 0.37).unwrap(), 1.0);
        assert!((eval_legendre_1d(1, 0.5).unwrap() - 3f64.sqrt() * 0.5).abs() < 1e-15);
        let x: f64 = 0.3;
        let explicit = 3.0 * (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0;
        assert!((eval_legendre_1d(4, x).unwrap() - explicit).abs() < 1e-14);
    }

    #[test]
    fn legendre_clamps_and_rejects() {
        let v = eval_legendre_1d(3, 1.0 + 5e-13).unwrap();
        assert!((v - 7f64.sqrt()).abs() < 1e-12);
        assert!(eval_legendre_1d(3, 1.0 + 1e-9).is_err());
        assert!(eval_legendre_1d(2, f64::NAN).is_err());
    }

    #[test]
    fn basis_examples() {
        let zero = MultiIndex::zero(3);
        assert_eq!(eval_basis(&zero, &[0.1, -0.5, 0.9]).unwrap(), 1.0);
        let v: f64 = eval_basis(&MultiIndex::new(vec![1, 1]), &[0.2, -0.4]).unwrap();
        assert!((v + 0.24).abs() < 1e-15);

        let (x1, x3): (f64, f64) = (0.1, -0.3);
        let p2 = 5f64.sqrt() * 0.5 * (3.0 * x1 * x1 - 1.0);
        let p1 = 3f64.sqrt() * x3;
        let v = eval_basis(&MultiIndex::new(vec![2, 0, 1]), &[x1, 0.9, x3]).unwrap();
        assert!((v - p2 * p1).abs() < 1e-15);

        assert!(eval_basis(&MultiIndex::new(vec![1, 1]), &[0.2]).is_err());
    }

    #[test]
    fn inf_norm_examples() {
        assert_eq!(inf_norm::<f64>(&MultiIndex::zero(2)), 1.0);
        let a = inf_norm::<f64>(&MultiIndex::new(vec![1, 1, 1]));
        assert!((a - 3f64.powf(1.5)).abs() < 1e-12);
        let b = inf_norm::<f64>(&MultiIndex::new(vec![3]));
        assert!((b - 7f64.sqrt()).abs() < 1e-15);
        let basis = build_basis(3, 3, None).unwrap();
        let max_deg3 = basis
            .indices()
            .iter()
            .filter(|a| a.total_degree() == 3)
            .map(inf_norm::<f64>)
            .fold(0.0, f64::max);
        assert!(b < max_deg3);
        assert!((max_deg3 - 3f64.powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn assemble_single_row() {
        let basis = build_basis(1, 2, None).unwrap();
        let m = assemble(
            &basis,
            &DMatrix::from_element(1, 1, 0.0),
            &DVector::from_element(1, 1.0),
        )
        .unwrap();
        let row: Vec<f64> = m.psi().row(0).iter().copied().collect();
        assert_eq!(row[0], 1.0);
        assert_eq!(row[1], 0.0);
        assert!((row[2] + 5f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn assemble_rejects_bad_shapes() {
        let basis = build_basis(2, 2, None).unwrap();
        let empty = DMatrix::<f64>::zeros(0, 2);
        assert!(assemble(&basis, &empty, &DVector::zeros(0)).is_err());
        let xi = DMatrix::<f64>::zeros(3, 2);
        assert!(assemble(&basis, &xi, &DVector::zeros(2)).is_err());
        let xi = DMatrix::<f64>::zeros(3, 3);
        assert!(assemble(&basis, &xi, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn assemble_generic_f32() {
        let basis = build_basis(2, 3, None).unwrap();
        let xi = DMatrix::<f32>::from_row_slice(2, 2, &[0.2, -0.4, 1.0, 1.0]);
        let m = assemble(&basis, &xi, &DVector::from_vec(vec![1.0f32, 2.0])).unwrap();
        assert_eq!(m.psi().ncols(), 10);
        for (j, a) in basis.indices().iter().enumerate() {
            let sup = inf_norm::<f32>(a);
            assert!((m.psi()[(1, j)] - sup).abs() < 1e-5);
        }
    }

    fn tensor_gram(d: usize, q: usize) -> f64 {
        let basis = build_basis(d, q, None).unwrap();
        let (x, w) = gauss_legendre(q + 1);
        let npts = x.len().pow(d as u32);
        let p = basis.len();
        let mut gram = DMatrix::<f64>::zeros(p, p);
        let mut row = vec![0.0; p];
        let mut point = vec![0.0; d];
        for flat in 0..npts {
            let mut rem = flat;
            let mut weight = 1.0;
            for k in 0..d {
                let i = rem % x.len();
                rem /= x.len();
                point[k] = x[i];
                weight *= 0.5 * w[i];
            }
            basis.eval_row(&point, &mut row).unwrap();
            for a in 0..p {
                for b in 0..p {
                    gram[(a, b)] += weight * row[a] * row[b];
                }
            }
        }
        (gram - DMatrix::identity(p, p)).abs().max()
    }

    #[test]
    fn tensor_quadrature_orthonormality() {
        for d in 1..=3 {
            for q in 0..=5 {
                let err = tensor_gram(d, q);
                assert!(err < 1e-12, "d={d} q={q} err={err}");
            }
        }
    }

    #[test]
    fn ones_point_equals_inf_norm() {
        let basis = build_basis(4, 4, None).unwrap();
        let ones = vec![1.0; 4];
        for a in basis.indices() {
            assert_eq!(eval_basis(a, &ones).unwrap(), inf_norm::<f64>(a));
        }
    }

    #[test]
    fn csv_export() {
        let basis = build_basis(2, 1, None).unwrap();
        let mut buf = Vec::new();
        basis.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "j,degree,a1,a2\n1,0,0,0\n2,1,1,0\n3,1,0,1\n");
    }

    proptest! {
        #[test]
        fn pascal_identity(d in 2usize..40, q in 1usize..10) {
            prop_assert_eq!(
                basis_cardinality(d, q).unwrap(),
                basis_cardinality(d - 1, q).unwrap() + basis_cardinality(d, q - 1).unwrap()
            );
        }

        #[test]
        fn graded_and_bounded(d in 1usize..6, q in 0usize..5) {
            let b = build_basis(d, q, None).unwrap();
            prop_assert_eq!(b.len(), basis_cardinality(d, q).unwrap());
            for w in b.indices().windows(2) {
                prop_assert!(w[0].total_degree() <= w[1].total_degree());
            }
            for a in b.indices() {
                let bound = 3f64.powf(a.total_degree() as f64 / 2.0);
                let n = inf_norm::<f64>(a);
                prop_assert!(n <= bound * (1.0 + 1e-12));
                let all_ones = a.nonzeros().all(|(_, e)| e == 1);
                prop_assert_eq!((n - bound).abs() < 1e-9 * bound, all_ones);
            }
        }
    }
}
