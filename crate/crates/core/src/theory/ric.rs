//! Restricted isometry constants by exhaustive enumeration.

use crate::{Error, Real, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest number of supports [`ric_bruteforce`] will enumerate.
pub const MAX_SUPPORTS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicEstimate<T> {
    pub s: usize,
    pub delta: T,
    /// A support of size `s` attaining `delta` (lexicographically first).
    pub extremal_support: Vec<usize>,
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for remaining in (1..=k).rev() {
        loop {
            let count = binomial(n - next - 1, remaining - 1);
            if rank < count {
                out.push(next);
                next += 1;
                break;
            }
            rank -= count;
            next += 1;
        }
    }
    out
}

/// Scales every column to unit ℓ2 norm.
pub fn normalize_columns(psi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = psi.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            return Err(Error::InvalidArgument(format!("column {j} is zero")));
        }
        col /= n;
    }
    Ok(out)
}

/// Exact `δ_s` of the column-normalized matrix: the maximum over all supports
/// `S` of size `s` of `max(1 − λ_min, λ_max − 1)` for the Gram matrix
/// `Ψ_SᵀΨ_S`. Supports of size below `s` are covered by eigenvalue
/// interlacing. Columns are scaled to unit norm first, which is the `1/√N`
/// convention with the empirical column norm.
pub fn ric_bruteforce<T: Real>(psi: &DMatrix<T>, s: usize) -> Result<RicEstimate<T>> {
    let p = psi.ncols();
    if s == 0 || s > p {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} must lie in 1..={p}"
        )));
    }
    let count = binomial(p, s);
    if count > MAX_SUPPORTS {
        return Err(Error::TooLarge(format!(
            "C({p}, {s}) = {count} supports exceeds the limit of {MAX_SUPPORTS}; use fewer columns or a smaller s"
        )));
    }
    let a = normalize_columns(&psi.map(|x| x.as_f64()))?;
    let gram = a.transpose() * &a;
    let (delta, rank) = (0..count as u64)
        .into_par_iter()
        .map(|r| {
            let sup = unrank(r as u128, p, s);
            let g = DMatrix::from_fn(s, s, |i, j| gram[(sup[i], sup[j])]);
            let ev = SymmetricEigen::new(g).eigenvalues;
            let lo = ev.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ev.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ((1.0 - lo).max(hi - 1.0).max(0.0), r)
        })
        .reduce(
            || (f64::NEG_INFINITY, u64::MAX),
            |x, y| {
                if x.0 > y.0 || (x.0 == y.0 && x.1 < y.1) {
                    x
                } else {
                    y
                }
            },
        );
    Ok(RicEstimate {
        s,
        delta: T::lit(delta),
        extremal_support: unrank(rank as u128, p, s),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unrank_enumerates_in_order() {
        let all: Vec<Vec<usize>> = (0..binomial(5, 3)).map(|r| unrank(r, 5, 3)).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[9], vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn orthonormal_columns_have_zero_constant() {
        let q = DMatrix::<f64>::identity(6, 4) * 3.0;
        for s in 1..=4 {
            assert!(ric_bruteforce(&q, s).unwrap().delta.abs() < 1e-15);
        }
    }

    #[test]
    fn repeated_column_gives_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0f64, 1.0, 0.0, 2.0, 2.0, 1.0, 0.0, 0.0, 1.0]);
        let r = ric_bruteforce(&a, 2).unwrap();
        assert!((r.delta - 1.0).abs() < 1e-12);
        assert_eq!(r.extremal_support, vec![0, 1]);
    }

    #[test]
    fn guard_and_arguments() {
        let a = DMatrix::<f64>::identity(3, 200);
        assert!(matches!(ric_bruteforce(&a, 5), Err(Error::TooLarge(_))));
        assert!(ric_bruteforce(&a, 0).is_err());
        assert!(ric_bruteforce(&DMatrix::<f64>::zeros(2, 2), 1).is_err());
    }
}
