//! Dense tableau simplex for small problems `max cᵀx s.t. Ax ≤ b, x ≥ 0` with
//! `b ≥ 0`, so the slack basis is feasible and no phase 1 is needed.

use crate::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
}

const PIVOT_TOL: f64 = 1e-11;
/// Ratios closer than this are ties; right-hand sides below it are zeroed.
const RATIO_TOL: f64 = 1e-12;

/// Dantzig entering rule with a lexicographic ratio test: ties in the
/// minimum ratio are broken by comparing the rows of the basis inverse
/// (the slack columns) scaled by the pivot entry, which rules out cycling.
pub(crate) fn maximize(c: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Result<LpOutcome> {
    let (m, n) = a.shape();
    debug_assert_eq!(c.len(), n);
    debug_assert_eq!(b.len(), m);
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument(
            "simplex needs a nonnegative right-hand side".into(),
        ));
    }
    let width = n + m + 1;
    // Row 0..m: constraints; row m: reduced costs (negated objective).
    let mut t = DMatrix::<f64>::zeros(m + 1, width);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, width - 1)] = b[i];
    }
    for j in 0..n {
        t[(m, j)] = -c[j];
    }
    let scale = c.iter().fold(1.0f64, |s, v| s.max(v.abs()));
    let mut basis: Vec<usize> = (n..n + m).collect();
    let max_pivots = 200 * (n + m) + 1000;
    for _ in 0..max_pivots {
        let (q, v) = (0..n + m)
            .map(|j| (j, t[(m, j)]))
            .fold((usize::MAX, 0.0), |best, cur| if cur.1 < best.1 { cur } else { best });
        if v >= -PIVOT_TOL * scale {
            let mut x = vec![0.0; n];
            for (i, &bi) in basis.iter().enumerate() {
                if bi < n {
                    x[bi] = t[(i, width - 1)];
                }
            }
            return Ok(LpOutcome::Optimal {
                value: t[(m, width - 1)],
                x,
            });
        }
        let rows: Vec<usize> = (0..m).filter(|&i| t[(i, q)] > PIVOT_TOL).collect();
        if rows.is_empty() {
            return Ok(LpOutcome::Unbounded);
        }
        let ratio = |i: usize| t[(i, width - 1)] / t[(i, q)];
        let best = rows.iter().map(|&i| ratio(i)).fold(f64::INFINITY, f64::min);
        let mut tied: Vec<usize> = rows
            .into_iter()
            .filter(|&i| ratio(i) <= best + RATIO_TOL)
            .collect();
        for k in 0..m {
            if tied.len() == 1 {
                break;
            }
            let key = |i: usize| t[(i, n + k)] / t[(i, q)];
            let lo = tied.iter().map(|&i| key(i)).fold(f64::INFINITY, f64::min);
            tied.retain(|&i| key(i) <= lo + RATIO_TOL);
        }
        let p = tied[0];
        let piv = t[(p, q)];
        for j in 0..width {
            t[(p, j)] /= piv;
        }
        for i in 0..=m {
            if i != p {
                let f = t[(i, q)];
                if f != 0.0 {
                    for j in 0..width {
                        let v = t[(p, j)];
                        t[(i, j)] -= f * v;
                    }
                }
            }
        }
        for i in 0..m {
            if t[(i, width - 1)].abs() < RATIO_TOL {
                t[(i, width - 1)] = 0.0;
            }
        }
        basis[p] = q;
    }
    Err(Error::Numerical(format!(
        "simplex did not terminate within {max_pivots} pivots"
    )))
}
