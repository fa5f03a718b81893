//! Growable Cholesky factor of an active-set Gram matrix.

use crate::Real;

/// Lower-triangular `L` with `G = L Lᵀ`, stored row by row.
#[derive(Debug, Clone, Default)]
pub(crate) struct UpdatableCholesky<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Real> UpdatableCholesky<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Appends a row/column with off-diagonal part `g` (inner products with the
    /// existing columns) and diagonal `diag`. Returns `false` and leaves the
    /// factor untouched if the new column is numerically dependent.
    pub fn push(&mut self, g: &[T], diag: T, rel_tol: T) -> bool {
        let k = self.rows.len();
        debug_assert_eq!(g.len(), k);
        let mut l = g.to_vec();
        self.forward_in_place(&mut l);
        let sq: T = l.iter().fold(T::zero(), |acc, &x| acc + x * x);
        let pivot = diag - sq;
        if pivot <= rel_tol * diag || !pivot.is_finite() {
            return false;
        }
        l.push(pivot.sqrt());
        self.rows.push(l);
        true
    }

    /// Removes row/column `i` and restores triangular form with Givens rotations.
    pub fn remove(&mut self, i: usize) {
        self.rows.remove(i);
        let k = self.rows.len();
        for j in i..k {
            let a = self.rows[j][j];
            let b = self.rows[j][j + 1];
            let r = a.hypot(b);
            let (c, s) = if r == T::zero() {
                (T::one(), T::zero())
            } else {
                (a / r, b / r)
            };
            for row in self.rows[j..].iter_mut() {
                let x = row[j];
                let y = row[j + 1];
                row[j] = c * x + s * y;
                row[j + 1] = c * y - s * x;
            }
            self.rows[j].truncate(j + 1);
            if self.rows[j][j] < T::zero() {
                for row in self.rows[j..].iter_mut() {
                    row[j] = -row[j];
                }
            }
        }
    }

    fn forward_in_place(&self, b: &mut [T]) {
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = b[i];
            for (lij, bj) in row[..i].iter().zip(b.iter()) {
                s -= *lij * *bj;
            }
            b[i] = s / row[i];
        }
    }

    fn backward_in_place(&self, b: &mut [T]) {
        let k = self.rows.len();
        for i in (0..k).rev() {
            let mut s = b[i];
            for (j, bj) in b.iter().enumerate().take(k).skip(i + 1) {
                s -= self.rows[j][i] * *bj;
            }
            b[i] = s / self.rows[i][i];
        }
    }

    /// Solves `G x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        self.forward_in_place(b);
        self.backward_in_place(b);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn gram_of(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
        let s = a.select_columns(cols);
        s.transpose() * s
    }

    fn build(a: &DMatrix<f64>, cols: &[usize]) -> UpdatableCholesky<f64> {
        let mut ch = UpdatableCholesky::new();
        for (k, &c) in cols.iter().enumerate() {
            let g: Vec<f64> = cols[..k].iter().map(|&o| a.column(o).dot(&a.column(c))).collect();
            assert!(ch.push(&g, a.column(c).norm_squared(), 1e-12));
        }
        ch
    }

    fn check_solve(ch: &UpdatableCholesky<f64>, g: &DMatrix<f64>) {
        let k = g.nrows();
        let b: Vec<f64> = (0..k).map(|i| (i as f64 + 1.0).sin()).collect();
        let mut x = b.clone();
        ch.solve_in_place(&mut x);
        let gx = g * nalgebra::DVector::from_vec(x);
        for i in 0..k {
            assert!((gx[i] - b[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn push_and_remove_match_direct_factor() {
        let a = DMatrix::from_fn(12, 7, |i, j| (((i + 1) * (j + 2)) as f64).sqrt().sin() + 0.1 * j as f64);
        let cols = [0, 3, 5, 1, 6];
        let mut ch = build(&a, &cols);
        check_solve(&ch, &gram_of(&a, &cols));
        ch.remove(1);
        check_solve(&ch, &gram_of(&a, &[0, 5, 1, 6]));
        ch.remove(3);
        check_solve(&ch, &gram_of(&a, &[0, 5, 1]));
        ch.remove(0);
        check_solve(&ch, &gram_of(&a, &[5, 1]));
        assert_eq!(ch.len(), 2);
    }

    #[test]
    fn dependent_column_rejected() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let mut ch = build(&a, &[0, 1]);
        let g = [1.0, 1.0];
        assert!(!ch.push(&g, 2.0, 1e-12));
        assert_eq!(ch.len(), 2);
    }
}
