//! LASSO homotopy for the ε-constrained ℓ1 problem.
//!
//! Follows the piecewise-linear solution path of
//! `min ½‖Ac − u‖² + λ‖c‖₁` from `λ = ‖Aᵀu‖_∞` down to `λ = 0`. Along one
//! segment the active set and signs are fixed, so `c(λ) = G⁻¹(A_Sᵀu − λ s)` and
//! the residual norm is an explicit quadratic in `λ`; the point where it equals
//! a requested tolerance ε is therefore located exactly. Because the residual
//! norm decreases monotonically along the path, several tolerances can be
//! served from one sweep.

use super::cholesky::UpdatableCholesky;
use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct PathPoint<T> {
    pub c: DVector<T>,
    /// Regularization level of the point; read by the path tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub lambda: T,
    pub steps: usize,
    pub feasible: bool,
    pub completed: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct HomotopyConfig<T> {
    pub max_steps: usize,
    /// Absolute residual slack, already scaled by ‖u‖.
    pub residual_floor: T,
    pub rank_tol: T,
}

struct Segment<T: Real> {
    base: Vec<T>,
    dir: Vec<T>,
    r0: DVector<T>,
    v: DVector<T>,
}

struct PathState<'a, T: Real> {
    a: &'a DMatrix<T>,
    u: &'a DVector<T>,
    active: Vec<usize>,
    signs: Vec<T>,
    is_active: Vec<bool>,
    blocked: Vec<bool>,
    chol: UpdatableCholesky<T>,
    rank_tol: T,
}

impl<'a, T: Real> PathState<'a, T> {
    fn new(a: &'a DMatrix<T>, u: &'a DVector<T>, rank_tol: T) -> Self {
        let p = a.ncols();
        Self {
            a,
            u,
            active: Vec::new(),
            signs: Vec::new(),
            is_active: vec![false; p],
            blocked: vec![false; p],
            chol: UpdatableCholesky::new(),
            rank_tol,
        }
    }

    fn insert(&mut self, j: usize, sign: T) -> bool {
        let col = self.a.column(j);
        let g: Vec<T> = self
            .active
            .iter()
            .map(|&k| self.a.column(k).dot(&col))
            .collect();
        if !self.chol.push(&g, col.norm_squared(), self.rank_tol) {
            self.blocked[j] = true;
            return false;
        }
        self.active.push(j);
        self.signs.push(sign);
        self.is_active[j] = true;
        true
    }

    fn remove(&mut self, pos: usize) -> usize {
        let j = self.active.remove(pos);
        self.signs.remove(pos);
        self.chol.remove(pos);
        self.is_active[j] = false;
        j
    }

    fn segment(&self) -> Segment<T> {
        let k = self.active.len();
        let mut base: Vec<T> = self
            .active
            .iter()
            .map(|&j| self.a.column(j).dot(self.u))
            .collect();
        let mut dir = self.signs.clone();
        self.chol.solve_in_place(&mut base);
        self.chol.solve_in_place(&mut dir);
        let n = self.a.nrows();
        let mut fitted = DVector::zeros(n);
        let mut v = DVector::zeros(n);
        for i in 0..k {
            let col = self.a.column(self.active[i]);
            fitted.axpy(base[i], &col, T::one());
            v.axpy(dir[i], &col, T::one());
        }
        Segment {
            base,
            dir,
            r0: self.u - fitted,
            v,
        }
    }

    fn coefficients(&self, seg: &Segment<T>, lambda: T) -> DVector<T> {
        let mut c = DVector::zeros(self.a.ncols());
        for (i, &j) in self.active.iter().enumerate() {
            c[j] = seg.base[i] - lambda * seg.dir[i];
        }
        c
    }

    // Re-solves the KKT system of the final segment through a QR factorisation
    // of the active columns; conditioning is that of A_S rather than of its Gram.
    fn polish(&self, lambda: T) -> Option<DVector<T>> {
        let k = self.active.len();
        if k == 0 {
            return Some(DVector::zeros(self.a.ncols()));
        }
        if k > self.a.nrows() {
            return None;
        }
        let sub = self.a.select_columns(&self.active);
        let qr = sub.qr();
        let r = qr.r();
        let mut qtu = self.u.clone();
        qr.q_tr_mul(&mut qtu);
        let qtu = qtu.rows(0, k).into_owned();
        let s = DVector::from_column_slice(&self.signs);
        let w = r.transpose().solve_lower_triangular(&s)?;
        let cs = r.solve_upper_triangular(&(qtu - w * lambda))?;
        if cs.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let mut c = DVector::zeros(self.a.ncols());
        for (i, &j) in self.active.iter().enumerate() {
            c[j] = cs[i];
        }
        Some(c)
    }
}

fn residual_norm<T: Real>(a: &DMatrix<T>, u: &DVector<T>, c: &DVector<T>) -> T {
    (a * c - u).norm()
}

// Largest λ' in [lo, hi] with ‖r0 + λ' v‖ = eps, given the residual exceeds
// eps at hi and not at lo.
fn crossing<T: Real>(seg: &Segment<T>, eps: T, lo: T, hi: T) -> T {
    let qa = seg.v.norm_squared();
    let qb = seg.r0.dot(&seg.v);
    let qc = seg.r0.norm_squared() - eps * eps;
    if qa <= T::zero() {
        return lo;
    }
    let disc = (qb * qb - qa * qc).max(T::zero());
    let root = (-qb + disc.sqrt()) / qa;
    root.clamp(lo, hi)
}

/// Solves `min ‖c‖₁ s.t. ‖Ac − u‖ ≤ ε` for every ε in `targets`.
///
/// Results are returned in the order of `targets`.
pub(crate) fn bpdn_path<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    targets: &[T],
    cfg: HomotopyConfig<T>,
) -> Result<Vec<PathPoint<T>>> {
    let (n, p) = a.shape();
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {n} rows, observation vector has {}",
            u.len()
        )));
    }
    for &e in targets {
        if !(e >= T::zero()) || !e.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be finite and nonnegative, got {e}"
            )));
        }
    }
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&i, &j| targets[j].partial_cmp(&targets[i]).unwrap());
    let mut out: Vec<Option<PathPoint<T>>> = vec![None; targets.len()];
    let mut next = 0usize;

    let unorm = u.norm();
    let floor = cfg.residual_floor;
    // Tolerances the zero vector already satisfies.
    while next < order.len() && unorm <= targets[order[next]] + floor {
        out[order[next]] = Some(PathPoint {
            c: DVector::zeros(p),
            lambda: T::zero(),
            steps: 0,
            feasible: true,
            completed: true,
        });
        next += 1;
    }
    if next == order.len() {
        return Ok(out.into_iter().map(Option::unwrap).collect());
    }

    let corr0 = a.tr_mul(u);
    let mut lambda = corr0.amax();
    let mut state = PathState::new(a, u, cfg.rank_tol);
    if lambda > T::zero() {
        let tie = lambda * (T::one() - T::lit(1e-12));
        let mut entering: Vec<usize> = (0..p).filter(|&j| corr0[j].abs() >= tie).collect();
        entering.sort_by(|&i, &j| corr0[j].abs().partial_cmp(&corr0[i].abs()).unwrap());
        for j in entering {
            let s = corr0[j].signum();
            state.insert(j, s);
        }
    }

    let eps_machine = T::default_epsilon();
    let mut just_dropped: Option<usize> = None;
    let mut steps = 0usize;

    loop {
        let seg = state.segment();
        let pr = a.tr_mul(&seg.r0);
        let qv = a.tr_mul(&seg.v);

        // Next breakpoint below the current λ.
        let mut lambda_next = T::zero();
        let mut event: Option<(usize, bool, T)> = None; // (index, entering, sign)
        let ceiling = lambda * (T::one() + T::lit(1e-10));
        for j in 0..p {
            if state.is_active[j] || state.blocked[j] || Some(j) == just_dropped {
                continue;
            }
            for (num, den, sign) in [(pr[j], T::one() - qv[j], T::one()), (-pr[j], T::one() + qv[j], -T::one())] {
                if den > eps_machine {
                    let l = num / den;
                    if l < ceiling && l > lambda_next {
                        lambda_next = l.min(lambda);
                        event = Some((j, true, sign));
                    }
                }
            }
        }
        let drop_ceiling = lambda * (T::one() - T::lit(1e-12));
        for (i, &j) in state.active.iter().enumerate() {
            let d = seg.dir[i];
            // Only coefficients shrinking toward zero as λ decreases can
            // vanish; this also keeps a column that just entered.
            if d * state.signs[i] < T::zero() {
                let l = seg.base[i] / d;
                if l < drop_ceiling && l > lambda_next {
                    lambda_next = l;
                    event = Some((j, false, T::zero()));
                }
            }
        }

        // Serve every tolerance reached on this segment.
        let res_at = |l: T| (&seg.r0 + &seg.v * l).norm();
        let res_next = res_at(lambda_next);
        while next < order.len() {
            let eps = targets[order[next]];
            // Within the round-off floor the rest of the path is noise.
            let reached = res_next <= eps + floor;
            if !reached {
                break;
            }
            let l = if res_next <= eps {
                crossing(&seg, eps, lambda_next, lambda)
            } else {
                lambda_next
            };
            let mut c = state
                .polish(l)
                .unwrap_or_else(|| state.coefficients(&seg, l));
            if residual_norm(a, u, &c) > eps + floor {
                let alt = state.coefficients(&seg, l);
                if residual_norm(a, u, &alt) < residual_norm(a, u, &c) {
                    c = alt;
                }
            }
            out[order[next]] = Some(PathPoint {
                c,
                lambda: l,
                steps,
                feasible: true,
                completed: true,
            });
            next += 1;
        }
        if next == order.len() {
            break;
        }

        match event {
            None => {
                // λ = 0: least-squares fit on the final active set; remaining
                // tolerances are below the attainable residual.
                let c = state
                    .polish(T::zero())
                    .unwrap_or_else(|| state.coefficients(&seg, T::zero()));
                while next < order.len() {
                    out[order[next]] = Some(PathPoint {
                        c: c.clone(),
                        lambda: T::zero(),
                        steps,
                        feasible: false,
                        completed: true,
                    });
                    next += 1;
                }
                break;
            }
            Some((j, true, sign)) => {
                state.insert(j, sign);
                just_dropped = None;
            }
            Some((j, false, _)) => {
                let pos = state.active.iter().position(|&k| k == j).unwrap();
                state.remove(pos);
                just_dropped = Some(j);
            }
        }
        lambda = lambda_next;
        steps += 1;
        if steps >= cfg.max_steps {
            let seg = state.segment();
            let c = state.coefficients(&seg, lambda);
            let res = residual_norm(a, u, &c);
            while next < order.len() {
                let eps = targets[order[next]];
                out[order[next]] = Some(PathPoint {
                    c: c.clone(),
                    lambda,
                    steps,
                    feasible: res <= eps + floor,
                    completed: false,
                });
                next += 1;
            }
            break;
        }
    }
    Ok(out.into_iter().map(Option::unwrap).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> HomotopyConfig<f64> {
        HomotopyConfig {
            max_steps: 1000,
            residual_floor: 1e-12,
            rank_tol: 1e-10,
        }
    }

    #[test]
    fn path_points_satisfy_lasso_conditions() {
        let a = DMatrix::from_fn(8, 14, |i, j| (((i + 2) * (j + 1)) as f64).sqrt().cos());
        let u = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin() + 0.3);
        let targets = [0.9 * u.norm(), 0.5 * u.norm(), 0.1 * u.norm()];
        let points = bpdn_path(&a, &u, &targets, cfg()).unwrap();
        for (pt, &eps) in points.iter().zip(&targets) {
            assert!(pt.feasible && pt.completed);
            let r = &u - &a * &pt.c;
            assert!((r.norm() - eps).abs() < 1e-9 * u.norm());
            let corr = a.transpose() * r;
            for j in 0..a.ncols() {
                if pt.c[j] != 0.0 {
                    assert!((corr[j] - pt.lambda * pt.c[j].signum()).abs() < 1e-9);
                } else {
                    assert!(corr[j].abs() <= pt.lambda * (1.0 + 1e-9));
                }
            }
        }
        assert!(points[0].lambda > points[1].lambda && points[1].lambda > points[2].lambda);
    }

    #[test]
    fn step_budget_is_reported() {
        let a = DMatrix::from_fn(8, 14, |i, j| (((i + 2) * (j + 1)) as f64).sqrt().cos());
        let u = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin() + 0.3);
        let mut c = cfg();
        c.max_steps = 1;
        let points = bpdn_path(&a, &u, &[0.0], c).unwrap();
        assert!(!points[0].completed);
    }
}
