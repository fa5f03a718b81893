//! Pareto-curve root finding with a spectral projected-gradient LASSO solver.
//!
//! `φ(τ) = min{‖Ac − u‖ : ‖c‖₁ ≤ τ}` is convex and decreasing with
//! `φ'(τ) = −‖Aᵀr_τ‖_∞ / ‖r_τ‖`. Newton's method on `φ(τ) = ε` yields the
//! ℓ1 budget whose LASSO solution solves the ε-constrained problem. Each LASSO
//! subproblem is solved by projected gradient with Barzilai–Borwein steps and
//! a non-monotone Armijo line search, warm-started from the previous budget.

use crate::{Real, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub(crate) struct SpgConfig<T> {
    pub max_iters: usize,
    /// Relative tolerance on `|φ(τ) − ε|`.
    pub root_tol: T,
    /// Relative duality gap at which a LASSO subproblem counts as solved.
    pub gap_tol: T,
    pub residual_floor: T,
}

#[derive(Debug, Clone)]
pub(crate) struct SpgOutcome<T> {
    pub c: DVector<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// Euclidean projection onto `{x : ‖x‖₁ ≤ tau}`.
pub fn project_l1_ball<T: Real>(x: &DVector<T>, tau: T) -> DVector<T> {
    let norm1 = x.lp_norm(1);
    if norm1 <= tau {
        return x.clone();
    }
    if tau <= T::zero() {
        return DVector::zeros(x.len());
    }
    let mut mags: Vec<T> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - tau) / T::from_usize_lossy(k + 1);
        if t >= m {
            break;
        }
        theta = t;
    }
    x.map(|v| v.signum() * (v.abs() - theta).max(T::zero()))
}

struct Lasso<'a, T: Real> {
    a: &'a DMatrix<T>,
    u: &'a DVector<T>,
}

impl<T: Real> Lasso<'_, T> {
    fn residual(&self, x: &DVector<T>) -> DVector<T> {
        self.u - self.a * x
    }

    /// Returns the number of iterations used.
    fn solve(&self, x: &mut DVector<T>, tau: T, cfg: &SpgConfig<T>, budget: usize) -> usize {
        const HISTORY: usize = 10;
        let half = T::lit(0.5);
        let gamma = T::lit(1e-4);
        let (step_min, step_max) = (T::lit(1e-16), T::lit(1e16));

        *x = project_l1_ball(x, tau);
        let mut r = self.residual(x);
        let mut f = half * r.norm_squared();
        let mut g = -self.a.tr_mul(&r);
        let mut history = [f; HISTORY];
        let mut step = {
            let pg = project_l1_ball(&(&*x - &g), tau) - &*x;
            let m = pg.amax();
            if m > T::zero() { (T::one() / m).clamp(step_min, step_max) } else { T::one() }
        };
        let mut it = 0;
        while it < budget {
            it += 1;
            let gap = tau * g.amax() + x.dot(&g);
            if gap <= cfg.gap_tol * f.max(T::one()) || r.norm() <= cfg.residual_floor {
                break;
            }
            let d = project_l1_ball(&(&*x - &g * step), tau) - &*x;
            let gtd = g.dot(&d);
            if gtd >= T::zero() {
                break;
            }
            let ad = self.a * &d;
            let fmax = history.iter().copied().fold(f, T::max);
            let mut s = T::one();
            let (x_new, r_new, f_new) = loop {
                let r_try = &r - &ad * s;
                let f_try = half * r_try.norm_squared();
                if f_try <= fmax + gamma * s * gtd || s < T::lit(1e-10) {
                    break (&*x + &d * s, r_try, f_try);
                }
                // safeguarded quadratic backtracking
                let denom = T::lit(2.0) * (f_try - f - s * gtd);
                let mut s_new = if denom > T::zero() { -gtd * s * s / denom } else { s * half };
                if s_new < T::lit(0.1) * s || s_new > T::lit(0.9) * s {
                    s_new = s * half;
                }
                s = s_new;
            };
            let g_new = -self.a.tr_mul(&r_new);
            let sx = &x_new - &*x;
            let yg = &g_new - &g;
            let sty = sx.dot(&yg);
            step = if sty > T::zero() {
                (sx.norm_squared() / sty).clamp(step_min, step_max)
            } else {
                step_max
            };
            *x = x_new;
            r = r_new;
            f = f_new;
            g = g_new;
            history.rotate_left(1);
            history[HISTORY - 1] = f;
        }
        it
    }
}

pub(crate) fn bpdn_spg<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    eps: T,
    cfg: SpgConfig<T>,
) -> Result<SpgOutcome<T>> {
    let p = a.ncols();
    let mut x = DVector::zeros(p);
    if u.norm() <= eps + cfg.residual_floor {
        return Ok(SpgOutcome {
            c: x,
            iterations: 0,
            converged: true,
        });
    }
    let lasso = Lasso { a, u };
    let mut tau = T::zero();
    let mut total = 0usize;
    let mut converged = false;
    let target_tol = cfg.root_tol * eps.max(cfg.residual_floor);
    for _ in 0..100 {
        let budget = cfg.max_iters.saturating_sub(total).max(1);
        total += lasso.solve(&mut x, tau, &cfg, budget);
        let r = lasso.residual(&x);
        let phi = r.norm();
        if (phi - eps).abs() <= target_tol || (eps == T::zero() && phi <= cfg.residual_floor) {
            converged = true;
            break;
        }
        if total >= cfg.max_iters {
            break;
        }
        let dual = a.tr_mul(&r).amax();
        if dual <= T::zero() {
            break;
        }
        let tau_new = (tau + (phi - eps) * phi / dual).max(T::zero());
        if (tau_new - tau).abs() <= T::default_epsilon() * tau.max(T::one()) {
            converged = phi <= eps + target_tol;
            break;
        }
        tau = tau_new;
    }
    Ok(SpgOutcome {
        c: x,
        iterations: total,
        converged,
    })
}
