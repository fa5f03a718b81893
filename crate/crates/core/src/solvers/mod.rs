//! ℓ1-constrained recovery: basis pursuit denoising (BPDN), its weighted and
//! iteratively re-weighted variants, and least-squares baselines.
//!
//! The default engine is a LASSO homotopy ([`Algorithm::Homotopy`]) that
//! walks the exact solution path and stops where the residual norm reaches ε.
//! [`Algorithm::SpectralProjectedGradient`] is an independent first-order
//! route (Pareto-curve Newton iteration over projected-gradient LASSO solves)
//! kept for cross-checking.

mod cholesky;
mod homotopy;
mod spg;

pub use spg::project_l1_ball;

use crate::pc_basis::MeasurementSet;
use crate::{Error, Real, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Where a weight vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProvenance {
    Uniform,
    PriorBound,
    Iterate,
}

/// Strictly positive, finite diagonal weights `w_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<T> {
    w: Vec<T>,
    provenance: WeightProvenance,
}

impl<T: Real> WeightVector<T> {
    pub fn new(w: Vec<T>, provenance: WeightProvenance) -> Result<Self> {
        if let Some((j, bad)) = w
            .iter()
            .enumerate()
            .find(|(_, x)| !(x.is_finite() && **x > T::zero()))
        {
            return Err(Error::InvalidArgument(format!(
                "weight {j} is {bad}; weights must be finite and positive"
            )));
        }
        Ok(Self { w, provenance })
    }

    pub fn uniform(p: usize) -> Self {
        Self {
            w: vec![T::one(); p],
            provenance: WeightProvenance::Uniform,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.w
    }

    pub fn provenance(&self) -> WeightProvenance {
        self.provenance
    }

    /// Multiplies every weight by `t > 0`.
    pub fn scaled(&self, t: T) -> Result<Self> {
        Self::new(self.w.iter().map(|&x| x * t).collect(), self.provenance)
    }

    /// `‖Wc‖₁`.
    pub fn weighted_l1(&self, c: &DVector<T>) -> T {
        self.w
            .iter()
            .zip(c.iter())
            .fold(T::zero(), |acc, (&w, &x)| acc + w * x.abs())
    }
}

/// Output of a recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult<T> {
    /// Coefficient vector, length `P`.
    pub c: Vec<T>,
    /// `‖Ψc − u‖₂`.
    pub residual: T,
    /// `‖Wc‖₁` (plain ℓ1 norm for unweighted solves).
    pub objective: T,
    pub epsilon_used: T,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> RecoveryResult<T> {
    pub fn coefficients(&self) -> DVector<T> {
        DVector::from_column_slice(&self.c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Homotopy,
    SpectralProjectedGradient,
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    pub algorithm: Algorithm,
    /// Relative slack on the residual constraint: `‖Ψc−u‖ ≤ ε(1 + tol)`.
    pub feasibility_tol: T,
    /// Round-off floor on the residual, relative to `‖u‖`.
    pub residual_floor: T,
    /// Inner iteration cap is `max_iter_factor · P`.
    pub max_iter_factor: usize,
    /// Relative pivot below which a column counts as linearly dependent.
    pub rank_tol: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        let tiny = T::default_epsilon().sqrt() * T::lit(1e-2);
        Self {
            algorithm: Algorithm::Homotopy,
            feasibility_tol: T::lit(1e-6),
            residual_floor: tiny,
            max_iter_factor: 10,
            rank_tol: tiny,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    /// Whether `residual` satisfies the constraint `≤ eps` up to tolerance.
    pub fn is_feasible(&self, residual: T, eps: T, unorm: T) -> bool {
        residual <= eps * (T::one() + self.feasibility_tol) + self.residual_floor * unorm
    }
}

/// Solves `min ‖c‖₁ s.t. ‖Ac − u‖₂ ≤ ε` for each tolerance in `eps`.
///
/// Infeasible tolerances yield the least-squares minimiser with
/// `converged = false`.
pub fn bpdn_matrix_many<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    eps: &[T],
    opts: &SolverOptions<T>,
) -> Result<Vec<RecoveryResult<T>>> {
    if a.nrows() != u.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, observation vector has {}",
            a.nrows(),
            u.len()
        )));
    }
    if a.iter().all(|x| *x == T::zero()) {
        return Err(Error::InvalidArgument("measurement matrix is zero".into()));
    }
    let unorm = u.norm();
    let floor = opts.residual_floor * unorm;
    let max_steps = opts.max_iter_factor.max(1) * a.ncols().max(1);
    let finish = |c: DVector<T>, eps: T, iterations: usize, ok: bool| {
        let residual = (a * &c - u).norm();
        RecoveryResult {
            objective: c.lp_norm(1),
            converged: ok && opts.is_feasible(residual, eps, unorm),
            c: c.iter().copied().collect(),
            residual,
            epsilon_used: eps,
            iterations,
        }
    };
    match opts.algorithm {
        Algorithm::Homotopy => {
            let cfg = homotopy::HomotopyConfig {
                max_steps,
                residual_floor: floor,
                rank_tol: opts.rank_tol,
            };
            let points = homotopy::bpdn_path(a, u, eps, cfg)?;
            Ok(points
                .into_iter()
                .zip(eps)
                .map(|(pt, &e)| finish(pt.c, e, pt.steps, pt.feasible && pt.completed))
                .collect())
        }
        Algorithm::SpectralProjectedGradient => {
            let cfg = spg::SpgConfig {
                max_iters: max_steps * 100,
                root_tol: opts.feasibility_tol,
                gap_tol: T::lit(1e-10),
                residual_floor: floor,
            };
            eps.iter()
                .map(|&e| {
                    if !(e >= T::zero()) || !e.is_finite() {
                        return Err(Error::InvalidArgument(format!(
                            "tolerance must be finite and nonnegative, got {e}"
                        )));
                    }
                    let out = spg::bpdn_spg(a, u, e, cfg)?;
                    Ok(finish(out.c, e, out.iterations, out.converged))
                })
                .collect()
        }
    }
}

/// Single-tolerance form of [`bpdn_matrix_many`].
pub fn bpdn_matrix<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    eps: T,
    opts: &SolverOptions<T>,
) -> Result<RecoveryResult<T>> {
    Ok(bpdn_matrix_many(a, u, &[eps], opts)?.pop().unwrap())
}

/// Basis pursuit denoising: `min ‖c‖₁ s.t. ‖Ψc − u‖₂ ≤ ε`.
pub fn solve_bpdn<T: Real>(m: &MeasurementSet<T>, epsilon: T) -> Result<RecoveryResult<T>> {
    bpdn_matrix(m.psi(), m.u(), epsilon, &SolverOptions::default())
}

pub fn solve_bpdn_with<T: Real>(
    m: &MeasurementSet<T>,
    epsilon: T,
    opts: &SolverOptions<T>,
) -> Result<RecoveryResult<T>> {
    bpdn_matrix(m.psi(), m.u(), epsilon, opts)
}

fn check_weights<T: Real>(p: usize, w: &WeightVector<T>) -> Result<()> {
    if w.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {p} basis functions",
            w.len()
        )));
    }
    // WeightVector::new already guarantees positivity; re-check for deserialized input.
    WeightVector::new(w.as_slice().to_vec(), w.provenance()).map(|_| ())
}

/// Weighted BPDN for several tolerances: solves the unweighted problem for
/// `ΨW⁻¹` and maps back with `c = W⁻¹c̃`.
pub fn weighted_bpdn_many<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    eps: &[T],
    w: &WeightVector<T>,
    opts: &SolverOptions<T>,
) -> Result<Vec<RecoveryResult<T>>> {
    check_weights(a.ncols(), w)?;
    let mut scaled = a.clone();
    for (j, &wj) in w.as_slice().iter().enumerate() {
        scaled.column_mut(j).unscale_mut(wj);
    }
    let mut out = bpdn_matrix_many(&scaled, u, eps, opts)?;
    for r in &mut out {
        for (c, &wj) in r.c.iter_mut().zip(w.as_slice()) {
            *c /= wj;
        }
        r.objective = w.weighted_l1(&DVector::from_column_slice(&r.c));
        r.residual = (a * DVector::from_column_slice(&r.c) - u).norm();
    }
    Ok(out)
}

/// Weighted BPDN: `min ‖Wc‖₁ s.t. ‖Ψc − u‖₂ ≤ ε`.
pub fn solve_weighted_bpdn<T: Real>(
    m: &MeasurementSet<T>,
    epsilon: T,
    w: &WeightVector<T>,
) -> Result<RecoveryResult<T>> {
    solve_weighted_bpdn_with(m, epsilon, w, &SolverOptions::default())
}

pub fn solve_weighted_bpdn_with<T: Real>(
    m: &MeasurementSet<T>,
    epsilon: T,
    w: &WeightVector<T>,
    opts: &SolverOptions<T>,
) -> Result<RecoveryResult<T>> {
    Ok(weighted_bpdn_many(m.psi(), m.u(), &[epsilon], w, opts)?
        .pop()
        .unwrap())
}

/// Change in ℓ2 between successive iterates below which re-weighting stops.
pub const REWEIGHT_STOP: f64 = 1e-8;

/// Iteratively re-weighted ℓ1 for several tolerances (each run independently).
pub fn reweighted_many<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    eps: &[T],
    eps_w: T,
    max_iter: usize,
    opts: &SolverOptions<T>,
) -> Result<Vec<RecoveryResult<T>>> {
    if !(eps_w > T::zero()) || !eps_w.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "damping eps_w must be positive, got {eps_w}"
        )));
    }
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let first = bpdn_matrix_many(a, u, eps, opts)?;
    first
        .into_iter()
        .zip(eps)
        .map(|(mut current, &e)| {
            let mut iterations = 1;
            let mut settled = max_iter == 1;
            while iterations < max_iter {
                let w = WeightVector::new(
                    current.c.iter().map(|c| T::one() / (c.abs() + eps_w)).collect(),
                    WeightProvenance::Iterate,
                )?;
                let next = weighted_bpdn_many(a, u, &[e], &w, opts)?.pop().unwrap();
                iterations += 1;
                let change = (next.coefficients() - current.coefficients()).norm();
                current = next;
                if change < T::lit(REWEIGHT_STOP) {
                    settled = true;
                    break;
                }
            }
            current.iterations = iterations;
            current.converged = current.converged && settled;
            Ok(current)
        })
        .collect()
}

/// Iteratively re-weighted ℓ1: the first solve is unweighted, each later solve
/// uses `w_j = (|ĉ_j| + eps_w)⁻¹` from the previous iterate. Stops after
/// `max_iter` solves or once successive iterates differ by less than
/// [`REWEIGHT_STOP`]. Lack of convergence is reported through `converged`.
pub fn solve_reweighted<T: Real>(
    m: &MeasurementSet<T>,
    epsilon: T,
    eps_w: T,
    max_iter: usize,
) -> Result<RecoveryResult<T>> {
    Ok(reweighted_many(
        m.psi(),
        m.u(),
        &[epsilon],
        eps_w,
        max_iter,
        &SolverOptions::default(),
    )?
    .pop()
    .unwrap())
}

/// Least-squares fit on the columns in `support`; zero elsewhere.
pub fn least_squares<T: Real>(m: &MeasurementSet<T>, support: &[usize]) -> Result<DVector<T>> {
    least_squares_matrix(m.psi(), m.u(), support)
}

pub fn least_squares_matrix<T: Real>(
    a: &DMatrix<T>,
    u: &DVector<T>,
    support: &[usize],
) -> Result<DVector<T>> {
    let (n, p) = a.shape();
    if u.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {n} rows, observation vector has {}",
            u.len()
        )));
    }
    if let Some(&bad) = support.iter().find(|&&j| j >= p) {
        return Err(Error::InvalidArgument(format!(
            "support index {bad} out of range for {p} columns"
        )));
    }
    let k = support.len();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "support of size {k} exceeds the {n} available samples"
        )));
    }
    let mut c = DVector::zeros(p);
    if k == 0 {
        return Ok(c);
    }
    let sub = a.select_columns(support);
    let qr = sub.qr();
    let r = qr.r();
    let scale = r.diagonal().amax();
    let tol = SolverOptions::<T>::default().rank_tol * scale;
    if let Some(i) = (0..k).find(|&i| r[(i, i)].abs() <= tol) {
        return Err(Error::RankDeficient(format!(
            "column {} (support position {i}) is linearly dependent on earlier support columns",
            support[i]
        )));
    }
    let mut qtu = u.clone();
    qr.q_tr_mul(&mut qtu);
    let sol = r
        .solve_upper_triangular(&qtu.rows(0, k).into_owned())
        .ok_or_else(|| Error::RankDeficient("singular triangular factor".into()))?;
    for (i, &j) in support.iter().enumerate() {
        c[j] = sol[i];
    }
    Ok(c)
}

/// Indices of the `k` largest entries of `bounds`, ties broken by position.
pub fn top_k_support<T: Real>(bounds: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..bounds.len()).collect();
    idx.sort_by(|&i, &j| {
        bounds[j]
            .partial_cmp(&bounds[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Least squares on the `⌊N/2⌋` columns with the largest a-priori bounds.
pub fn weighted_least_squares<T: Real>(
    m: &MeasurementSet<T>,
    bound_magnitudes: &[T],
) -> Result<RecoveryResult<T>> {
    if bound_magnitudes.len() != m.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} bounds for {} basis functions",
            bound_magnitudes.len(),
            m.p()
        )));
    }
    if let Some(b) = bound_magnitudes
        .iter()
        .find(|b| !(b.is_finite() && **b >= T::zero()))
    {
        return Err(Error::InvalidArgument(format!(
            "bounds must be finite and nonnegative, found {b}"
        )));
    }
    let support = top_k_support(bound_magnitudes, m.n() / 2);
    let c = least_squares(m, &support)?;
    let residual = (m.psi() * &c - m.u()).norm();
    Ok(RecoveryResult {
        objective: c.lp_norm(1),
        c: c.iter().copied().collect(),
        residual,
        epsilon_used: residual,
        iterations: 1,
        converged: true,
    })
}

/// A recovery method parameterised by the tolerance ε, as used by
/// cross-validation and the experiment driver.
pub trait EpsilonSolver<T: Real>: Sync {
    fn solve_many(&self, m: &MeasurementSet<T>, eps: &[T]) -> Result<Vec<RecoveryResult<T>>>;

    fn solve(&self, m: &MeasurementSet<T>, eps: T) -> Result<RecoveryResult<T>> {
        Ok(self.solve_many(m, &[eps])?.pop().unwrap())
    }
}

impl<T: Real, F> EpsilonSolver<T> for F
where
    F: Fn(&MeasurementSet<T>, T) -> Result<RecoveryResult<T>> + Sync,
{
    fn solve_many(&self, m: &MeasurementSet<T>, eps: &[T]) -> Result<Vec<RecoveryResult<T>>> {
        eps.iter().map(|&e| self(m, e)).collect()
    }
}

/// The ℓ1 recovery variants.
#[derive(Debug, Clone)]
pub enum L1Method<T: Real> {
    Standard,
    Weighted(WeightVector<T>),
    Reweighted { eps_w: T, max_iter: usize },
}

/// An [`L1Method`] together with solver options.
#[derive(Debug, Clone)]
pub struct L1Solver<T: Real> {
    pub method: L1Method<T>,
    pub options: SolverOptions<T>,
}

impl<T: Real> L1Solver<T> {
    pub fn new(method: L1Method<T>) -> Self {
        Self {
            method,
            options: SolverOptions::default(),
        }
    }
}

impl<T: Real> EpsilonSolver<T> for L1Solver<T> {
    fn solve_many(&self, m: &MeasurementSet<T>, eps: &[T]) -> Result<Vec<RecoveryResult<T>>> {
        match &self.method {
            L1Method::Standard => bpdn_matrix_many(m.psi(), m.u(), eps, &self.options),
            L1Method::Weighted(w) => weighted_bpdn_many(m.psi(), m.u(), eps, w, &self.options),
            L1Method::Reweighted { eps_w, max_iter } => {
                reweighted_many(m.psi(), m.u(), eps, *eps_w, *max_iter, &self.options)
            }
        }
    }
}
