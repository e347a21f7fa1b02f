//! Ridge residualization with respect to the nuisance covariates.
//!
//! A [`RidgeProjector`] keeps the thin SVD `Z = U diag(s) Vᵀ` so the ridge hat operator
//! `H_λ = Z(ZᵀZ + λI)⁻¹Zᵀ = U diag(s²/(s²+λ)) Uᵀ` can be applied at any penalty in
//! `O(n·r)` without forming an `n×n` matrix. [`select_penalty`] picks λ by K-fold
//! cross-validation over a log-spaced grid.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative cutoff for retaining singular values, multiplied by `max(n, q) · s_max`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin SVD of the nuisance matrix restricted to numerically nonzero singular values.
#[derive(Debug, Clone)]
pub struct RidgeProjector {
    u: DMatrix<f64>,
    s: DVector<f64>,
    n: usize,
    q: usize,
}

impl RidgeProjector {
    /// Decomposes `Z` (n×q), dropping singular values below
    /// `RANK_TOLERANCE · max(n, q) · s_max`.
    pub fn decompose(z: &DMatrix<f64>) -> Result<Self> {
        let (n, q) = z.shape();
        if n == 0 || q == 0 {
            return Err(Error::DimensionMismatch(format!("nuisance matrix is {n}×{q}")));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Z".into()));
        }
        let svd = z.clone().svd(true, false);
        let u_full = svd.u.expect("left singular vectors requested");
        let s_max = svd.singular_values.max();
        if s_max.is_nan() || s_max <= 0.0 {
            return Err(Error::AllZeroNuisance);
        }
        let tol = RANK_TOLERANCE * n.max(q) as f64 * s_max;
        let mut keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > tol)
            .collect();
        if keep.is_empty() {
            return Err(Error::AllZeroNuisance);
        }
        keep.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = DMatrix::from_fn(n, keep.len(), |i, k| u_full[(i, keep[k])]);
        let s = DVector::from_iterator(keep.len(), keep.iter().map(|&k| svd.singular_values[k]));
        Ok(Self { u, s, n, q })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Retained singular values in decreasing order.
    pub fn singular_values(&self) -> &DVector<f64> {
        &self.s
    }

    /// Left singular vectors (n×r), orthonormal columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Nonzero eigenvalues of `H_λ`: `s_i² / (s_i² + λ)`.
    pub fn shrinkage(&self, lambda: f64) -> Result<DVector<f64>> {
        self.check_penalty(lambda)?;
        Ok(self.s.map(|s| {
            let s2 = s * s;
            s2 / (s2 + lambda)
        }))
    }

    fn check_penalty(&self, lambda: f64) -> Result<()> {
        if lambda.is_nan() || lambda < 0.0 {
            return Err(Error::InvalidPenalty(lambda));
        }
        if lambda == 0.0 && !(self.q < self.n && self.rank() == self.q) {
            return Err(Error::SingularAtZero {
                n: self.n,
                q: self.q,
                rank: self.rank(),
            });
        }
        Ok(())
    }

    /// Binds a penalty, precomputing the shrinkage factors for repeated application.
    pub fn operator(&self, lambda: f64) -> Result<RidgeOperator<'_>> {
        let factors = self.shrinkage(lambda)?;
        Ok(RidgeOperator {
            u: &self.u,
            factors,
            lambda,
        })
    }

    /// `H_λ v`.
    pub fn apply_hat(&self, lambda: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.operator(lambda)?.hat(v)
    }

    /// `R_λ v = v − H_λ v`.
    pub fn apply_residual(&self, lambda: f64, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.operator(lambda)?.residual(v)
    }

    /// Densely assembled `H_λ` (n×n). Meant for diagnostics and small problems.
    pub fn hat_matrix(&self, lambda: f64) -> Result<DMatrix<f64>> {
        let f = self.shrinkage(lambda)?;
        let mut scaled = self.u.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f[k];
        }
        Ok(&scaled * self.u.transpose())
    }
}

/// A [`RidgeProjector`] with the penalty fixed.
#[derive(Debug, Clone)]
pub struct RidgeOperator<'a> {
    u: &'a DMatrix<f64>,
    factors: DVector<f64>,
    lambda: f64,
}

impl RidgeOperator<'_> {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.u.nrows() {
            return Err(Error::LengthMismatch {
                expected: self.u.nrows(),
                got: len,
            });
        }
        Ok(())
    }

    pub fn hat(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(v.len())?;
        let mut out = DVector::zeros(v.len());
        let mut coef = DVector::zeros(self.factors.len());
        self.hat_into(v, &mut coef, &mut out);
        Ok(out)
    }

    pub fn residual(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let mut out = self.hat(v)?;
        out.zip_apply(v, |h, vi| *h = vi - *h);
        Ok(out)
    }

    /// Writes `H_λ v` into `out`; `coef` is scratch of length `rank`.
    pub(crate) fn hat_into(&self, v: &DVector<f64>, coef: &mut DVector<f64>, out: &mut DVector<f64>) {
        coef.gemv_tr(1.0, self.u, v, 0.0);
        coef.component_mul_assign(&self.factors);
        out.gemv(1.0, self.u, coef, 0.0);
    }

    /// Writes `R_λ v` into `out`.
    pub(crate) fn residual_into(&self, v: &DVector<f64>, coef: &mut DVector<f64>, out: &mut DVector<f64>) {
        self.hat_into(v, coef, out);
        out.zip_apply(v, |h, vi| *h = vi - *h);
    }

    pub(crate) fn rank(&self) -> usize {
        self.factors.len()
    }
}

/// Log-spaced candidate penalties `lo · (hi/lo)^(k/(count−1))`, ascending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyGrid {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for PenaltyGrid {
    fn default() -> Self {
        Self {
            lo: 1e-5,
            hi: 1e5,
            count: 100,
        }
    }
}

impl PenaltyGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.lo > 0.0 && self.hi.is_finite() && self.lo < self.hi) || self.count < 2 {
            return Err(Error::InvalidArgument(format!(
                "penalty grid needs 0 < lo < hi and count >= 2, got ({}, {}, {})",
                self.lo, self.hi, self.count
            )));
        }
        let (llo, lhi) = (self.lo.ln(), self.hi.ln());
        let step = (lhi - llo) / (self.count - 1) as f64;
        Ok((0..self.count)
            .map(|k| match k {
                0 => self.lo,
                k if k == self.count - 1 => self.hi,
                k => (llo + step * k as f64).exp(),
            })
            .collect())
    }
}

/// How a grid value `λ` translates into the penalty of a training-fold fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CvScaling {
    /// The parameterization of the widely used `glmnet` ridge path: training columns are
    /// scaled to unit standard deviation, the penalty applies to the scaled coefficients and
    /// equals `n_train · λ / s_y`, with `s_y` the standard deviation of the training target
    /// (divisor `n_train`).
    #[default]
    Glmnet,
    /// Raw columns and penalty `n_train · λ`.
    PerObservation,
}

impl CvScaling {
    pub fn name(self) -> &'static str {
        match self {
            CvScaling::Glmnet => "glmnet",
            CvScaling::PerObservation => "per-observation",
        }
    }
}

/// Cross-validation protocol for penalty selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    pub grid: PenaltyGrid,
    pub scaling: CvScaling,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid: PenaltyGrid::default(),
            scaling: CvScaling::default(),
            seed: 0,
        }
    }
}

/// Outcome of [`select_penalty`].
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySelection {
    /// Candidates in per-observation units, ascending.
    pub grid: Vec<f64>,
    /// Fold index (0-based) of every observation.
    pub fold_assignment: Vec<usize>,
    /// Mean over folds of the held-out mean squared prediction error, per candidate.
    pub cv_errors: Vec<f64>,
    /// Index of the minimizing candidate (smallest on ties).
    pub chosen_index: usize,
    /// Selected penalty on the `‖y − Zγ‖² + λ‖γ‖²` scale, i.e. `n · grid[chosen_index]`.
    pub chosen: f64,
    pub seed: u64,
}

/// Shuffles `0..n` with `seed` and cuts the permutation into `folds` contiguous blocks whose
/// sizes differ by at most one.
pub fn assign_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::DegenerateFolds(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::DegenerateFolds(format!(
            "{folds} folds but only {n} observations"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = n / folds;
    let extra = n % folds;
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        for &i in &order[pos..pos + size] {
            assignment[i] = fold;
        }
        pos += size;
    }
    Ok(assignment)
}

/// Selects a ridge penalty for regressing `target` on `z` by K-fold cross-validation.
///
/// Each training fit includes an intercept; the penalty attached to a grid value `λ` is set by
/// [`CvScaling`]. The returned `chosen` penalty is `n · λ_min`, applied to the centered but
/// otherwise unscaled nuisance matrix.
pub fn select_penalty(z: &DMatrix<f64>, target: &DVector<f64>, config: &CvConfig) -> Result<PenaltySelection> {
    let n = z.nrows();
    if target.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: target.len(),
        });
    }
    let grid = config.grid.values()?;
    let fold_assignment = assign_folds(n, config.folds, config.seed)?;
    for fold in 0..config.folds {
        let held = fold_assignment.iter().filter(|&&f| f == fold).count();
        if held == 0 || held == n {
            return Err(Error::DegenerateFolds(format!("fold {fold} has {held} observations")));
        }
    }

    let per_fold: Vec<Vec<f64>> = (0..config.folds)
        .into_par_iter()
        .map(|fold| fold_errors(z, target, &fold_assignment, fold, &grid, config.scaling))
        .collect();

    let k = config.folds as f64;
    let cv_errors: Vec<f64> = (0..grid.len())
        .map(|g| per_fold.iter().map(|errs| errs[g]).sum::<f64>() / k)
        .collect();

    let mut chosen_index = 0;
    for (g, &err) in cv_errors.iter().enumerate() {
        if err < cv_errors[chosen_index] {
            chosen_index = g;
        }
    }
    Ok(PenaltySelection {
        chosen: n as f64 * grid[chosen_index],
        grid,
        fold_assignment,
        cv_errors,
        chosen_index,
        seed: config.seed,
    })
}

/// Held-out MSE of the ridge fit on all folds but `fold`, for every grid value.
fn fold_errors(
    z: &DMatrix<f64>,
    target: &DVector<f64>,
    assignment: &[usize],
    fold: usize,
    grid: &[f64],
    scaling: CvScaling,
) -> Vec<f64> {
    let train: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] != fold).collect();
    let test: Vec<usize> = (0..assignment.len()).filter(|&i| assignment[i] == fold).collect();
    let q = z.ncols();
    let n_train = train.len();

    let z_train = z.select_rows(&train);
    let col_means = DVector::from_iterator(q, z_train.column_iter().map(|c| c.mean()));
    let y_train = target.select_rows(&train);
    let y_mean = y_train.mean();

    let mut zc = z_train;
    let mut col_scales = DVector::from_element(q, 1.0);
    for (j, mut col) in zc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
        if scaling == CvScaling::Glmnet {
            let sd = (col.norm_squared() / n_train as f64).sqrt();
            if sd > 0.0 {
                col /= sd;
                col_scales[j] = sd;
            }
        }
    }
    let yc = y_train.add_scalar(-y_mean);
    let penalty_scale = match scaling {
        CvScaling::Glmnet => {
            let sd = (yc.norm_squared() / n_train as f64).sqrt();
            n_train as f64 / if sd > 0.0 { sd } else { 1.0 }
        }
        CvScaling::PerObservation => n_train as f64,
    };

    let mut z_test = z.select_rows(&test);
    for (j, mut col) in z_test.column_iter_mut().enumerate() {
        col.add_scalar_mut(-col_means[j]);
        col /= col_scales[j];
    }

    // Predictions take the form `basis · (c_i / (d_i + penalty))`. With more columns than
    // training rows the kernel form needs only an eigendecomposition of `Z Zᵀ`.
    let (basis, c, d) = if q > n_train {
        let gram = &zc * zc.transpose();
        let eig = gram.symmetric_eigen();
        let w = eig.eigenvectors;
        let basis = (&z_test * zc.transpose()) * &w;
        let c = w.tr_mul(&yc);
        let d = eig.eigenvalues.map(|v| v.max(0.0));
        (basis, c, d)
    } else {
        let svd = zc.svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let s = svd.singular_values;
        let c = u.tr_mul(&yc).component_mul(&s);
        let d = s.map(|v| v * v);
        (&z_test * v_t.transpose(), c, d)
    };
    let y_test = target.select_rows(&test);

    let mut coef = DVector::zeros(c.len());
    grid.iter()
        .map(|&lambda| {
            let penalty = penalty_scale * lambda;
            for i in 0..c.len() {
                coef[i] = c[i] / (d[i] + penalty);
            }
            let pred = &basis * &coef;
            pred.iter()
                .zip(y_test.iter())
                .map(|(p, y)| (y - y_mean - p).powi(2))
                .sum::<f64>()
                / test.len() as f64
        })
        .collect()
}
