//! Correlation-type test statistics.
//!
//! Every kernel is a sample Pearson correlation with both arguments explicitly centered,
//! applied to different combinations of (ridge) residuals and raw covariates.

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::ridge::RidgeProjector;

/// Inputs longer than this are summed with Neumaier compensation.
const COMPENSATED_LEN: usize = 10_000;

/// Residuals with norm below this fraction of the input norm are treated as zero.
pub(crate) const DEGENERATE_RESIDUAL: f64 = 1e-10;

/// Which correlation a test uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StatisticKind {
    /// ρ(R y, R x) with the OLS residual maker.
    Partial,
    /// ρ(R y, x) with the OLS residual maker.
    SemiPartial,
    /// ρ(R_λ y, R_λx x).
    GeneralizedPartial,
    /// ρ(R_λ y, x).
    GeneralizedSemiPartial,
    /// Plain ρ(u, v) of whatever the method feeds in.
    PlainPearson,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Partial => "partial",
            StatisticKind::SemiPartial => "semi-partial",
            StatisticKind::GeneralizedPartial => "generalized-partial",
            StatisticKind::GeneralizedSemiPartial => "generalized-semi-partial",
            StatisticKind::PlainPearson => "pearson",
        }
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Sum with Neumaier compensation for long inputs.
pub fn stable_sum<I: ExactSizeIterator<Item = f64>>(values: I) -> f64 {
    if values.len() <= COMPENSATED_LEN {
        return values.sum();
    }
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn mean(v: &[f64]) -> f64 {
    stable_sum(v.iter().copied()) / v.len() as f64
}

/// A vector centered once and reused as one side of many correlations.
#[derive(Debug, Clone)]
pub struct CenteredVector {
    values: Vec<f64>,
    norm: f64,
}

impl CenteredVector {
    /// Centers `v`; fails with `ZeroVariance(label)` if the result is numerically zero.
    pub fn new(v: &[f64], label: &str) -> Result<Self> {
        if v.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "correlation needs at least 3 observations, got {}",
                v.len()
            )));
        }
        let m = mean(v);
        let values: Vec<f64> = v.iter().map(|x| x - m).collect();
        let norm = stable_sum(values.iter().map(|x| x * x)).sqrt();
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if norm == 0.0 || norm <= 64.0 * f64::EPSILON * scale * (v.len() as f64).sqrt() {
            return Err(Error::ZeroVariance(label.to_string()));
        }
        Ok(Self { values, norm })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ρ(u, self), centering `u` explicitly.
    pub fn correlate(&self, u: &[f64], label: &str) -> Result<f64> {
        if u.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                expected: self.values.len(),
                got: u.len(),
            });
        }
        let m = mean(u);
        let n = u.len();
        let (num, ss) = if n > COMPENSATED_LEN {
            (
                stable_sum(u.iter().zip(&self.values).map(|(a, b)| (a - m) * b)),
                stable_sum(u.iter().map(|a| (a - m) * (a - m))),
            )
        } else {
            u.iter().zip(&self.values).fold((0.0, 0.0), |(num, ss), (a, b)| {
                let c = a - m;
                (num + c * b, ss + c * c)
            })
        };
        let norm_u = ss.sqrt();
        let scale = u.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if norm_u == 0.0 || norm_u <= 64.0 * f64::EPSILON * scale * (n as f64).sqrt() {
            return Err(Error::ZeroVariance(label.to_string()));
        }
        Ok((num / (norm_u * self.norm)).clamp(-1.0, 1.0))
    }
}

/// Sample Pearson correlation of `u` and `v`.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    CenteredVector::new(v, "second argument")?.correlate(u, "first argument")
}

/// ρ(R_λ y, R_λx x) for precomputed ridge residuals.
pub fn generalized_partial_cor(ry: &[f64], rx: &[f64]) -> Result<f64> {
    CenteredVector::new(rx, "residualized covariate of interest")?.correlate(ry, "residualized outcome")
}

/// ρ(R_λ y, x) for a precomputed ridge residual of the outcome.
pub fn generalized_semi_partial_cor(ry: &[f64], x: &[f64]) -> Result<f64> {
    CenteredVector::new(x, "covariate of interest")?.correlate(ry, "residualized outcome")
}

/// OLS residuals of `y` and of column `col` of `X` on `Z`.
fn ols_residuals(data: &Dataset, col: usize) -> Result<(RidgeProjector, DVector<f64>, DVector<f64>)> {
    let (n, q) = (data.n(), data.q());
    if q >= n {
        return Err(Error::NotLowDimensional { n, q });
    }
    let proj = RidgeProjector::decompose(data.z())?;
    let x = data.x_column(col)?;
    let ry = proj.apply_residual(0.0, data.y())?;
    check_residual(&ry, data.y(), "residualized outcome")?;
    Ok((proj, ry, x))
}

pub(crate) fn check_residual(residual: &DVector<f64>, original: &DVector<f64>, label: &str) -> Result<()> {
    if residual.norm() <= DEGENERATE_RESIDUAL * original.norm() {
        return Err(Error::ZeroVariance(label.to_string()));
    }
    Ok(())
}

/// Partial correlation ρ(R y, R x_col) with the OLS residual maker of `Z`.
pub fn partial_cor(data: &Dataset, col: usize) -> Result<f64> {
    let (proj, ry, x) = ols_residuals(data, col)?;
    let rx = proj.apply_residual(0.0, &x)?;
    check_residual(&rx, &x, "residualized covariate of interest")?;
    generalized_partial_cor(ry.as_slice(), rx.as_slice())
}

/// Semi-partial correlation ρ(R y, x_col) with the OLS residual maker of `Z`.
pub fn semi_partial_cor(data: &Dataset, col: usize) -> Result<f64> {
    let (_, ry, x) = ols_residuals(data, col)?;
    generalized_semi_partial_cor(ry.as_slice(), x.as_slice())
}
