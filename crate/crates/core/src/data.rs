//! The outcome / covariates-of-interest / nuisance triple every test operates on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column preprocessing applied before testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preprocessing {
    /// Subtract the sample mean from `y` and every column of `X` and `Z`.
    #[default]
    Center,
    /// Center, then scale every column of `X` and `Z` to unit sample standard deviation.
    Standardize,
}

/// Outcome vector `y` (n), covariates of interest `X` (n×d) and nuisance covariates `Z` (n×q).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl Dataset {
    /// Validates shapes and finiteness. No centering is applied; see [`Dataset::preprocess`].
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if x.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, X has {}, Z has {}",
                x.nrows(),
                z.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::DimensionMismatch("X has no columns".into()));
        }
        if z.ncols() == 0 {
            return Err(Error::DimensionMismatch("Z has no columns".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("y".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("X".into()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Z".into()));
        }
        Ok(Self { y, x, z })
    }

    /// Returns a preprocessed copy. Centering `y` and every column of `X` and `Z` absorbs the
    /// intercept into the nuisance model.
    pub fn preprocess(&self, mode: Preprocessing) -> Self {
        let mut y = self.y.clone();
        center_in_place(y.as_mut_slice());
        let mut x = self.x.clone();
        let mut z = self.z.clone();
        for m in [&mut x, &mut z] {
            for mut col in m.column_iter_mut() {
                center_in_place(col.as_mut_slice());
                if mode == Preprocessing::Standardize {
                    let n = col.len() as f64;
                    let sd = (col.iter().map(|v| v * v).sum::<f64>() / (n - 1.0)).sqrt();
                    if sd > 0.0 {
                        col /= sd;
                    }
                }
            }
        }
        Self { y, x, z }
    }

    pub fn centered(&self) -> Self {
        self.preprocess(Preprocessing::Center)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    /// Column `col` of `X` as an owned vector.
    pub fn x_column(&self, col: usize) -> Result<DVector<f64>> {
        if col >= self.d() {
            return Err(Error::InvalidArgument(format!(
                "column {col} out of range for X with {} columns",
                self.d()
            )));
        }
        Ok(self.x.column(col).into_owned())
    }
}

pub(crate) fn center_in_place(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = crate::stats::stable_sum(v.iter().copied()) / v.len() as f64;
    for e in v.iter_mut() {
        *e -= mean;
    }
}
