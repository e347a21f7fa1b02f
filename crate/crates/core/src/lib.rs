//! Permutation tests for coefficients in linear models whose nuisance dimension may exceed
//! the sample size.
//!
//! The nuisance covariates are removed by ridge residualization ([`ridge`]); test statistics
//! are (generalized) partial and semi-partial correlations ([`stats`]); residuals are permuted
//! or sign-flipped under seeded, order-independent plans ([`perm`]). [`methods`] assembles the
//! tests: classical Freedman-Lane and Kennedy for `q < n`, Freedman-Lane HD, Double
//! Residualization, and a nonparametric combination for several covariates of interest.
//! [`sim`] generates synthetic designs and estimates level and power.

pub mod cli;
pub mod data;
pub mod error;
pub mod io;
pub mod methods;
pub mod perm;
pub mod ridge;
pub mod rng;
pub mod sim;
pub mod stats;

pub use data::{Dataset, Preprocessing};
pub use error::{Error, Result};
pub use methods::{
    run, run_with_plan, ClassicStatistic, ColumnSelection, Method, MethodSpec, PenaltyPolicy, TestOutcome,
};
pub use perm::{CombiningFunction, Sidedness, TransformKind, Transformation, TransformationPlan};
pub use ridge::{select_penalty, CvConfig, CvScaling, PenaltyGrid, PenaltySelection, RidgeProjector};
pub use sim::{run_scenario, RejectionTable, Scenario};
pub use stats::StatisticKind;
