//! Synthetic designs and Monte Carlo estimation of rejection rates.
//!
//! A [`Scenario`] fixes the sample size, the coefficient vectors, the covariate correlation
//! structure and the error law. [`run_scenario`] draws `reps` datasets, runs every listed
//! method on each and reports `#{p ≤ α} / reps` with its binomial standard error.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::methods::{self, ColumnSelection, Method, MethodSpec, PenaltyPolicy};
use crate::perm::TransformKind;
use crate::rng;

pub mod presets;

/// Correlation structure of the simulated covariates (unit variance, mean zero).
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    /// All pairwise correlations equal `rho`.
    Homogeneous { rho: f64 },
    /// Independent blocks of the given sizes, each homogeneous with correlation `rho`.
    Clusters { sizes: Vec<usize>, rho: f64 },
}

impl Design {
    fn validate(&self, p_total: usize) -> Result<()> {
        let rho = match self {
            Design::Homogeneous { rho } => *rho,
            Design::Clusters { sizes, rho } => {
                let total: usize = sizes.iter().sum();
                if total != p_total || sizes.contains(&0) {
                    return Err(Error::InvalidArgument(format!(
                        "cluster sizes {sizes:?} must be positive and sum to {p_total}"
                    )));
                }
                *rho
            }
        };
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::InvalidArgument(format!("correlation {rho} outside [0, 1)")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorLaw {
    /// i.i.d. N(0, 1).
    Gaussian,
    /// `(E³ − 6) / √684` with `E ~ Exp(1)`: mean 0, variance 1, very heavy right tail.
    CubedExponential,
    /// `E³` with `E ~ Exp(1)`, centered and scaled by the sample mean and standard deviation
    /// (divisor `n − 1`) of the drawn vector.
    CubedExponentialSampleScaled,
    /// `ε_i ~ N(0, x_i²)` with `x` the first covariate of interest.
    Heteroscedastic,
}

impl ErrorLaw {
    pub fn name(self) -> &'static str {
        match self {
            ErrorLaw::Gaussian => "gaussian",
            ErrorLaw::CubedExponential => "cubed-exponential",
            ErrorLaw::CubedExponentialSampleScaled => "cubed-exponential-sample-scaled",
            ErrorLaw::Heteroscedastic => "heteroscedastic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// β = 0: rejection rates estimate the level.
    #[default]
    Level,
    /// β as given: rejection rates estimate power.
    Power,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Level => "level",
            Mode::Power => "power",
        }
    }
}

/// A complete synthetic experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    /// Number of covariates of interest.
    pub d: usize,
    /// Number of nuisance coefficients including the intercept; `q − 1` nuisance
    /// covariates are generated.
    pub q: usize,
    /// Coefficients of interest used in [`Mode::Power`].
    pub beta: Vec<f64>,
    /// Nuisance coefficients, `gamma[0]` is the intercept.
    pub gamma: Vec<f64>,
    pub design: Design,
    pub error_law: ErrorLaw,
    pub mode: Mode,
    pub reps: usize,
    pub w: usize,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    pub kind: TransformKind,
    pub penalty: PenaltyPolicy,
    pub master_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 || self.d == 0 || self.q < 2 || self.reps == 0 || self.w == 0 {
            return Err(Error::InvalidArgument(format!(
                "scenario {} needs n >= 3, d >= 1, q >= 2, reps >= 1, w >= 1",
                self.name
            )));
        }
        if self.beta.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "beta has {} entries, d = {}",
                self.beta.len(),
                self.d
            )));
        }
        if self.gamma.len() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "gamma has {} entries, q = {}",
                self.gamma.len(),
                self.q
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("scenario lists no methods".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "cutoffs {:?} must lie in (0, 1]",
                self.alphas
            )));
        }
        self.design.validate(self.covariate_count())
    }

    /// Columns generated per dataset: `d` of interest plus `q − 1` nuisance.
    pub fn covariate_count(&self) -> usize {
        self.d + self.q - 1
    }

    pub fn effective_beta(&self) -> Vec<f64> {
        match self.mode {
            Mode::Level => vec![0.0; self.d],
            Mode::Power => self.beta.clone(),
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_w(mut self, w: usize) -> Self {
        self.w = w;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_methods(mut self, methods: Vec<Method>) -> Self {
        self.methods = methods;
        self
    }

    /// Seed of repetition `rep`.
    pub fn rep_seed(&self, rep: usize) -> u64 {
        rng::derive_seed(self.master_seed, rng::tag::REPETITION, rep as u64)
    }

    /// The centered dataset of repetition `rep`.
    pub fn generate(&self, rep: usize) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(rng::derive_seed(self.rep_seed(rep), rng::tag::DATA, 0));
        let covariates = gen_covariates(self.n, self.covariate_count(), &self.design, &mut rng)?;
        let x = covariates.columns(0, self.d).into_owned();
        let z = covariates.columns(self.d, self.q - 1).into_owned();
        let beta = DVector::from_vec(self.effective_beta());
        let gamma = DVector::from_iterator(self.q - 1, self.gamma[1..].iter().copied());
        let first = x.column(0).into_owned();
        let errors = gen_errors(self.n, self.error_law, Some(first.as_slice()), &mut rng)?;
        let y = &x * beta + &z * gamma + errors.add_scalar(self.gamma[0]);
        Ok(Dataset::new(y, x, z)?.centered())
    }
}

/// `n × p_total` covariates with unit variances and the correlation of `design`, using the
/// one-factor construction `x_ij = √ρ·g_i + √(1−ρ)·e_ij` within each block.
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, p_total: usize, design: &Design, rng: &mut R) -> Result<DMatrix<f64>> {
    design.validate(p_total)?;
    let blocks: Vec<(usize, f64)> = match design {
        Design::Homogeneous { rho } => vec![(p_total, *rho)],
        Design::Clusters { sizes, rho } => sizes.iter().map(|&s| (s, *rho)).collect(),
    };
    let mut m = DMatrix::zeros(n, p_total);
    for i in 0..n {
        let mut col = 0;
        for &(size, rho) in &blocks {
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            let g: f64 = StandardNormal.sample(rng);
            for _ in 0..size {
                let e: f64 = StandardNormal.sample(rng);
                m[(i, col)] = a * g + b * e;
                col += 1;
            }
        }
    }
    Ok(m)
}

/// Error vector of length `n`. `x_col` is required for [`ErrorLaw::Heteroscedastic`].
pub fn gen_errors<R: Rng + ?Sized>(
    n: usize,
    law: ErrorLaw,
    x_col: Option<&[f64]>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    match law {
        ErrorLaw::Gaussian => Ok(DVector::from_fn(n, |_, _| StandardNormal.sample(rng))),
        ErrorLaw::CubedExponential => {
            // E[E³] = 3! = 6, Var(E³) = 6! − 6² = 684.
            let scale = 684f64.sqrt();
            Ok(DVector::from_fn(n, |_, _| {
                let e: f64 = Exp1.sample(rng);
                (e.powi(3) - 6.0) / scale
            }))
        }
        ErrorLaw::CubedExponentialSampleScaled => {
            if n < 2 {
                return Err(Error::InvalidArgument("sample scaling needs n >= 2".into()));
            }
            let e = DVector::from_fn(n, |_, _| {
                let e: f64 = Exp1.sample(rng);
                e.powi(3)
            });
            let centered = e.add_scalar(-e.mean());
            let sd = (centered.norm_squared() / (n - 1) as f64).sqrt();
            Ok(centered / sd)
        }
        ErrorLaw::Heteroscedastic => {
            let x = x_col.ok_or_else(|| Error::InvalidArgument("heteroscedastic errors need a covariate".into()))?;
            if x.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: x.len(),
                });
            }
            Ok(DVector::from_fn(n, |i, _| {
                let z: f64 = StandardNormal.sample(rng);
                x[i].abs() * z
            }))
        }
    }
}

/// Short column label used in tables.
pub fn method_label(m: Method) -> &'static str {
    match m {
        Method::FreedmanLane(methods::ClassicStatistic::Partial) => "FL",
        Method::FreedmanLane(methods::ClassicStatistic::SemiPartial) => "FLsemi",
        Method::Kennedy => "KENNEDY",
        Method::FlhdPartial => "FLH1",
        Method::FlhdSemiPartial => "FLH2",
        Method::DoubleResidualization => "DR",
        Method::FlhdNpc(crate::perm::CombiningFunction::MaxAbs) => "NPCmax",
        Method::FlhdNpc(crate::perm::CombiningFunction::MeanAbs) => "NPCmean",
        Method::FlhdNpc(crate::perm::CombiningFunction::Max) => "NPCsmax",
    }
}

/// Estimated rejection probabilities, one row per method.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionTable {
    pub scenario: String,
    pub mode: Mode,
    pub reps: usize,
    pub alphas: Vec<f64>,
    pub methods: Vec<Method>,
    /// `rates[m][a]`: fraction of successful repetitions of method `m` with `p ≤ alphas[a]`.
    pub rates: Vec<Vec<f64>>,
    /// Binomial standard errors matching `rates`.
    pub std_errors: Vec<Vec<f64>>,
    /// Repetitions in which method `m` returned an error.
    pub failures: Vec<usize>,
    /// First error message per method, if any.
    pub failure_messages: Vec<Option<String>>,
    /// `p_values[m][rep]`, `None` where the method failed.
    pub p_values: Vec<Vec<Option<f64>>>,
}

impl RejectionTable {
    pub fn rate(&self, method: Method, alpha: f64) -> Option<f64> {
        let (m, a) = self.index(method, alpha)?;
        Some(self.rates[m][a])
    }

    pub fn std_error(&self, method: Method, alpha: f64) -> Option<f64> {
        let (m, a) = self.index(method, alpha)?;
        Some(self.std_errors[m][a])
    }

    fn index(&self, method: Method, alpha: f64) -> Option<(usize, usize)> {
        let m = self.methods.iter().position(|&x| x == method)?;
        let a = self.alphas.iter().position(|&x| (x - alpha).abs() < 1e-15)?;
        Some((m, a))
    }
}

/// Runs every method of `s` on `s.reps` generated datasets.
///
/// Penalties are cross-validated once per dataset and shared by all methods (they use the
/// same folds, so the result equals running each method's own cross-validation). Methods of
/// the same repetition share one transformation plan.
pub fn run_scenario(s: &Scenario) -> Result<RejectionTable> {
    s.validate()?;
    let per_rep: Vec<Vec<std::result::Result<f64, Error>>> = (0..s.reps)
        .into_par_iter()
        .map(|rep| run_repetition(s, rep))
        .collect::<Result<_>>()?;

    let k = s.methods.len();
    let mut p_values = vec![Vec::with_capacity(s.reps); k];
    let mut failures = vec![0; k];
    let mut failure_messages = vec![None; k];
    for rep in per_rep {
        for (m, r) in rep.into_iter().enumerate() {
            match r {
                Ok(p) => p_values[m].push(Some(p)),
                Err(e) => {
                    failures[m] += 1;
                    failure_messages[m].get_or_insert_with(|| e.to_string());
                    p_values[m].push(None);
                }
            }
        }
    }
    let mut rates = Vec::with_capacity(k);
    let mut std_errors = Vec::with_capacity(k);
    for ps in &p_values {
        let ok: Vec<f64> = ps.iter().flatten().copied().collect();
        let count = ok.len().max(1) as f64;
        let r: Vec<f64> = s
            .alphas
            .iter()
            .map(|&a| ok.iter().filter(|&&p| p <= a).count() as f64 / count)
            .collect();
        std_errors.push(r.iter().map(|&x| (x * (1.0 - x) / count).sqrt()).collect());
        rates.push(r);
    }
    Ok(RejectionTable {
        scenario: s.name.clone(),
        mode: s.mode,
        reps: s.reps,
        alphas: s.alphas.clone(),
        methods: s.methods.clone(),
        rates,
        std_errors,
        failures,
        failure_messages,
        p_values,
    })
}

/// p-values of every method on repetition `rep`. The outer error is reserved for invalid
/// scenarios; per-method failures are returned inline.
pub fn run_repetition(s: &Scenario, rep: usize) -> Result<Vec<std::result::Result<f64, Error>>> {
    let data = s.generate(rep)?;
    let seed = s.rep_seed(rep);
    let base = |m: Method| {
        MethodSpec::new(m)
            .with_w(s.w)
            .with_seed(seed)
            .with_kind(s.kind)
            .with_penalty(s.penalty)
            .with_columns(match m {
                Method::FlhdNpc(_) => ColumnSelection::All,
                _ => ColumnSelection::Single(0),
            })
    };

    let needs_ridge = s.methods.iter().any(|m| !m.is_low_dimensional());
    let needs_lambda_x = s
        .methods
        .iter()
        .any(|m| matches!(m, Method::FlhdPartial | Method::DoubleResidualization));
    let shared = if needs_ridge {
        // The CV seed depends only on the repetition seed, so every method would select the
        // same penalties; compute them once.
        let probe = base(Method::DoubleResidualization);
        Some(methods::resolve_penalties(&data, &probe, needs_lambda_x.then_some(0)))
    } else {
        None
    };

    Ok(s.methods
        .iter()
        .map(|&m| {
            let mut spec = base(m);
            if !m.is_low_dimensional() {
                match shared.as_ref().expect("computed when any ridge method is listed") {
                    Ok(p) => {
                        spec = spec.with_penalty(PenaltyPolicy::Fixed {
                            lambda: p.lambda,
                            lambda_x: p.lambda_x,
                        })
                    }
                    Err(e) => return Err(e.clone()),
                }
            }
            methods::run(&data, &spec).map(|o| o.p_value)
        })
        .collect())
}
