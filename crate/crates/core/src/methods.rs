//! Permutation tests for a coefficient (or a block of coefficients) of `X` in
//! `y = Xβ + Zγ + ε`.
//!
//! | method | statistic `T_j` |
//! |---|---|
//! | Freedman-Lane | ρ(R P_j R y, R x) or ρ(R P_j R y, x) |
//! | Kennedy | ρ(P_j R y, R x) |
//! | Freedman-Lane HD, partial | ρ(R_λ (P_j R_λ + H_λ) y, R_λx x) |
//! | Freedman-Lane HD, semi-partial | ρ(R_λ (P_j R_λ + H_λ) y, x) |
//! | Double Residualization | ρ((P_j R_λ + H_λ) y, R_λx x) |
//! | NPC | Ψ(T_j¹, …, T_jᵈ) with the semi-partial HD statistic per column |
//!
//! `R`, `H` are the OLS residual and hat makers of `Z`; `R_λ`, `H_λ` their ridge versions.
//! Penalties are fixed once on the unpermuted data and reused for every `j`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::perm::{CombiningFunction, Sidedness, TransformKind, Transformation, TransformationPlan};
use crate::ridge::{select_penalty, CvConfig, CvScaling, PenaltyGrid, RidgeOperator, RidgeProjector};
use crate::rng;
use crate::stats::{check_residual, CenteredVector, StatisticKind};

/// Statistic used by the classical Freedman-Lane test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClassicStatistic {
    #[default]
    Partial,
    SemiPartial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Classical Freedman-Lane; needs `q < n`.
    FreedmanLane(ClassicStatistic),
    /// Kennedy's scheme; needs `q < n`.
    Kennedy,
    /// Freedman-Lane HD with the generalized partial correlation.
    FlhdPartial,
    /// Freedman-Lane HD with the generalized semi-partial correlation.
    FlhdSemiPartial,
    DoubleResidualization,
    /// Freedman-Lane HD over all columns of `X`, combined with Ψ.
    FlhdNpc(CombiningFunction),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::FreedmanLane(ClassicStatistic::Partial) => "fl",
            Method::FreedmanLane(ClassicStatistic::SemiPartial) => "fl-semi",
            Method::Kennedy => "kennedy",
            Method::FlhdPartial => "flhd-partial",
            Method::FlhdSemiPartial => "flhd-semi",
            Method::DoubleResidualization => "dr",
            Method::FlhdNpc(CombiningFunction::MaxAbs) => "npc-max",
            Method::FlhdNpc(CombiningFunction::MeanAbs) => "npc-mean",
            Method::FlhdNpc(CombiningFunction::Max) => "npc-signed-max",
        }
    }

    pub const ALL: [Method; 9] = [
        Method::FreedmanLane(ClassicStatistic::Partial),
        Method::FreedmanLane(ClassicStatistic::SemiPartial),
        Method::Kennedy,
        Method::FlhdPartial,
        Method::FlhdSemiPartial,
        Method::DoubleResidualization,
        Method::FlhdNpc(CombiningFunction::MaxAbs),
        Method::FlhdNpc(CombiningFunction::MeanAbs),
        Method::FlhdNpc(CombiningFunction::Max),
    ];

    pub fn statistic_kind(self) -> StatisticKind {
        match self {
            Method::FreedmanLane(ClassicStatistic::Partial) | Method::Kennedy => StatisticKind::Partial,
            Method::FreedmanLane(ClassicStatistic::SemiPartial) => StatisticKind::SemiPartial,
            Method::FlhdPartial => StatisticKind::GeneralizedPartial,
            Method::FlhdSemiPartial | Method::FlhdNpc(_) => StatisticKind::GeneralizedSemiPartial,
            Method::DoubleResidualization => StatisticKind::PlainPearson,
        }
    }

    pub fn sidedness(self) -> Sidedness {
        match self {
            Method::FlhdNpc(_) => Sidedness::One,
            _ => Sidedness::Two,
        }
    }

    pub fn is_low_dimensional(self) -> bool {
        matches!(self, Method::FreedmanLane(_) | Method::Kennedy)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let alias = match s.to_ascii_lowercase().as_str() {
            "fl-partial" | "fl-classic" => "fl",
            "flh1" => "flhd-partial",
            "flh2" | "flhd" => "flhd-semi",
            "double-residualization" => "dr",
            "npc" | "flhd-npc" => "npc-max",
            other => {
                return Method::ALL
                    .into_iter()
                    .find(|m| m.name() == other)
                    .ok_or_else(|| unknown(s))
            }
        };
        Ok(Method::ALL
            .into_iter()
            .find(|m| m.name() == alias)
            .expect("alias targets exist"))
    }
}

fn unknown(s: &str) -> Error {
    let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
    Error::InvalidArgument(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
}

/// How λ (outcome side) and λ_X (covariate side) are obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyPolicy {
    /// K-fold cross-validation on the unpermuted data; λ_X regresses the tested column on `Z`.
    CrossValidated {
        folds: usize,
        grid: PenaltyGrid,
        scaling: CvScaling,
    },
    /// Fixed penalties; `lambda_x` defaults to `lambda`.
    Fixed { lambda: f64, lambda_x: Option<f64> },
}

impl Default for PenaltyPolicy {
    fn default() -> Self {
        PenaltyPolicy::CrossValidated {
            folds: 10,
            grid: PenaltyGrid::default(),
            scaling: CvScaling::default(),
        }
    }
}

/// Which covariate(s) of interest a test targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSelection {
    Single(usize),
    All,
}

/// Full description of one test run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub method: Method,
    /// Number of transformations including the identity.
    pub w: usize,
    pub seed: u64,
    pub kind: TransformKind,
    pub penalty: PenaltyPolicy,
    pub columns: ColumnSelection,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            w: 20_000,
            seed: 0,
            kind: TransformKind::Permutation,
            penalty: PenaltyPolicy::default(),
            columns: match method {
                Method::FlhdNpc(_) => ColumnSelection::All,
                _ => ColumnSelection::Single(0),
            },
        }
    }

    pub fn with_w(mut self, w: usize) -> Self {
        self.w = w;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kind(mut self, kind: TransformKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_penalty(mut self, penalty: PenaltyPolicy) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn with_fixed_penalty(self, lambda: f64, lambda_x: f64) -> Self {
        self.with_penalty(PenaltyPolicy::Fixed {
            lambda,
            lambda_x: Some(lambda_x),
        })
    }

    pub fn with_columns(mut self, columns: ColumnSelection) -> Self {
        self.columns = columns;
        self
    }

    pub fn with_column(self, col: usize) -> Self {
        self.with_columns(ColumnSelection::Single(col))
    }

    /// The random plan this spec draws for a dataset with `n` rows.
    pub fn plan(&self, n: usize) -> Result<TransformationPlan> {
        TransformationPlan::random(n, self.w, self.kind, self.plan_seed())
    }

    pub fn plan_seed(&self) -> u64 {
        rng::derive_seed(self.seed, rng::tag::PLAN, 0)
    }

    fn cv_config(&self, folds: usize, grid: PenaltyGrid, scaling: CvScaling) -> CvConfig {
        CvConfig {
            folds,
            grid,
            scaling,
            seed: rng::derive_seed(self.seed, rng::tag::CV, 0),
        }
    }
}

/// Result of a permutation test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestOutcome {
    /// `T_1, …, T_w` (or `Ψ_1, …, Ψ_w` for NPC); `statistics[0]` is unpermuted.
    pub statistics: Vec<f64>,
    pub p_value: f64,
    pub sidedness: Sidedness,
    pub method: Method,
    pub lambda: Option<f64>,
    pub lambda_x: Option<f64>,
    pub plan_seed: u64,
    pub statistic_kind: StatisticKind,
    pub columns: ColumnSelection,
}

impl TestOutcome {
    pub fn observed(&self) -> f64 {
        self.statistics[0]
    }

    pub fn w(&self) -> usize {
        self.statistics.len()
    }
}

/// Runs `spec` on `data` with the random plan it describes.
pub fn run(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    let plan = spec.plan(data.n())?;
    run_with_plan(data, spec, &plan)
}

/// Runs `spec` with an explicit plan (e.g. an exhaustive one); `spec.w` is ignored.
pub fn run_with_plan(data: &Dataset, spec: &MethodSpec, plan: &TransformationPlan) -> Result<TestOutcome> {
    if plan.n() != data.n() {
        return Err(Error::LengthMismatch {
            expected: data.n(),
            got: plan.n(),
        });
    }
    match spec.method {
        Method::FreedmanLane(stat) => classic(data, spec, plan, Classic::FreedmanLane(stat)),
        Method::Kennedy => classic(data, spec, plan, Classic::Kennedy),
        Method::FlhdPartial | Method::FlhdSemiPartial => flhd(data, spec, plan),
        Method::DoubleResidualization => dr(data, spec, plan),
        Method::FlhdNpc(psi) => npc(data, spec, plan, psi),
    }
}

pub fn freedman_lane(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    expect_method(spec, |m| matches!(m, Method::FreedmanLane(_)))?;
    run(data, spec)
}

pub fn kennedy(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    expect_method(spec, |m| m == Method::Kennedy)?;
    run(data, spec)
}

pub fn freedman_lane_hd(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    expect_method(spec, |m| matches!(m, Method::FlhdPartial | Method::FlhdSemiPartial))?;
    run(data, spec)
}

pub fn double_residualization(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    expect_method(spec, |m| m == Method::DoubleResidualization)?;
    run(data, spec)
}

pub fn flhd_npc(data: &Dataset, spec: &MethodSpec) -> Result<TestOutcome> {
    expect_method(spec, |m| matches!(m, Method::FlhdNpc(_)))?;
    run(data, spec)
}

fn expect_method(spec: &MethodSpec, ok: impl Fn(Method) -> bool) -> Result<()> {
    if ok(spec.method) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("spec names method {}", spec.method)))
    }
}

fn single_column(spec: &MethodSpec, data: &Dataset) -> Result<usize> {
    match spec.columns {
        ColumnSelection::Single(c) if c < data.d() => Ok(c),
        ColumnSelection::Single(c) => Err(Error::InvalidArgument(format!(
            "column {c} out of range for X with {} columns",
            data.d()
        ))),
        ColumnSelection::All if data.d() == 1 => Ok(0),
        ColumnSelection::All => Err(Error::InvalidArgument(format!(
            "{} tests a single column but X has {} columns",
            spec.method,
            data.d()
        ))),
    }
}

fn interest_label(col: usize) -> String {
    format!("covariate of interest (column {col})")
}

fn residual_label(col: usize) -> String {
    format!("residualized covariate of interest (column {col})")
}

const OUTCOME_RESIDUAL: &str = "residualized outcome";
const TRANSFORMED_OUTCOME: &str = "transformed outcome";

/// Penalties actually used by a test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub lambda: f64,
    pub lambda_x: Option<f64>,
}

/// Resolves λ (and λ_X for column `x_col` when requested) from the policy.
pub fn resolve_penalties(data: &Dataset, spec: &MethodSpec, x_col: Option<usize>) -> Result<Penalties> {
    match spec.penalty {
        PenaltyPolicy::Fixed { lambda, lambda_x } => {
            for l in [Some(lambda), lambda_x].into_iter().flatten() {
                if !(l.is_finite() && l >= 0.0) {
                    return Err(Error::InvalidPenalty(l));
                }
            }
            Ok(Penalties {
                lambda,
                lambda_x: x_col.map(|_| lambda_x.unwrap_or(lambda)),
            })
        }
        PenaltyPolicy::CrossValidated { folds, grid, scaling } => {
            let cfg = spec.cv_config(folds, grid, scaling);
            let lambda = select_penalty(data.z(), data.y(), &cfg)?.chosen;
            let lambda_x = match x_col {
                Some(c) => Some(select_penalty(data.z(), &data.x_column(c)?, &cfg)?.chosen),
                None => None,
            };
            Ok(Penalties { lambda, lambda_x })
        }
    }
}

/// Per-worker buffers for the statistic loop.
struct Scratch {
    transformed: DVector<f64>,
    residual: DVector<f64>,
    coef: DVector<f64>,
}

impl Scratch {
    fn new(n: usize, rank: usize) -> Self {
        Self {
            transformed: DVector::zeros(n),
            residual: DVector::zeros(n),
            coef: DVector::zeros(rank),
        }
    }
}

/// Evaluates `stat(j, P_j, scratch)` for every `j ≥ 1` in parallel; results are ordered by `j`.
fn permuted_statistics<F>(plan: &TransformationPlan, rank: usize, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&Transformation, &mut Scratch) -> Result<f64> + Sync,
{
    (1..plan.w())
        .into_par_iter()
        .map_init(
            || Scratch::new(plan.n(), rank),
            |scratch, j| stat(&plan.get(j), scratch),
        )
        .collect()
}

/// `P r_y + h_y` into `scratch.transformed`.
fn transform_outcome(
    t: &Transformation,
    r_y: &DVector<f64>,
    h_y: Option<&DVector<f64>>,
    scratch: &mut Scratch,
) -> Result<()> {
    t.apply_into(r_y.as_slice(), scratch.transformed.as_mut_slice())?;
    if let Some(h) = h_y {
        scratch.transformed += h;
    }
    Ok(())
}

fn finish(
    spec: &MethodSpec,
    plan: &TransformationPlan,
    t1: f64,
    rest: Vec<f64>,
    penalties: Option<Penalties>,
    columns: ColumnSelection,
) -> TestOutcome {
    let mut statistics = Vec::with_capacity(plan.w());
    statistics.push(t1);
    statistics.extend(rest);
    let sidedness = spec.method.sidedness();
    TestOutcome {
        p_value: sidedness.p_value(&statistics),
        statistics,
        sidedness,
        method: spec.method,
        lambda: penalties.map(|p| p.lambda),
        lambda_x: penalties.and_then(|p| p.lambda_x),
        plan_seed: plan.seed(),
        statistic_kind: spec.method.statistic_kind(),
        columns,
    }
}

enum Classic {
    FreedmanLane(ClassicStatistic),
    Kennedy,
}

fn classic(data: &Dataset, spec: &MethodSpec, plan: &TransformationPlan, variant: Classic) -> Result<TestOutcome> {
    let (n, q) = (data.n(), data.q());
    if q >= n {
        return Err(Error::NotLowDimensional { n, q });
    }
    let col = single_column(spec, data)?;
    let proj = RidgeProjector::decompose(data.z())?;
    let ols = proj.operator(0.0)?;
    let x = data.x_column(col)?;
    let r_y = ols.residual(data.y())?;
    check_residual(&r_y, data.y(), OUTCOME_RESIDUAL)?;

    let uses_rx = matches!(
        variant,
        Classic::Kennedy | Classic::FreedmanLane(ClassicStatistic::Partial)
    );
    let target = if uses_rx {
        let r_x = ols.residual(&x)?;
        check_residual(&r_x, &x, &residual_label(col))?;
        CenteredVector::new(r_x.as_slice(), &residual_label(col))?
    } else {
        CenteredVector::new(x.as_slice(), &interest_label(col))?
    };
    let t1 = target.correlate(r_y.as_slice(), OUTCOME_RESIDUAL)?;

    let rest = match variant {
        // R (P R + H) y = R P R y since R H = 0.
        Classic::FreedmanLane(_) => permuted_statistics(plan, ols.rank(), |t, s| {
            transform_outcome(t, &r_y, None, s)?;
            ols.residual_into(&s.transformed, &mut s.coef, &mut s.residual);
            target.correlate(s.residual.as_slice(), TRANSFORMED_OUTCOME)
        })?,
        Classic::Kennedy => permuted_statistics(plan, 0, |t, s| {
            transform_outcome(t, &r_y, None, s)?;
            target.correlate(s.transformed.as_slice(), TRANSFORMED_OUTCOME)
        })?,
    };
    Ok(finish(spec, plan, t1, rest, None, ColumnSelection::Single(col)))
}

/// `R_λ y` and `H_λ y`, with the degenerate-residual check.
fn split_outcome(op: &RidgeOperator<'_>, y: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    let h_y = op.hat(y)?;
    let r_y = y - &h_y;
    check_residual(&r_y, y, OUTCOME_RESIDUAL)?;
    Ok((r_y, h_y))
}

fn ridge_residual_target(proj: &RidgeProjector, lambda_x: f64, x: &DVector<f64>, col: usize) -> Result<CenteredVector> {
    let r_x = proj.apply_residual(lambda_x, x)?;
    check_residual(&r_x, x, &residual_label(col))?;
    CenteredVector::new(r_x.as_slice(), &residual_label(col))
}

fn flhd(data: &Dataset, spec: &MethodSpec, plan: &TransformationPlan) -> Result<TestOutcome> {
    let col = single_column(spec, data)?;
    let partial = spec.method == Method::FlhdPartial;
    let x = data.x_column(col)?;
    // Validate the tested column before spending time on cross-validation.
    let raw_target = CenteredVector::new(x.as_slice(), &interest_label(col))?;
    let penalties = resolve_penalties(data, spec, partial.then_some(col))?;
    let proj = RidgeProjector::decompose(data.z())?;
    let op = proj.operator(penalties.lambda)?;
    let (r_y, h_y) = split_outcome(&op, data.y())?;

    let target = match penalties.lambda_x {
        Some(lx) => ridge_residual_target(&proj, lx, &x, col)?,
        None => raw_target,
    };
    let t1 = target.correlate(r_y.as_slice(), OUTCOME_RESIDUAL)?;
    let rest = permuted_statistics(plan, op.rank(), |t, s| {
        transform_outcome(t, &r_y, Some(&h_y), s)?;
        op.residual_into(&s.transformed, &mut s.coef, &mut s.residual);
        target.correlate(s.residual.as_slice(), TRANSFORMED_OUTCOME)
    })?;
    Ok(finish(
        spec,
        plan,
        t1,
        rest,
        Some(penalties),
        ColumnSelection::Single(col),
    ))
}

fn dr(data: &Dataset, spec: &MethodSpec, plan: &TransformationPlan) -> Result<TestOutcome> {
    let col = single_column(spec, data)?;
    let x = data.x_column(col)?;
    CenteredVector::new(x.as_slice(), &interest_label(col))?;
    let penalties = resolve_penalties(data, spec, Some(col))?;
    let proj = RidgeProjector::decompose(data.z())?;
    let op = proj.operator(penalties.lambda)?;
    let (r_y, h_y) = split_outcome(&op, data.y())?;
    let target = ridge_residual_target(&proj, penalties.lambda_x.expect("requested"), &x, col)?;

    // (R_λ + H_λ) y = y at the identity.
    let t1 = target.correlate(data.y().as_slice(), "outcome")?;
    let rest = permuted_statistics(plan, 0, |t, s| {
        transform_outcome(t, &r_y, Some(&h_y), s)?;
        target.correlate(s.transformed.as_slice(), TRANSFORMED_OUTCOME)
    })?;
    Ok(finish(
        spec,
        plan,
        t1,
        rest,
        Some(penalties),
        ColumnSelection::Single(col),
    ))
}

fn npc(data: &Dataset, spec: &MethodSpec, plan: &TransformationPlan, psi: CombiningFunction) -> Result<TestOutcome> {
    let columns: Vec<usize> = match spec.columns {
        ColumnSelection::All => (0..data.d()).collect(),
        ColumnSelection::Single(_) => vec![single_column(spec, data)?],
    };
    let targets = columns
        .iter()
        .map(|&c| CenteredVector::new(data.x_column(c)?.as_slice(), &interest_label(c)))
        .collect::<Result<Vec<_>>>()?;
    let penalties = resolve_penalties(data, spec, None)?;
    let proj = RidgeProjector::decompose(data.z())?;
    let op = proj.operator(penalties.lambda)?;
    let (r_y, h_y) = split_outcome(&op, data.y())?;

    let combine = |v: &DVector<f64>, label: &str| -> Result<f64> {
        let t = targets
            .iter()
            .map(|target| target.correlate(v.as_slice(), label))
            .collect::<Result<Vec<_>>>()?;
        Ok(psi.apply(&t))
    };
    let psi1 = combine(&r_y, OUTCOME_RESIDUAL)?;
    let rest = permuted_statistics(plan, op.rank(), |t, s| {
        transform_outcome(t, &r_y, Some(&h_y), s)?;
        op.residual_into(&s.transformed, &mut s.coef, &mut s.residual);
        combine(&s.residual, TRANSFORMED_OUTCOME)
    })?;
    Ok(finish(spec, plan, psi1, rest, Some(penalties), spec.columns))
}

/// Per-column statistic matrix `T_j^l` (w×d) for the NPC test, before combination.
pub fn npc_statistic_matrix(data: &Dataset, lambda: f64, plan: &TransformationPlan) -> Result<DMatrix<f64>> {
    let targets = (0..data.d())
        .map(|c| CenteredVector::new(data.x_column(c)?.as_slice(), &interest_label(c)))
        .collect::<Result<Vec<_>>>()?;
    let proj = RidgeProjector::decompose(data.z())?;
    let op = proj.operator(lambda)?;
    let (r_y, h_y) = split_outcome(&op, data.y())?;
    let mut m = DMatrix::zeros(plan.w(), data.d());
    let mut scratch = Scratch::new(data.n(), op.rank());
    for (j, t) in plan.iter().enumerate() {
        transform_outcome(&t, &r_y, Some(&h_y), &mut scratch)?;
        op.residual_into(&scratch.transformed, &mut scratch.coef, &mut scratch.residual);
        for (l, target) in targets.iter().enumerate() {
            m[(j, l)] = target.correlate(scratch.residual.as_slice(), TRANSFORMED_OUTCOME)?;
        }
    }
    Ok(m)
}
