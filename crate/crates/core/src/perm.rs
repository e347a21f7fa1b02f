//! Random transformations of residuals, Monte Carlo p-values and nonparametric combination.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Largest group size [`TransformationPlan::exhaustive`] will enumerate.
pub const MAX_EXHAUSTIVE: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TransformKind {
    #[default]
    Permutation,
    SignFlip,
}

impl TransformKind {
    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Permutation => "permutation",
            TransformKind::SignFlip => "sign-flip",
        }
    }
}

/// A permutation matrix or a diagonal sign matrix acting on n-vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transformation {
    /// `out[i] = v[perm[i]]`.
    Permutation(Vec<usize>),
    /// `out[i] = signs[i] · v[i]`, signs in {−1, +1}.
    SignFlip(Vec<i8>),
}

impl Transformation {
    pub fn identity(kind: TransformKind, n: usize) -> Self {
        match kind {
            TransformKind::Permutation => Transformation::Permutation((0..n).collect()),
            TransformKind::SignFlip => Transformation::SignFlip(vec![1; n]),
        }
    }

    /// Validates that `perm` is a bijection on `0..perm.len()`.
    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
            }
        }
        Ok(Transformation::Permutation(perm))
    }

    pub fn sign_flip(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
        }
        Ok(Transformation::SignFlip(signs))
    }

    pub fn kind(&self) -> TransformKind {
        match self {
            Transformation::Permutation(_) => TransformKind::Permutation,
            Transformation::SignFlip(_) => TransformKind::SignFlip,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Transformation::Permutation(p) => p.len(),
            Transformation::SignFlip(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Transformation::Permutation(p) => p.iter().enumerate().all(|(i, &j)| i == j),
            Transformation::SignFlip(s) => s.iter().all(|&x| x == 1),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        if v.len() != self.len() || out.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: if v.len() != self.len() { v.len() } else { out.len() },
            });
        }
        match self {
            Transformation::Permutation(p) => {
                for (o, &src) in out.iter_mut().zip(p) {
                    *o = v[src];
                }
            }
            Transformation::SignFlip(s) => {
                for ((o, &x), &sign) in out.iter_mut().zip(v).zip(s) {
                    *o = f64::from(sign) * x;
                }
            }
        }
        Ok(())
    }

    /// Dense n×n matrix `P` with `P v = self.apply(v)`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        match self {
            Transformation::Permutation(p) => {
                for (i, &j) in p.iter().enumerate() {
                    m[(i, j)] = 1.0;
                }
            }
            Transformation::SignFlip(s) => {
                for (i, &sign) in s.iter().enumerate() {
                    m[(i, i)] = f64::from(sign);
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
enum PlanSource {
    /// Transformation `j ≥ 1` drawn from stream `(seed, j)` on demand.
    Random,
    Explicit(Vec<Transformation>),
}

/// `w` transformations of n-vectors; index 0 is always the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationPlan {
    n: usize,
    w: usize,
    kind: TransformKind,
    seed: u64,
    source: PlanSource,
}

/// Identity followed by `w − 1` i.i.d. uniform draws from the permutation or sign-flip group.
///
/// Draws may repeat. Transformation `j` depends only on `(seed, j)`.
pub fn sample_plan(n: usize, w: usize, kind: TransformKind, seed: u64) -> Result<TransformationPlan> {
    TransformationPlan::random(n, w, kind, seed)
}

impl TransformationPlan {
    pub fn random(n: usize, w: usize, kind: TransformKind, seed: u64) -> Result<Self> {
        if w == 0 {
            return Err(Error::InvalidArgument("plan needs w >= 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("plan needs n >= 2, got {n}")));
        }
        Ok(Self {
            n,
            w,
            kind,
            seed,
            source: PlanSource::Random,
        })
    }

    /// Every element of the group exactly once, identity first. Permutations are in
    /// lexicographic order; sign vectors follow the binary expansion of the index.
    pub fn exhaustive(n: usize, kind: TransformKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("plan needs n >= 2, got {n}")));
        }
        let too_big = || Error::InvalidArgument(format!("group of size n = {n} exceeds {MAX_EXHAUSTIVE} elements"));
        let transformations = match kind {
            TransformKind::Permutation => {
                let size = (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k).filter(|&v| v <= MAX_EXHAUSTIVE));
                let size = size.ok_or_else(too_big)?;
                let mut all = Vec::with_capacity(size);
                let mut current: Vec<usize> = (0..n).collect();
                loop {
                    all.push(Transformation::Permutation(current.clone()));
                    if !next_permutation(&mut current) {
                        break;
                    }
                }
                all
            }
            TransformKind::SignFlip => {
                if n >= usize::BITS as usize || (1usize << n) > MAX_EXHAUSTIVE {
                    return Err(too_big());
                }
                (0..1usize << n)
                    .map(|code| {
                        Transformation::SignFlip((0..n).map(|i| if code >> i & 1 == 1 { -1 } else { 1 }).collect())
                    })
                    .collect()
            }
        };
        Ok(Self {
            n,
            w: transformations.len(),
            kind,
            seed: 0,
            source: PlanSource::Explicit(transformations),
        })
    }

    /// Wraps an explicit list whose first element must be the identity.
    pub fn from_transformations(transformations: Vec<Transformation>) -> Result<Self> {
        let first = transformations
            .first()
            .ok_or_else(|| Error::InvalidArgument("plan needs w >= 1".into()))?;
        if !first.is_identity() {
            return Err(Error::InvalidArgument(
                "first transformation must be the identity".into(),
            ));
        }
        let (n, kind) = (first.len(), first.kind());
        if transformations.iter().any(|t| t.len() != n || t.kind() != kind) {
            return Err(Error::InvalidArgument("transformations differ in size or kind".into()));
        }
        Ok(Self {
            n,
            w: transformations.len(),
            kind,
            seed: 0,
            source: PlanSource::Explicit(transformations),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Transformation `j` (0-based; `get(0)` is the identity).
    pub fn get(&self, j: usize) -> Transformation {
        assert!(j < self.w, "transformation index {j} out of range for w = {}", self.w);
        match &self.source {
            PlanSource::Explicit(all) => all[j].clone(),
            PlanSource::Random if j == 0 => Transformation::identity(self.kind, self.n),
            PlanSource::Random => {
                let mut rng = rng::stream(self.seed, j as u64);
                match self.kind {
                    TransformKind::Permutation => {
                        let mut p: Vec<usize> = (0..self.n).collect();
                        p.shuffle(&mut rng);
                        Transformation::Permutation(p)
                    }
                    TransformKind::SignFlip => Transformation::SignFlip(
                        (0..self.n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect(),
                    ),
                }
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Transformation> + '_ {
        (0..self.w).map(|j| self.get(j))
    }

    pub fn materialize(&self) -> Vec<Transformation> {
        self.iter().collect()
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sidedness {
    One,
    Two,
}

impl Sidedness {
    pub fn name(self) -> &'static str {
        match self {
            Sidedness::One => "one-sided",
            Sidedness::Two => "two-sided",
        }
    }

    pub fn p_value(self, stats: &[f64]) -> f64 {
        match self {
            Sidedness::One => p_one_sided(stats),
            Sidedness::Two => p_two_sided(stats),
        }
    }
}

/// `|{j : T_j ≥ T_1}| / w`, where `T_1 = stats[0]` is the unpermuted statistic.
pub fn p_one_sided(stats: &[f64]) -> f64 {
    assert!(!stats.is_empty(), "p-value of an empty statistic vector");
    let t1 = stats[0];
    stats.iter().filter(|&&t| t >= t1).count() as f64 / stats.len() as f64
}

/// `2 · min(|{T_j ≥ T_1}|, |{T_j ≤ T_1}|) / w`, clamped to 1.
pub fn p_two_sided(stats: &[f64]) -> f64 {
    assert!(!stats.is_empty(), "p-value of an empty statistic vector");
    let t1 = stats[0];
    let upper = stats.iter().filter(|&&t| t >= t1).count();
    let lower = stats.iter().filter(|&&t| t <= t1).count();
    (2.0 * upper.min(lower) as f64 / stats.len() as f64).min(1.0)
}

/// Function Ψ folding a d-vector of statistics into one, large values against H₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CombiningFunction {
    /// `max_l |t_l|`.
    #[default]
    MaxAbs,
    /// `mean_l |t_l|`.
    MeanAbs,
    /// `max_l t_l`, sensitive only to positive associations.
    Max,
}

impl CombiningFunction {
    pub fn apply(self, t: &[f64]) -> f64 {
        match self {
            CombiningFunction::MaxAbs => combining_max_abs(t),
            CombiningFunction::MeanAbs => combining_mean_abs(t),
            CombiningFunction::Max => combining_max(t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CombiningFunction::MaxAbs => "max-abs",
            CombiningFunction::MeanAbs => "mean-abs",
            CombiningFunction::Max => "max",
        }
    }
}

pub fn combining_max_abs(t: &[f64]) -> f64 {
    t.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn combining_max(t: &[f64]) -> f64 {
    t.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn combining_mean_abs(t: &[f64]) -> f64 {
    if t.is_empty() {
        return 0.0;
    }
    t.iter().map(|x| x.abs()).sum::<f64>() / t.len() as f64
}

/// One-sided p-value of `Ψ_j = psi(row j)` over a w×d statistic matrix whose rows were
/// computed under a shared transformation.
pub fn npc_combine(stats: &DMatrix<f64>, psi: CombiningFunction) -> Result<f64> {
    if stats.nrows() == 0 || stats.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "statistic matrix is {}×{}",
            stats.nrows(),
            stats.ncols()
        )));
    }
    let combined: Vec<f64> = stats
        .row_iter()
        .map(|row| psi.apply(&row.iter().copied().collect::<Vec<_>>()))
        .collect();
    Ok(p_one_sided(&combined))
}
