//! Named scenarios of the standard simulation battery.
//!
//! The battery has eleven settings. `table3_n15` is the `table3` setting at n = 15 and shares
//! its number, so every later preset is numbered one lower than its position in the battery.
//!
//! | preset                | position | setting                                              |
//! |-----------------------|----------|------------------------------------------------------|
//! | `table2`              | 2        | dense, ρ' = 0.5                                      |
//! | `table3`              | 3        | sparse, ρ' = 0.9                                     |
//! | `table3_n15`          | 4        | sparse, ρ' = 0.9, n = 15                             |
//! | `table4_clusters`     | 5        | dense, three clusters of 20, ρ = 0.9                 |
//! | `table5_q1000_r05`    | 6        | sparse, q = 1000, ρ' = 0.5                           |
//! | `table6_q1000_r09`    | 7        | sparse, q = 1000, ρ' = 0.9                           |
//! | `table7_heavytail`    | 8        | `table3` with cubed exponential errors               |
//! | `table8_hetero`       | 9        | sparse, ρ' = 0, heteroscedastic errors               |
//! | `table9_npc_s{1,2,3}` | 10       | d = 10, q = 491, three nuisance settings             |
//!
//! `q` counts the intercept, so a `q = 60` preset generates 59 nuisance covariates.
//!
//! The heavy-tailed preset scales each drawn error vector to unit sample standard deviation
//! ([`ErrorLaw::CubedExponentialSampleScaled`]). With population scaling
//! ([`ErrorLaw::CubedExponential`]) most samples carry far less noise than Gaussian errors and
//! power rises well above `table3`; per-sample scaling fixes the noise energy and keeps power
//! close to `table3`.

use super::{Design, ErrorLaw, Mode, Scenario};
use crate::error::{Error, Result};
use crate::methods::{Method, PenaltyPolicy};
use crate::perm::{CombiningFunction, TransformKind};

/// Repetitions and transformations per test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scale {
    /// 1000 repetitions, w = 1000.
    #[default]
    Desk,
    /// 10000 repetitions, w = 20000.
    Full,
}

impl Scale {
    pub fn reps(self) -> usize {
        match self {
            Scale::Desk => 1000,
            Scale::Full => 10_000,
        }
    }

    pub fn w(self) -> usize {
        match self {
            Scale::Desk => 1000,
            Scale::Full => 20_000,
        }
    }
}

pub const DEFAULT_ALPHAS: [f64; 3] = [0.05, 0.01, 0.001];
pub const DEFAULT_SEED: u64 = 20_200_101;

/// A named scenario with a one-line description.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
}

pub const PRESETS: [Preset; 11] = [
    Preset {
        name: "table2",
        description: "dense nuisance, rho'=0.5, n=30, q=60, beta=1.5",
    },
    Preset {
        name: "table3",
        description: "sparse nuisance, rho'=0.9, n=30, q=60, beta=1.5",
    },
    Preset {
        name: "table3_n15",
        description: "sparse nuisance, rho'=0.9, n=15, q=60, beta=3",
    },
    Preset {
        name: "table4_clusters",
        description: "dense nuisance, 3 clusters of 20 with rho=0.9, n=30, q=60, beta=1.5",
    },
    Preset {
        name: "table5_q1000_r05",
        description: "sparse nuisance, rho'=0.5, n=30, q=1000, beta=2",
    },
    Preset {
        name: "table6_q1000_r09",
        description: "sparse nuisance, rho'=0.9, n=30, q=1000, beta=2",
    },
    Preset {
        name: "table7_heavytail",
        description: "table3 with cubed exponential errors scaled to unit sample sd",
    },
    Preset {
        name: "table8_hetero",
        description: "sparse nuisance, rho'=0, heteroscedastic errors, n=30, q=60, beta=1.5",
    },
    Preset {
        name: "table9_npc_s1",
        description: "NPC, d=10, q=491, gamma=(3,2,1,0,...), rho'=0.5, beta=(3,2,1,0,...)",
    },
    Preset {
        name: "table9_npc_s2",
        description: "NPC, d=10, q=491, gamma=(3,2,1,0,...), rho'=0.9, beta=(3,2,1,0,...)",
    },
    Preset {
        name: "table9_npc_s3",
        description: "NPC, d=10, q=491, gamma_2..101=0.03, rho'=0.9, beta=(3,2,1,0,...)",
    },
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}

const SCALAR_METHODS: [Method; 3] = [
    Method::FlhdPartial,
    Method::FlhdSemiPartial,
    Method::DoubleResidualization,
];

/// `q`-vector with intercept 0 and the given leading nuisance coefficients, then `fill`
/// up to index `fill_to` (exclusive, 0-based), then zeros.
fn gamma(q: usize, leading: &[f64], fill: f64, fill_to: usize) -> Vec<f64> {
    let mut g = vec![0.0; q];
    for (i, v) in leading.iter().enumerate() {
        g[i + 1] = *v;
    }
    for v in g.iter_mut().take(fill_to).skip(1 + leading.len()) {
        *v = fill;
    }
    g
}

fn base(name: &str, n: usize, q: usize, beta: f64, gamma: Vec<f64>, design: Design, scale: Scale) -> Scenario {
    Scenario {
        name: name.to_string(),
        n,
        d: 1,
        q,
        beta: vec![beta],
        gamma,
        design,
        error_law: ErrorLaw::Gaussian,
        mode: Mode::Level,
        reps: scale.reps(),
        w: scale.w(),
        alphas: DEFAULT_ALPHAS.to_vec(),
        methods: SCALAR_METHODS.to_vec(),
        kind: TransformKind::Permutation,
        penalty: PenaltyPolicy::default(),
        master_seed: DEFAULT_SEED,
    }
}

fn npc(name: &str, gamma: Vec<f64>, rho: f64, scale: Scale) -> Scenario {
    let mut beta = vec![0.0; 10];
    beta[..3].copy_from_slice(&[3.0, 2.0, 1.0]);
    Scenario {
        d: 10,
        beta,
        methods: vec![Method::FlhdNpc(CombiningFunction::MaxAbs)],
        ..base(name, 30, 491, 0.0, gamma, Design::Homogeneous { rho }, scale)
    }
}

/// The scenario registered under `name`, in level mode.
pub fn preset(name: &str, scale: Scale) -> Result<Scenario> {
    let sparse = gamma(60, &[1.0, 1.0], 0.0, 0);
    let dense = gamma(60, &[], 0.05, 60);
    let sparse_1000 = gamma(1000, &[1.0, 1.0], 0.2, 10);
    let s = match name {
        "table2" => base(name, 30, 60, 1.5, dense, Design::Homogeneous { rho: 0.5 }, scale),
        "table3" => base(name, 30, 60, 1.5, sparse, Design::Homogeneous { rho: 0.9 }, scale),
        "table3_n15" => base(name, 15, 60, 3.0, sparse, Design::Homogeneous { rho: 0.9 }, scale),
        "table4_clusters" => base(
            name,
            30,
            60,
            1.5,
            dense,
            Design::Clusters {
                sizes: vec![20; 3],
                rho: 0.9,
            },
            scale,
        ),
        "table5_q1000_r05" => base(
            name,
            30,
            1000,
            2.0,
            sparse_1000,
            Design::Homogeneous { rho: 0.5 },
            scale,
        ),
        "table6_q1000_r09" => base(
            name,
            30,
            1000,
            2.0,
            sparse_1000,
            Design::Homogeneous { rho: 0.9 },
            scale,
        ),
        "table7_heavytail" => Scenario {
            error_law: ErrorLaw::CubedExponentialSampleScaled,
            ..base(name, 30, 60, 1.5, sparse, Design::Homogeneous { rho: 0.9 }, scale)
        },
        "table8_hetero" => Scenario {
            error_law: ErrorLaw::Heteroscedastic,
            ..base(name, 30, 60, 1.5, sparse, Design::Homogeneous { rho: 0.0 }, scale)
        },
        "table9_npc_s1" => npc(name, gamma(491, &[3.0, 2.0, 1.0], 0.0, 0), 0.5, scale),
        "table9_npc_s2" => npc(name, gamma(491, &[3.0, 2.0, 1.0], 0.0, 0), 0.9, scale),
        "table9_npc_s3" => npc(name, gamma(491, &[], 0.03, 101), 0.9, scale),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_registered_preset_is_valid() {
        for name in names() {
            let s = preset(name, Scale::Desk).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.gamma[0], 0.0);
            assert_eq!((s.reps, s.w), (1000, 1000));
        }
        assert_eq!(preset("table3", Scale::Full).unwrap().w, 20_000);
        assert!(matches!(preset("table1", Scale::Desk), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn coefficient_layouts() {
        let s = preset("table5_q1000_r05", Scale::Desk).unwrap();
        assert_eq!(&s.gamma[..11], &[0.0, 1.0, 1.0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.0]);
        let s = preset("table2", Scale::Desk).unwrap();
        assert!(s.gamma[1..].iter().all(|&g| g == 0.05));
        let s = preset("table9_npc_s3", Scale::Desk).unwrap();
        assert_eq!(s.gamma.iter().filter(|&&g| g == 0.03).count(), 100);
        assert_eq!(s.gamma[101], 0.0);
        assert_eq!(s.covariate_count(), 500);
        let s = preset("table4_clusters", Scale::Desk).unwrap();
        assert_eq!(s.covariate_count(), 60);
    }
}
