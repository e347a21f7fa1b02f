//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

mod common;

use std::time::Instant;

use hdperm::sim::presets::{self, Scale};
use hdperm::sim::{Design, ErrorLaw, Mode};
use hdperm::{
    run, run_scenario, run_with_plan, select_penalty, ClassicStatistic, CombiningFunction, CvConfig, Dataset, Method,
    MethodSpec, PenaltyPolicy, RidgeProjector, Scenario, TransformKind, TransformationPlan,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn level_bound(alpha: f64, reps: usize) -> f64 {
    alpha + 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt()
}

fn preset(name: &str) -> Scenario {
    presets::preset(name, Scale::Desk).expect("registered preset")
}

fn global_null() -> Verdict {
    let (reps, w) = (2000, 500);
    let scenario = |q: usize, methods: Vec<Method>| Scenario {
        name: format!("global-null-q{q}"),
        n: 30,
        d: 1,
        q,
        beta: vec![0.0],
        gamma: vec![0.0; q],
        design: Design::Homogeneous { rho: 0.5 },
        error_law: ErrorLaw::Gaussian,
        mode: Mode::Level,
        reps,
        w,
        alphas: vec![0.05, 0.01],
        methods,
        kind: TransformKind::Permutation,
        penalty: PenaltyPolicy::default(),
        master_seed: 1,
    };
    let runs = [
        scenario(
            5,
            vec![Method::FreedmanLane(ClassicStatistic::Partial), Method::Kennedy],
        ),
        scenario(
            60,
            vec![
                Method::FlhdPartial,
                Method::FlhdSemiPartial,
                Method::DoubleResidualization,
            ],
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &runs {
        let t = run_scenario(s).expect("valid scenario");
        for &m in &s.methods {
            for alpha in [0.05, 0.01] {
                let r = t.rate(m, alpha).expect("listed");
                pass &= r <= level_bound(alpha, reps) && t.failures.iter().all(|&f| f == 0);
            }
            parts.push(format!(
                "{} {:.4}/{:.4}",
                m.name(),
                t.rate(m, 0.05).unwrap(),
                t.rate(m, 0.01).unwrap()
            ));
        }
    }
    verdict(
        pass,
        format!(
            "levels at .05/.01: {} (bounds {:.4}/{:.4})",
            parts.join(", "),
            level_bound(0.05, reps),
            level_bound(0.01, reps)
        ),
    )
}

fn table3() -> Verdict {
    let s = preset("table3");
    let level = run_scenario(&s).expect("preset");
    let power = run_scenario(&s.clone().with_mode(Mode::Power)).expect("preset");
    let flh2_level = level.rate(Method::FlhdSemiPartial, 0.05).unwrap();
    let flh2_power = power.rate(Method::FlhdSemiPartial, 0.05).unwrap();
    let dr_power = power.rate(Method::DoubleResidualization, 0.05).unwrap();
    let pass = within(flh2_level, 0.0270, 0.02) && within(flh2_power, 0.5426, 0.05) && within(dr_power, 0.4804, 0.05);
    verdict(
        pass,
        format!(
            "FLH2 level {flh2_level:.4} (target .0270 +/- .02), FLH2 power {flh2_power:.4} (.5426 +/- .05), DR power {dr_power:.4} (.4804 +/- .05)"
        ),
    )
}

fn table2() -> Verdict {
    let s = preset("table2");
    let t = run_scenario(&s).expect("preset");
    let targets = [
        (Method::FlhdPartial, 0.0281),
        (Method::FlhdSemiPartial, 0.0333),
        (Method::DoubleResidualization, 0.0219),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, target) in targets {
        let r = t.rate(m, 0.05).unwrap();
        pass &= r <= 0.05 && within(r, target, 0.02);
        parts.push(format!("{} {r:.4} (target {target})", m.name()));
    }
    verdict(pass, format!("levels: {}", parts.join(", ")))
}

fn heavy_tail() -> Verdict {
    let s = preset("table7_heavytail");
    let level = run_scenario(&s)
        .expect("preset")
        .rate(Method::FlhdSemiPartial, 0.05)
        .unwrap();
    let power = run_scenario(&s.clone().with_mode(Mode::Power))
        .expect("preset")
        .rate(Method::FlhdSemiPartial, 0.05)
        .unwrap();
    let pass = within(power, 0.5493, 0.06) && level <= 0.05;
    verdict(
        pass,
        format!("FLH2 power {power:.4} (target .5493 +/- .06), level {level:.4} (<= .05)"),
    )
}

fn heteroscedastic() -> Verdict {
    let s = preset("table8_hetero");
    let t = run_scenario(&s).expect("preset");
    let bound = level_bound(0.05, s.reps);
    let mut pass = true;
    let mut parts = Vec::new();
    for &m in &s.methods {
        let r = t.rate(m, 0.05).unwrap();
        pass &= r <= bound;
        parts.push(format!("{} {r:.4}", m.name()));
    }
    verdict(pass, format!("levels: {} (bound {bound:.4})", parts.join(", ")))
}

fn npc_setting_one() -> Verdict {
    let s = preset("table9_npc_s1")
        .with_reps(500)
        .with_w(1000)
        .with_methods(vec![Method::FlhdNpc(CombiningFunction::MaxAbs)]);
    let t = run_scenario(&s).expect("preset");
    let r = t.rate(s.methods[0], 0.05).unwrap();
    let pass = r <= 0.05 && within(r, 0.0174, 0.02);
    verdict(pass, format!("level {r:.4} (target .0174 +/- .02, <= .05)"))
}

fn identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut dataset = |n: usize, q: usize| {
        let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
        let x: DMatrix<f64> = draw(n, 1);
        let z: DMatrix<f64> = draw(n, q);
        let e: DMatrix<f64> = draw(n, 1);
        let y = DVector::from_fn(n, |i, _| 0.3 * x[(i, 0)] + z[(i, 0)] + e[(i, 0)]);
        Dataset::new(y, x, z).unwrap().centered()
    };

    // (a) partial and semi-partial Freedman-Lane agree.
    let data = dataset(25, 4);
    let spec = MethodSpec::new(Method::FreedmanLane(ClassicStatistic::Partial))
        .with_w(2000)
        .with_seed(1);
    let plan = spec.plan(data.n()).unwrap();
    let p_partial = run_with_plan(&data, &spec, &plan).unwrap().p_value;
    let semi = MethodSpec {
        method: Method::FreedmanLane(ClassicStatistic::SemiPartial),
        ..spec
    };
    let p_semi = run_with_plan(&data, &semi, &plan).unwrap().p_value;
    let a = (p_partial - p_semi).abs() <= 1e-8;

    // (b) a vanishing penalty recovers classical Freedman-Lane.
    let mut b = true;
    for (hd, classic) in [
        (Method::FlhdPartial, ClassicStatistic::Partial),
        (Method::FlhdSemiPartial, ClassicStatistic::SemiPartial),
    ] {
        let fl = MethodSpec::new(Method::FreedmanLane(classic)).with_w(2000).with_seed(2);
        let flhd = MethodSpec {
            method: hd,
            ..fl.with_fixed_penalty(1e-12, 1e-12)
        };
        b &= (run(&data, &fl).unwrap().p_value - run(&data, &flhd).unwrap().p_value).abs() <= 1e-8;
    }

    // (c) exhaustive plans against the dense oracle.
    let (lambda, lambda_x) = (0.7, 1.3);
    let mut c = true;
    let mut checked = 0;
    for (q, methods) in [
        (
            2,
            vec![
                Method::FreedmanLane(ClassicStatistic::Partial),
                Method::Kennedy,
                Method::FlhdPartial,
                Method::FlhdSemiPartial,
                Method::DoubleResidualization,
            ],
        ),
        (
            9,
            vec![
                Method::FlhdPartial,
                Method::FlhdSemiPartial,
                Method::DoubleResidualization,
            ],
        ),
    ] {
        let data = dataset(6, q);
        for kind in [TransformKind::Permutation, TransformKind::SignFlip] {
            let plan = TransformationPlan::exhaustive(6, kind).unwrap();
            for &m in &methods {
                let spec = MethodSpec::new(m).with_fixed_penalty(lambda, lambda_x);
                let got = run_with_plan(&data, &spec, &plan).unwrap().p_value;
                let (_, expected) = common::oracle(&data, m, kind, lambda, lambda_x);
                c &= (got - expected).abs() <= 1e-8;
                checked += 1;
            }
        }
    }
    verdict(
        a && b && c,
        format!(
            "(a) p {p_partial} vs {p_semi}: {a}; (b) FLHD at 1e-12 vs FL: {b}; (c) {checked} oracle comparisons: {c}"
        ),
    )
}

fn kennedy_equivalence() -> Verdict {
    let n = 500;
    let lambda = (n as f64).powf(0.25);
    let s = Scenario {
        name: "kennedy-equivalence".into(),
        n,
        d: 1,
        q: 5,
        beta: vec![2.0 / (n as f64).sqrt()],
        gamma: vec![0.0, 1.0, 0.5, -0.5, 0.25],
        design: Design::Homogeneous { rho: 0.5 },
        error_law: ErrorLaw::Gaussian,
        mode: Mode::Power,
        reps: 200,
        w: 500,
        alphas: vec![0.05],
        methods: vec![Method::Kennedy, Method::DoubleResidualization],
        kind: TransformKind::Permutation,
        penalty: PenaltyPolicy::Fixed {
            lambda,
            lambda_x: Some(lambda),
        },
        master_seed: 8,
    };
    let diffs: Vec<f64> = (0..s.reps)
        .into_par_iter()
        .map(|rep| {
            let data = s.generate(rep).unwrap();
            let base = MethodSpec::new(Method::Kennedy).with_w(s.w).with_seed(s.rep_seed(rep));
            let dr = MethodSpec {
                method: Method::DoubleResidualization,
                ..base.with_fixed_penalty(lambda, lambda)
            };
            let k = run(&data, &base).unwrap();
            let d = run(&data, &dr).unwrap();
            assert_eq!(k.plan_seed, d.plan_seed);
            (k.p_value - d.p_value).abs()
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    verdict(
        mean <= 0.02,
        format!(
            "mean |p_DR - p_Kennedy| = {mean:.5} over {} datasets (<= .02)",
            diffs.len()
        ),
    )
}

/// Pooled entrywise moments of one batch of outcome draws.
#[derive(Default, Clone, Copy)]
struct Moments {
    y_yj: f64,
    y_y: f64,
    yj_yj: f64,
    yj_yk: f64,
    yk_yk: f64,
}

impl Moments {
    fn add(mut self, o: Moments) -> Moments {
        self.y_yj += o.y_yj;
        self.y_y += o.y_y;
        self.yj_yj += o.yj_yj;
        self.yj_yk += o.yj_yk;
        self.yk_yk += o.yk_yk;
        self
    }

    /// `(cor(Y, Y*j), cor(Y*j, Y*k))`; all variables have mean zero.
    fn correlations(&self) -> (f64, f64) {
        (
            self.y_yj / (self.y_y * self.yj_yj).sqrt(),
            self.yj_yk / (self.yj_yj * self.yk_yk).sqrt(),
        )
    }
}

fn correlation_ordering() -> Verdict {
    let (n, q) = (20, 40);
    let (batches, per_batch) = (100, 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let z: DMatrix<f64> = DMatrix::from_fn(n, q, |_, _| StandardNormal.sample(&mut rng));
    let z = Dataset::new(DVector::zeros(n), DMatrix::from_fn(n, 1, |i, _| i as f64), z)
        .unwrap()
        .centered()
        .z()
        .clone();
    let gamma_sd = (2.0 / q as f64).sqrt();
    let draw_y = |rng: &mut ChaCha8Rng| {
        let gamma = DVector::from_fn(q, |_, _| gamma_sd * Distribution::<f64>::sample(&StandardNormal, rng));
        let eps: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        &z * gamma + eps
    };
    let y0 = draw_y(&mut rng);
    let lambda = select_penalty(
        &z,
        &y0,
        &CvConfig {
            seed: 7,
            ..CvConfig::default()
        },
    )
    .unwrap()
    .chosen;
    let h = RidgeProjector::decompose(&z).unwrap().hat_matrix(lambda).unwrap();

    let batch: Vec<Moments> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(10_000 + b as u64);
            let mut m = Moments::default();
            let mut perm: Vec<usize> = (0..n).collect();
            for _ in 0..per_batch {
                let y = draw_y(&mut rng);
                let hy = &h * &y;
                let ry = &y - &hy;
                let mut transformed = || {
                    perm.shuffle(&mut rng);
                    DVector::from_fn(n, |i, _| ry[perm[i]] + hy[i])
                };
                let yj = transformed();
                let yk = transformed();
                m = m.add(Moments {
                    y_yj: y.dot(&yj),
                    y_y: y.dot(&y),
                    yj_yj: yj.dot(&yj),
                    yj_yk: yj.dot(&yk),
                    yk_yk: yk.dot(&yk),
                });
            }
            m
        })
        .collect();
    let total = batch.iter().fold(Moments::default(), |a, &b| a.add(b));
    let (c1, c2) = total.correlations();
    let se = |f: fn((f64, f64)) -> f64| {
        let v: Vec<f64> = batch.iter().map(|m| f(m.correlations())).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (var / v.len() as f64).sqrt()
    };
    let combined = (se(|c| c.0).powi(2) + se(|c| c.1).powi(2)).sqrt();
    let margin = c1 - c2;
    verdict(
        margin > 3.0 * combined,
        format!(
            "lambda {lambda:.4}, cor(Y,Y*j) {c1:.5}, cor(Y*j,Y*k) {c2:.5}, margin {margin:.5} vs 3 SE {:.5} ({} draws)",
            3.0 * combined,
            batches * per_batch
        ),
    )
}

fn linear_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let z: DMatrix<f64> = DMatrix::from_fn(10, 25, |_, _| StandardNormal.sample(&mut rng));
    let proj = RidgeProjector::decompose(&z).unwrap();
    let mut max_err: f64 = 0.0;
    let mut min_pd = f64::INFINITY;
    for lambda in [0.1, 1.0, 10.0] {
        let q = z.ncols();
        let dense = &z
            * (z.transpose() * &z + DMatrix::identity(q, q) * lambda)
                .try_inverse()
                .unwrap()
            * z.transpose();
        let sym = (&dense + dense.transpose()) * 0.5;
        let mut eig: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let mut expected: Vec<f64> = proj
            .singular_values()
            .iter()
            .map(|s| s * s / (s * s + lambda))
            .collect();
        expected.sort_by(|a, b| b.total_cmp(a));
        for (e, x) in eig.iter().zip(&expected) {
            max_err = max_err.max((e - x).abs());
        }
        let m = &dense - &dense * &dense;
        let u = proj.basis();
        let restricted = u.transpose() * m * u;
        let restricted = (&restricted + restricted.transpose()) * 0.5;
        min_pd = min_pd.min(SymmetricEigen::new(restricted).eigenvalues.min());
    }
    verdict(
        max_err <= 1e-10 && min_pd > 0.0,
        format!("max eigenvalue error {max_err:.2e} (<= 1e-10), smallest eigenvalue of H - H^2 on col(Z) {min_pd:.3e} (> 0)"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 10] = [
        ("exactness under the global null", global_null),
        ("sparse rho'=0.9 setting (table3)", table3),
        ("dense rho'=0.5 setting (table2)", table2),
        ("heavy-tailed errors", heavy_tail),
        ("heteroscedastic errors", heteroscedastic),
        ("NPC setting 1 level", npc_setting_one),
        ("exact identities", identities),
        ("Double Residualization vs Kennedy", kennedy_equivalence),
        ("correlation ordering of transformed outcomes", correlation_ordering),
        ("ridge operator identities", linear_algebra),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {}: {name}: {} [{:.1}s]",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
