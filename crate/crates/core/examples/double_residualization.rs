//! Double Residualization next to Kennedy's test: with a small penalty and q << n the two
//! p-values nearly coincide; with q > n only the ridge version applies.
//!
//! ```text
//! cargo run --release --example double_residualization
//! ```

use hdperm::sim::presets::{self, Scale};
use hdperm::sim::{Design, ErrorLaw, Mode};
use hdperm::{run, Method, MethodSpec, PenaltyPolicy, Scenario, TransformKind};

fn main() -> Result<(), hdperm::Error> {
    let n = 300;
    let low = Scenario {
        name: "low".into(),
        n,
        d: 1,
        q: 5,
        beta: vec![0.15],
        gamma: vec![0.0, 1.0, 0.5, -0.5, 0.25],
        design: Design::Homogeneous { rho: 0.5 },
        error_law: ErrorLaw::Gaussian,
        mode: Mode::Power,
        reps: 1,
        w: 2000,
        alphas: vec![0.05],
        methods: vec![Method::Kennedy, Method::DoubleResidualization],
        kind: TransformKind::Permutation,
        penalty: PenaltyPolicy::default(),
        master_seed: 4,
    };
    let lambda = (n as f64).powf(0.25);
    println!("n = {n}, 4 nuisance columns, lambda = lambda_x = {lambda:.3}");
    for rep in 0..5 {
        let data = low.generate(rep)?;
        let kennedy = run(
            &data,
            &MethodSpec::new(Method::Kennedy).with_w(2000).with_seed(rep as u64),
        )?;
        let dr = run(
            &data,
            &MethodSpec::new(Method::DoubleResidualization)
                .with_w(2000)
                .with_seed(rep as u64)
                .with_fixed_penalty(lambda, lambda),
        )?;
        println!(
            "  dataset {rep}: Kennedy p = {:.4}, DR p = {:.4}",
            kennedy.p_value, dr.p_value
        );
    }

    let wide = presets::preset("table5_q1000_r05", Scale::Desk)?
        .with_mode(Mode::Power)
        .generate(0)?;
    let out = run(&wide, &MethodSpec::new(Method::DoubleResidualization).with_w(2000))?;
    println!(
        "\nq = {} > n = {}: DR p = {:.4} (lambda = {:.3}, lambda_x = {:.3})",
        wide.q(),
        wide.n(),
        out.p_value,
        out.lambda.unwrap_or(f64::NAN),
        out.lambda_x.unwrap_or(f64::NAN)
    );
    Ok(())
}
