//! Freedman-Lane HD with cross-validated penalties on one simulated dataset with q > n,
//! next to the classical test on a low-dimensional subset of the nuisance.
//!
//! ```text
//! cargo run --release --example freedman_lane_hd
//! ```

use hdperm::sim::presets::{self, Scale};
use hdperm::sim::Mode;
use hdperm::{run, ClassicStatistic, Dataset, Method, MethodSpec, TransformKind};

fn main() -> Result<(), hdperm::Error> {
    let scenario = presets::preset("table3", Scale::Desk)?.with_mode(Mode::Power);
    let data = scenario.generate(0)?;
    println!(
        "n = {}, q = {} nuisance columns, beta = {:?}",
        data.n(),
        data.q(),
        scenario.beta
    );

    for method in [Method::FlhdPartial, Method::FlhdSemiPartial] {
        for kind in [TransformKind::Permutation, TransformKind::SignFlip] {
            let out = run(
                &data,
                &MethodSpec::new(method).with_w(5000).with_seed(1).with_kind(kind),
            )?;
            println!(
                "{:<13} {:<12} T1 = {:+.4}  p = {:.4}  lambda = {:.3}  lambda_x = {}",
                method.name(),
                kind.name(),
                out.observed(),
                out.p_value,
                out.lambda.unwrap_or(f64::NAN),
                out.lambda_x.map_or("-".into(), |l| format!("{l:.3}"))
            );
        }
    }

    let few = Dataset::new(data.y().clone(), data.x().clone(), data.z().columns(0, 5).into_owned())?;
    let out = run(
        &few,
        &MethodSpec::new(Method::FreedmanLane(ClassicStatistic::Partial)).with_w(5000),
    )?;
    println!(
        "\nclassical Freedman-Lane on 5 nuisance columns: p = {:.4}",
        out.p_value
    );
    Ok(())
}
