//! Seeded permutation and sign-flip plans, exhaustive plans, and Monte Carlo p-values.
//!
//! ```text
//! cargo run --release --example transformation_plans
//! ```

use hdperm::perm::{npc_combine, p_one_sided, p_two_sided};
use hdperm::{CombiningFunction, TransformKind, TransformationPlan};
use nalgebra::DMatrix;

fn main() -> Result<(), hdperm::Error> {
    let v = [1.0, 2.0, 3.0, 4.0, 5.0];
    for kind in [TransformKind::Permutation, TransformKind::SignFlip] {
        let plan = TransformationPlan::random(v.len(), 4, kind, 2024)?;
        println!("{} plan, seed {}:", kind.name(), plan.seed());
        for (j, t) in plan.iter().enumerate() {
            println!("  P_{} v = {:?}", j + 1, t.apply(&v)?);
        }
    }

    // Draw j depends only on (seed, j), so a longer plan extends a shorter one.
    let short = TransformationPlan::random(5, 10, TransformKind::Permutation, 9)?;
    let long = TransformationPlan::random(5, 1000, TransformKind::Permutation, 9)?;
    println!(
        "\ndraw 7 shared by w = 10 and w = 1000: {}",
        short.get(7) == long.get(7)
    );

    let all = TransformationPlan::exhaustive(4, TransformKind::Permutation)?;
    let flips = TransformationPlan::exhaustive(4, TransformKind::SignFlip)?;
    println!(
        "exhaustive plans for n = 4: {} permutations, {} sign vectors",
        all.w(),
        flips.w()
    );

    let stats = [2.1, 0.3, -1.2, 2.5, 0.9, -0.4, 1.7, -2.2];
    println!("\nT = {stats:?}");
    println!(
        "one-sided p = {}, two-sided p = {}",
        p_one_sided(&stats),
        p_two_sided(&stats)
    );

    let matrix = DMatrix::from_row_slice(4, 2, &[1.5, -0.2, 0.4, 0.9, -1.8, 0.1, 0.3, -0.5]);
    for psi in [
        CombiningFunction::MaxAbs,
        CombiningFunction::MeanAbs,
        CombiningFunction::Max,
    ] {
        println!("NPC p with {}: {}", psi.name(), npc_combine(&matrix, psi)?);
    }
    Ok(())
}
