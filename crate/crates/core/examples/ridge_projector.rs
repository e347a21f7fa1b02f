//! Decomposes a wide nuisance matrix once, then applies ridge hat and residual operators at
//! several penalties and picks a penalty by cross-validation.
//!
//! ```text
//! cargo run --release --example ridge_projector
//! ```

use hdperm::{select_penalty, CvConfig, RidgeProjector};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), hdperm::Error> {
    let (n, q) = (30, 80);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let z: DMatrix<f64> = DMatrix::from_fn(n, q, |_, _| StandardNormal.sample(&mut rng));
    let noise: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let y = z.column(0) + z.column(1) * 0.5 + noise;

    let proj = RidgeProjector::decompose(&z)?;
    println!("n = {n}, q = {q}, rank = {}", proj.rank());
    println!("largest singular value {:.3}", proj.singular_values().max());

    println!("\n{:>10} {:>12} {:>12} {:>14}", "lambda", "|H y|", "|R y|", "trace H");
    for lambda in [0.1, 1.0, 10.0, 100.0, 1000.0] {
        let h = proj.apply_hat(lambda, &y)?;
        let r = proj.apply_residual(lambda, &y)?;
        let trace: f64 = proj.shrinkage(lambda)?.sum();
        println!("{lambda:>10} {:>12.4} {:>12.4} {trace:>14.4}", h.norm(), r.norm());
    }

    let sel = select_penalty(
        &z,
        &y,
        &CvConfig {
            seed: 7,
            ..CvConfig::default()
        },
    )?;
    println!(
        "\n10-fold CV: grid value {:.4e} (index {}), penalty n * lambda = {:.4}",
        sel.grid[sel.chosen_index], sel.chosen_index, sel.chosen
    );
    Ok(())
}
