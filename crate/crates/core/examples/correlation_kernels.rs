//! Partial, semi-partial and their ridge generalizations on one dataset.
//!
//! ```text
//! cargo run --release --example correlation_kernels
//! ```

use hdperm::stats::{generalized_partial_cor, generalized_semi_partial_cor, partial_cor, pearson, semi_partial_cor};
use hdperm::{Dataset, RidgeProjector};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> Result<(), hdperm::Error> {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut draw = |r, c| DMatrix::<f64>::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let (z_small, z_wide, e, u) = (draw(n, 3), draw(n, 60), draw(n, 1), draw(n, 1));
    let x = DMatrix::from_fn(n, 1, |i, _| 0.7 * z_small[(i, 0)] + u[(i, 0)]);
    let y = DVector::from_fn(n, |i, _| 0.5 * x[(i, 0)] + z_small[(i, 0)] + e[(i, 0)]);

    let low = Dataset::new(y.clone(), x.clone(), z_small)?.centered();
    println!("q = 3 < n: OLS residual maker");
    println!(
        "  pearson(y, x)        {:.4}",
        pearson(low.y().as_slice(), low.x().as_slice())?
    );
    println!("  partial              {:.4}", partial_cor(&low, 0)?);
    println!("  semi-partial         {:.4}", semi_partial_cor(&low, 0)?);

    let high = Dataset::new(y, x, z_wide)?.centered();
    let proj = RidgeProjector::decompose(high.z())?;
    let x0 = high.x_column(0)?;
    println!("\nq = 60 > n: ridge residual maker");
    println!(
        "{:>10} {:>22} {:>26}",
        "lambda", "generalized partial", "generalized semi-partial"
    );
    for lambda in [1.0, 10.0, 100.0] {
        let ry = proj.apply_residual(lambda, high.y())?;
        let rx = proj.apply_residual(lambda, &x0)?;
        println!(
            "{lambda:>10} {:>22.4} {:>26.4}",
            generalized_partial_cor(ry.as_slice(), rx.as_slice())?,
            generalized_semi_partial_cor(ry.as_slice(), x0.as_slice())?
        );
    }
    Ok(())
}
