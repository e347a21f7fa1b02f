//! Writes a simulated dataset to CSV, reads it back by column name, runs a test and prints
//! the JSON and TSV records the command line tool emits.
//!
//! ```text
//! cargo run --release --example csv_workflow [path.csv]
//! ```

use hdperm::io::{self, ColumnRoles, Format, RecordContext};
use hdperm::sim::presets::{self, Scale};
use hdperm::sim::Mode;
use hdperm::{run, Method, MethodSpec, Preprocessing};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("hdperm_example.csv"));

    let data = presets::preset("table3", Scale::Desk)?
        .with_mode(Mode::Power)
        .generate(0)?;
    let nuisance: Vec<String> = (1..=data.q()).map(|k| format!("z{k}")).collect();
    io::write_csv(std::fs::File::create(&path)?, &data, "y", &["x".to_string()], &nuisance)?;
    println!("wrote {} ({} rows, {} columns)", path.display(), data.n(), data.q() + 2);

    let roles = ColumnRoles::new("y", ["x"]);
    let ingested = io::ingest_csv(&path, &roles, Preprocessing::Center)?;
    println!(
        "read back: outcome {}, interest {:?}, {} nuisance columns",
        ingested.outcome,
        ingested.interest,
        ingested.nuisance.len()
    );

    let seed = 11;
    let out = run(
        &ingested.dataset,
        &MethodSpec::new(Method::DoubleResidualization)
            .with_w(5000)
            .with_seed(seed),
    )?;
    let ctx = RecordContext {
        seed,
        columns: ingested.interest.clone(),
        alpha: Some(0.05),
    };
    print!("\n{}", io::outcome_record(&out, &ctx, Format::Json));
    print!("\n{}", io::outcome_record(&out, &ctx, Format::Tsv));
    Ok(())
}
