//! Estimates level and power of a preset scenario at reduced scale.
//!
//! ```text
//! cargo run --release --example simulate_scenario -- table3 200 500
//! ```

use hdperm::sim::presets::{self, Scale};
use hdperm::sim::{method_label, run_scenario, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "table3".into());
    let reps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);
    let w: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(500);

    let scenario = presets::preset(&name, Scale::Desk)?.with_reps(reps).with_w(w);
    println!(
        "{name}: n = {}, d = {}, q = {}, reps = {reps}, w = {w}",
        scenario.n, scenario.d, scenario.q
    );
    for mode in [Mode::Level, Mode::Power] {
        let start = std::time::Instant::now();
        let table = run_scenario(&scenario.clone().with_mode(mode))?;
        println!("\n{} ({:.1?})", mode.name(), start.elapsed());
        print!("{:>8}", "alpha");
        for m in &table.methods {
            print!("{:>16}", method_label(*m));
        }
        println!();
        for (a, alpha) in table.alphas.iter().enumerate() {
            print!("{alpha:>8}");
            for m in 0..table.methods.len() {
                print!("{:>9.4} ({:.3})", table.rates[m][a], table.std_errors[m][a]);
            }
            println!();
        }
        for (m, &f) in table.failures.iter().enumerate() {
            if f > 0 {
                println!("{}: {f} failed repetitions", method_label(table.methods[m]));
            }
        }
    }
    Ok(())
}
