//! Command-line front end: `test`, `simulate`, `presets`.
//!
//! Exit status 0 on success, 2 for invalid input, 3 when a statistic is degenerate.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::data::Preprocessing;
use crate::error::{Error, Result};
use crate::io::{self, ColumnRoles, Format, RecordContext};
use crate::methods::{self, ColumnSelection, Method, MethodSpec, PenaltyPolicy};
use crate::perm::TransformKind;
use crate::sim::presets::{self, Scale};
use crate::sim::{self, Mode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "hdperm",
    version,
    about = "Permutation tests with high-dimensional nuisance covariates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one covariate (or, with an NPC method, several) in a CSV file.
    Test(TestArgs),
    /// Estimate level or power of a preset or scenario file.
    Simulate(SimulateArgs),
    /// List the registered scenario presets.
    Presets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Tsv,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Json => Format::Json,
            OutputFormat::Tsv => Format::Tsv,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
#[group(multiple = false)]
pub struct TransformFlags {
    /// Random sign flips instead of permutations.
    #[arg(long)]
    pub flip: bool,
    /// Random permutations (default).
    #[arg(long)]
    pub permute: bool,
}

impl TransformFlags {
    fn kind(self) -> Option<TransformKind> {
        match (self.flip, self.permute) {
            (true, _) => Some(TransformKind::SignFlip),
            (_, true) => Some(TransformKind::Permutation),
            _ => None,
        }
    }
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// CSV file with a header row.
    pub input: PathBuf,
    /// Outcome column.
    #[arg(long)]
    pub y: String,
    /// Covariate(s) of interest; repeat or comma-separate. Other columns are nuisance.
    #[arg(long, required = true, value_delimiter = ',')]
    pub x: Vec<String>,
    /// fl, fl-semi, kennedy, flhd-partial, flhd-semi, dr, npc-max, npc-mean, npc-signed-max.
    #[arg(long, default_value = "flhd-semi")]
    pub method: Method,
    /// Number of transformations including the identity.
    #[arg(long, default_value_t = 20_000)]
    pub w: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report whether p ≤ alpha.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[command(flatten)]
    pub transform: TransformFlags,
    /// Fixed outcome-side penalty instead of cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fixed covariate-side penalty (defaults to --lambda).
    #[arg(long, requires = "lambda")]
    pub lambda_x: Option<f64>,
    /// Scale every column to unit standard deviation after centering.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Preset name (see `presets`) or path to a scenario file.
    pub scenario: String,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub w: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Coefficients of interest, comma-separated (`v*k` repeats).
    #[arg(long)]
    pub beta: Option<String>,
    /// level (β = 0) or power.
    #[arg(long)]
    pub mode: Option<String>,
    /// Cutoffs, comma-separated.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Methods, comma-separated.
    #[arg(long)]
    pub methods: Option<String>,
    #[command(flatten)]
    pub transform: TransformFlags,
    /// Fixed outcome-side penalty instead of cross-validation.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    pub lambda_x: Option<f64>,
    /// 10000 repetitions with w = 20000 for presets.
    #[arg(long)]
    pub full: bool,
    /// Any scenario key, as key=value; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    pub format: OutputFormat,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_degenerate() {
        EXIT_DEGENERATE
    } else {
        EXIT_INPUT
    }
}

/// Runs a parsed command, writing results to `out` and diagnostics to `err`.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Test(args) => cmd_test(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Presets => Ok(cmd_presets()),
    };
    match result {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                EXIT_INPUT
            }
        },
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            code
        }
    }
}

/// Entry point of the binary.
pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_from(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

fn penalty(lambda: Option<f64>, lambda_x: Option<f64>) -> Option<PenaltyPolicy> {
    lambda.map(|lambda| PenaltyPolicy::Fixed { lambda, lambda_x })
}

pub fn cmd_test(args: &TestArgs) -> Result<String> {
    let roles = ColumnRoles::new(args.y.clone(), args.x.clone());
    let prep = if args.standardize {
        Preprocessing::Standardize
    } else {
        Preprocessing::Center
    };
    let ingested = io::ingest_csv(&args.input, &roles, prep)?;
    if let Some(a) = args.alpha {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidArgument(format!("alpha {a} must lie in (0, 1]")));
        }
    }
    let columns = match args.method {
        Method::FlhdNpc(_) => ColumnSelection::All,
        _ if ingested.interest.len() > 1 => {
            return Err(Error::InvalidArgument(format!(
                "method {} tests one covariate; got {}",
                args.method.name(),
                ingested.interest.join(",")
            )))
        }
        _ => ColumnSelection::Single(0),
    };
    let mut spec = MethodSpec::new(args.method)
        .with_w(args.w)
        .with_seed(args.seed)
        .with_kind(args.transform.kind().unwrap_or_default())
        .with_columns(columns);
    if let Some(p) = penalty(args.lambda, args.lambda_x) {
        spec = spec.with_penalty(p);
    }
    let outcome = methods::run(&ingested.dataset, &spec).map_err(|e| name_columns(e, &ingested))?;
    let ctx = RecordContext {
        seed: args.seed,
        columns: io::selected_names(&ingested, columns),
        alpha: args.alpha,
    };
    Ok(io::outcome_record(&outcome, &ctx, args.format.into()))
}

/// Replaces positional column references in degenerate-statistic messages with names.
fn name_columns(e: Error, ingested: &io::Ingested) -> Error {
    match e {
        Error::ZeroVariance(mut label) => {
            for (i, name) in ingested.interest.iter().enumerate() {
                label = label.replace(&format!("(column {i})"), &format!("(column {name})"));
            }
            Error::ZeroVariance(label)
        }
        other => other,
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let scale = if args.full { Scale::Full } else { Scale::Desk };
    let mut s = if presets::names().any(|n| n == args.scenario) {
        presets::preset(&args.scenario, scale)?
    } else if std::path::Path::new(&args.scenario).is_file() {
        let text = std::fs::read_to_string(&args.scenario).map_err(|e| Error::Io(format!("{}: {e}", args.scenario)))?;
        io::parse_scenario(&text)?
    } else {
        return Err(Error::UnknownPreset(args.scenario.clone()));
    };

    let mut set = |key: &str, value: &str| io::apply_override(&mut s, key, value);
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("--set expects key=value, got {item:?}")))?;
        set(k.trim(), v.trim())?;
    }
    if let Some(v) = args.reps {
        set("reps", &v.to_string())?;
    }
    if let Some(v) = args.w {
        set("w", &v.to_string())?;
    }
    if let Some(v) = args.seed {
        set("seed", &v.to_string())?;
    }
    if let Some(v) = &args.beta {
        set("beta", v)?;
        // Giving β without a mode asks for power.
        if args.mode.is_none() {
            set("mode", "power")?;
        }
    }
    if let Some(v) = &args.mode {
        set("mode", v)?;
    }
    if let Some(v) = &args.alpha {
        set("alphas", v)?;
    }
    if let Some(v) = &args.methods {
        set("methods", v)?;
    }
    if let Some(k) = args.transform.kind() {
        set("transform", k.name())?;
    }
    if let Some(p) = penalty(args.lambda, args.lambda_x) {
        s.penalty = p;
    }
    if s.mode == Mode::Power && s.beta.iter().all(|&b| b == 0.0) {
        return Err(Error::InvalidArgument("power mode needs a nonzero beta".into()));
    }
    let table = sim::run_scenario(&s)?;
    let text = io::table_record(&table, args.format.into());
    for (m, &f) in table.failures.iter().enumerate() {
        if f > 0 {
            let msg = table.failure_messages[m].as_deref().unwrap_or("");
            eprintln!(
                "warning: {} failed in {f} of {} repetitions: {msg}",
                table.methods[m].name(),
                table.reps
            );
        }
    }
    Ok(text)
}

pub fn cmd_presets() -> String {
    let mut out = String::new();
    for p in presets::PRESETS.iter() {
        out.push_str(p.name);
        out.push('\t');
        out.push_str(p.description);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_from(
            std::iter::once("hdperm").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn presets_lists_every_name() {
        let (code, out, _) = run(&["presets"]);
        assert_eq!(code, 0);
        assert_eq!(out.lines().count(), presets::PRESETS.len());
        assert!(out.contains("table9_npc_s3"));
    }

    #[test]
    fn unknown_preset_is_an_input_error() {
        let (code, _, err) = run(&["simulate", "table42"]);
        assert_eq!(code, EXIT_INPUT);
        assert!(err.contains("table42"));
    }

    #[test]
    fn bad_flags_are_input_errors() {
        assert_eq!(run(&["test"]).0, EXIT_INPUT);
        assert_eq!(run(&["simulate", "table3", "--flip", "--permute"]).0, EXIT_INPUT);
        assert_eq!(run(&["simulate", "table3", "--set", "nonsense"]).0, EXIT_INPUT);
    }

    #[test]
    fn default_method_and_w() {
        let cli = Cli::try_parse_from(["hdperm", "test", "f.csv", "--y", "y", "--x", "a,b"]).unwrap();
        match cli.command {
            Command::Test(a) => {
                assert_eq!(a.method, Method::FlhdSemiPartial);
                assert_eq!(a.w, 20_000);
                assert_eq!(a.x, vec!["a", "b"]);
            }
            _ => unreachable!(),
        }
    }
}
