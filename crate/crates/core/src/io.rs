//! CSV ingestion, scenario files and result serialization.
//!
//! Every floating-point number written by this module uses 17 significant digits, so a value
//! read back parses to the same bits.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, Preprocessing};
use crate::error::{Error, Result};
use crate::methods::{ColumnSelection, Method, PenaltyPolicy, TestOutcome};
use crate::perm::TransformKind;
use crate::ridge::{CvScaling, PenaltyGrid};
use crate::sim::presets::{self, Scale};
use crate::sim::{method_label, Design, ErrorLaw, Mode, RejectionTable, Scenario};

/// `x` with 17 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Which CSV columns play which role. Columns not named here are nuisance covariates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnRoles {
    pub outcome: String,
    pub interest: Vec<String>,
}

impl ColumnRoles {
    pub fn new(outcome: impl Into<String>, interest: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            outcome: outcome.into(),
            interest: interest.into_iter().map(Into::into).collect(),
        }
    }
}

/// A dataset read from CSV together with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: Dataset,
    pub outcome: String,
    pub interest: Vec<String>,
    pub nuisance: Vec<String>,
}

impl Ingested {
    /// Name of covariate of interest `col`, for error messages.
    pub fn interest_name(&self, col: usize) -> &str {
        self.interest.get(col).map(String::as_str).unwrap_or("?")
    }
}

/// Reads a CSV file with a header row; see [`read_csv`].
pub fn ingest_csv(path: impl AsRef<Path>, roles: &ColumnRoles, prep: Preprocessing) -> Result<Ingested> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, roles, prep)
}

/// Parses CSV with a header row into a centered (or standardized) [`Dataset`].
///
/// Rows are numbered from 1 for the first data row.
pub fn read_csv<R: Read>(reader: R, roles: &ColumnRoles, prep: Preprocessing) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();

    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    if roles.interest.is_empty() {
        return Err(Error::InvalidArgument("no covariate of interest given".into()));
    }
    let y_idx = find(&roles.outcome)?;
    let x_idx: Vec<usize> = roles.interest.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let mut seen = vec![y_idx];
    for (&i, name) in x_idx.iter().zip(&roles.interest) {
        if seen.contains(&i) {
            return Err(Error::InvalidArgument(format!(
                "column {name} is given more than one role"
            )));
        }
        seen.push(i);
    }
    let z_idx: Vec<usize> = (0..header.len()).filter(|i| !seen.contains(i)).collect();
    if z_idx.is_empty() {
        return Err(Error::InvalidArgument("no nuisance columns remain".into()));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let values = record
            .iter()
            .zip(&header)
            .map(|(cell, name)| {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: name.clone(),
                    message: if cell.is_empty() {
                        "empty cell".to_string()
                    } else {
                        format!("{cell:?} is not a number")
                    },
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite(format!("row {row}, column {name}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    let n = rows.len();
    let column = |j: usize| rows.iter().map(move |r| r[j]);
    let y = DVector::from_iterator(n, column(y_idx));
    let x = DMatrix::from_iterator(n, x_idx.len(), x_idx.iter().flat_map(|&j| column(j)));
    let z = DMatrix::from_iterator(n, z_idx.len(), z_idx.iter().flat_map(|&j| column(j)));
    let dataset = Dataset::new(y, x, z)?.preprocess(prep);
    Ok(Ingested {
        dataset,
        outcome: header[y_idx].clone(),
        interest: x_idx.iter().map(|&i| header[i].clone()).collect(),
        nuisance: z_idx.iter().map(|&i| header[i].clone()).collect(),
    })
}

/// Writes `data` as CSV with columns outcome, interest, nuisance.
pub fn write_csv<W: Write>(
    writer: W,
    data: &Dataset,
    outcome: &str,
    interest: &[String],
    nuisance: &[String],
) -> Result<()> {
    if interest.len() != data.d() || nuisance.len() != data.q() {
        return Err(Error::DimensionMismatch(format!(
            "{} interest and {} nuisance names for d = {}, q = {}",
            interest.len(),
            nuisance.len(),
            data.d(),
            data.q()
        )));
    }
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let header = std::iter::once(outcome)
        .chain(interest.iter().map(String::as_str))
        .chain(nuisance.iter().map(String::as_str));
    w.write_record(header).map_err(io)?;
    for i in 0..data.n() {
        let (x, z) = (data.x().row(i), data.z().row(i));
        let row = std::iter::once(data.y()[i])
            .chain(x.iter().copied())
            .chain(z.iter().copied())
            .map(format_number);
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Tsv,
}

fn json_string(s: &str) -> String {
    serde_json::Value::String(s.to_string()).to_string()
}

fn json_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "null".to_string(), format_number)
}

/// Extra context echoed next to a [`TestOutcome`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordContext {
    pub seed: u64,
    pub columns: Vec<String>,
    /// When set, the record also states whether `p ≤ alpha`.
    pub alpha: Option<f64>,
}

/// The test record as `(key, value)` pairs in output order. String values are not quoted.
fn outcome_fields(o: &TestOutcome, ctx: &RecordContext) -> Vec<(&'static str, String, bool)> {
    let mut fields = vec![
        ("method", o.method.name().to_string(), true),
        ("columns", ctx.columns.join(","), true),
        ("p", format_number(o.p_value), false),
        ("T1", format_number(o.observed()), false),
        ("w", o.w().to_string(), false),
        ("seed", ctx.seed.to_string(), false),
        ("plan_seed", o.plan_seed.to_string(), false),
        ("lambda", json_opt(o.lambda), false),
        ("lambda_x", json_opt(o.lambda_x), false),
        ("statistic_kind", o.statistic_kind.name().to_string(), true),
        ("sidedness", o.sidedness.name().to_string(), true),
    ];
    if let Some(alpha) = ctx.alpha {
        fields.push(("alpha", format_number(alpha), false));
        fields.push(("reject", (o.p_value <= alpha).to_string(), false));
    }
    fields
}

/// One JSON object per line.
pub fn outcome_json(o: &TestOutcome, ctx: &RecordContext) -> String {
    let body: Vec<String> = outcome_fields(o, ctx)
        .into_iter()
        .map(|(k, v, quoted)| format!("{}:{}", json_string(k), if quoted { json_string(&v) } else { v }))
        .collect();
    format!("{{{}}}\n", body.join(","))
}

/// A header line and one value line.
pub fn outcome_tsv(o: &TestOutcome, ctx: &RecordContext) -> String {
    let fields = outcome_fields(o, ctx);
    let keys: Vec<&str> = fields.iter().map(|f| f.0).collect();
    let values: Vec<String> = fields
        .into_iter()
        .map(|(_, v, _)| if v == "null" { "NA".to_string() } else { v })
        .collect();
    format!("{}\n{}\n", keys.join("\t"), values.join("\t"))
}

pub fn outcome_record(o: &TestOutcome, ctx: &RecordContext, format: Format) -> String {
    match format {
        Format::Json => outcome_json(o, ctx),
        Format::Tsv => outcome_tsv(o, ctx),
    }
}

/// Rows are cutoffs; each method contributes a rate column and a standard-error column.
pub fn table_tsv(t: &RejectionTable) -> String {
    let mut out = String::from("alpha");
    for m in &t.methods {
        let label = method_label(*m);
        let _ = write!(out, "\t{label}\t{label}_se");
    }
    out.push('\n');
    for (a, alpha) in t.alphas.iter().enumerate() {
        out.push_str(&format_number(*alpha));
        for m in 0..t.methods.len() {
            let _ = write!(
                out,
                "\t{}\t{}",
                format_number(t.rates[m][a]),
                format_number(t.std_errors[m][a])
            );
        }
        out.push('\n');
    }
    out
}

pub fn table_json(t: &RejectionTable) -> String {
    let list = |v: &[f64]| v.iter().map(|&x| format_number(x)).collect::<Vec<_>>().join(",");
    let methods: Vec<String> = t
        .methods
        .iter()
        .enumerate()
        .map(|(m, method)| {
            format!(
                "{{\"method\":{},\"label\":{},\"rates\":[{}],\"std_errors\":[{}],\"failures\":{}}}",
                json_string(method.name()),
                json_string(method_label(*method)),
                list(&t.rates[m]),
                list(&t.std_errors[m]),
                t.failures[m]
            )
        })
        .collect();
    format!(
        "{{\"scenario\":{},\"mode\":{},\"reps\":{},\"alphas\":[{}],\"methods\":[{}]}}\n",
        json_string(&t.scenario),
        json_string(t.mode.name()),
        t.reps,
        list(&t.alphas),
        methods.join(",")
    )
}

pub fn table_record(t: &RejectionTable, format: Format) -> String {
    match format {
        Format::Json => table_json(t),
        Format::Tsv => table_tsv(t),
    }
}

/// Expands a comma-separated list in which `v*k` stands for `k` copies of `v`.
pub fn parse_list<T: std::str::FromStr + Clone>(value: &str, key: &str) -> Result<Vec<T>> {
    let bad = |item: &str| Error::InvalidArgument(format!("{key}: cannot parse {item:?}"));
    let mut out = Vec::new();
    for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item.split_once('*') {
            Some((v, k)) => {
                let v: T = v.trim().parse().map_err(|_| bad(item))?;
                let k: usize = k.trim().parse().map_err(|_| bad(item))?;
                out.extend(std::iter::repeat_n(v, k));
            }
            None => out.push(item.parse().map_err(|_| bad(item))?),
        }
    }
    Ok(out)
}

fn parse_scalar<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("{key}: cannot parse {value:?}")))
}

/// Parses a scenario file: one `key = value` per line, `#` starts a comment, lists are
/// comma-separated and accept `value*count`.
///
/// A `preset = name` line (anywhere in the file) supplies defaults for keys not given.
/// Without it, `n`, `d`, `q` are required and the remaining keys default to a Gaussian,
/// homogeneous, level-mode scenario with FLH1, FLH2 and DR.
///
/// Keys: `preset`, `scale` (desk|full), `name`, `n`, `d`, `q`, `beta`, `gamma`, `rho`,
/// `clusters`, `errors` (gaussian|cubed-exponential|heteroscedastic), `mode` (level|power),
/// `reps`, `w`, `alphas`, `methods`, `transform` (permutation|sign-flip), `seed`, `folds`,
/// `cv_scaling` (glmnet|per-observation), `lambda`, `lambda_x`.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            row: i + 1,
            column: String::new(),
            message: format!("expected key = value, found {line:?}"),
        })?;
        let key = k.trim().to_ascii_lowercase();
        if pairs.iter().any(|(seen, _)| *seen == key) {
            return Err(Error::Parse {
                row: i + 1,
                column: key,
                message: "duplicate key".into(),
            });
        }
        pairs.push((key, v.trim().to_string()));
    }
    let get = |key: &str| pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

    let scale = match get("scale") {
        None | Some("desk") => Scale::Desk,
        Some("full") => Scale::Full,
        Some(other) => {
            return Err(Error::InvalidArgument(format!(
                "scale: expected desk or full, got {other:?}"
            )))
        }
    };
    let mut s = match get("preset") {
        Some(name) => presets::preset(name, scale)?,
        None => {
            let need = |key: &str| {
                get(key).ok_or_else(|| Error::InvalidArgument(format!("scenario file needs {key} or preset")))
            };
            let n: usize = parse_scalar(need("n")?, "n")?;
            let d: usize = parse_scalar(need("d")?, "d")?;
            let q: usize = parse_scalar(need("q")?, "q")?;
            Scenario {
                name: "custom".into(),
                n,
                d,
                q,
                beta: vec![0.0; d],
                gamma: vec![0.0; q],
                design: Design::Homogeneous { rho: 0.0 },
                error_law: ErrorLaw::Gaussian,
                mode: Mode::Level,
                reps: scale.reps(),
                w: scale.w(),
                alphas: presets::DEFAULT_ALPHAS.to_vec(),
                methods: vec![
                    Method::FlhdPartial,
                    Method::FlhdSemiPartial,
                    Method::DoubleResidualization,
                ],
                kind: TransformKind::Permutation,
                penalty: PenaltyPolicy::default(),
                master_seed: presets::DEFAULT_SEED,
            }
        }
    };

    for (key, value) in &pairs {
        apply_override(&mut s, key, value)?;
    }
    s.validate()?;
    Ok(s)
}

/// Sets one scenario field from its text form. Keys `preset` and `scale` are ignored here.
pub fn apply_override(s: &mut Scenario, key: &str, value: &str) -> Result<()> {
    match key {
        "preset" | "scale" => {}
        "name" => s.name = value.to_string(),
        "n" => s.n = parse_scalar(value, key)?,
        "d" => s.d = parse_scalar(value, key)?,
        "q" => s.q = parse_scalar(value, key)?,
        "beta" => s.beta = parse_list(value, key)?,
        "gamma" => s.gamma = parse_list(value, key)?,
        "rho" => {
            let rho = parse_scalar(value, key)?;
            s.design = match &s.design {
                Design::Homogeneous { .. } => Design::Homogeneous { rho },
                Design::Clusters { sizes, .. } => Design::Clusters {
                    sizes: sizes.clone(),
                    rho,
                },
            };
        }
        "clusters" => {
            let rho = match s.design {
                Design::Homogeneous { rho } | Design::Clusters { rho, .. } => rho,
            };
            let sizes: Vec<usize> = parse_list(value, key)?;
            s.design = if sizes.is_empty() {
                Design::Homogeneous { rho }
            } else {
                Design::Clusters { sizes, rho }
            };
        }
        "errors" => {
            s.error_law = match value {
                "gaussian" => ErrorLaw::Gaussian,
                "cubed-exponential" => ErrorLaw::CubedExponential,
                "cubed-exponential-sample-scaled" => ErrorLaw::CubedExponentialSampleScaled,
                "heteroscedastic" => ErrorLaw::Heteroscedastic,
                _ => return Err(Error::InvalidArgument(format!("errors: unknown law {value:?}"))),
            }
        }
        "mode" => s.mode = parse_mode(value)?,
        "reps" => s.reps = parse_scalar(value, key)?,
        "w" => s.w = parse_scalar(value, key)?,
        "alphas" => s.alphas = parse_list(value, key)?,
        "methods" => s.methods = parse_list(value, key)?,
        "transform" => s.kind = parse_transform(value)?,
        "seed" => s.master_seed = parse_scalar(value, key)?,
        "folds" | "cv_scaling" => {
            let (mut folds, grid, mut scaling) = match s.penalty {
                PenaltyPolicy::CrossValidated { folds, grid, scaling } => (folds, grid, scaling),
                PenaltyPolicy::Fixed { .. } => (10, PenaltyGrid::default(), CvScaling::default()),
            };
            if key == "folds" {
                folds = parse_scalar(value, key)?;
            } else {
                scaling = match value {
                    "glmnet" => CvScaling::Glmnet,
                    "per-observation" => CvScaling::PerObservation,
                    _ => return Err(Error::InvalidArgument(format!("cv_scaling: unknown value {value:?}"))),
                };
            }
            s.penalty = PenaltyPolicy::CrossValidated { folds, grid, scaling };
        }
        "lambda" => {
            let lambda = parse_scalar(value, key)?;
            let lambda_x = match s.penalty {
                PenaltyPolicy::Fixed { lambda_x, .. } => lambda_x,
                _ => None,
            };
            s.penalty = PenaltyPolicy::Fixed { lambda, lambda_x };
        }
        "lambda_x" => {
            let lambda_x = Some(parse_scalar(value, key)?);
            let lambda = match s.penalty {
                PenaltyPolicy::Fixed { lambda, .. } => lambda,
                _ => return Err(Error::InvalidArgument("lambda_x requires lambda".into())),
            };
            s.penalty = PenaltyPolicy::Fixed { lambda, lambda_x };
        }
        _ => return Err(Error::InvalidArgument(format!("unknown scenario key {key:?}"))),
    }
    Ok(())
}

pub fn parse_mode(value: &str) -> Result<Mode> {
    match value {
        "level" => Ok(Mode::Level),
        "power" => Ok(Mode::Power),
        _ => Err(Error::InvalidArgument(format!(
            "mode: expected level or power, got {value:?}"
        ))),
    }
}

pub fn parse_transform(value: &str) -> Result<TransformKind> {
    match value {
        "permutation" | "permute" => Ok(TransformKind::Permutation),
        "sign-flip" | "flip" => Ok(TransformKind::SignFlip),
        _ => Err(Error::InvalidArgument(format!(
            "transform: expected permutation or sign-flip, got {value:?}"
        ))),
    }
}

/// Column names for a [`ColumnSelection`].
pub fn selected_names(ingested: &Ingested, columns: ColumnSelection) -> Vec<String> {
    match columns {
        ColumnSelection::Single(c) => vec![ingested.interest_name(c).to_string()],
        ColumnSelection::All => ingested.interest.clone(),
    }
}
