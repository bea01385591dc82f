//! Command-line front end: fit, eval, sample, check and grid.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 check failure.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::Value;

use crate::densities::{
    BetaParams, EllipticalParams, Family, GammaLogGammaParams, GenGammaBetaParams, GenGammaParams,
    GenGammaTParams, MvTParams,
};
use crate::error::Error;
use crate::generators::GeneratorSpec;
use crate::mle::{fit_dependent, fit_independent, FitOptions, KotzGammaDepParams};
use crate::params::{
    ExtendedShape, FitMode, FitResult, MvEllipticalParams, Partition, SampleMatrix,
    ScaleShapeParams,
};
use crate::sampling::{sample_mv_gengamma, FamilySampler, RadiusSampler, RngState};
use crate::validation::{run_suite, Suite, SuiteOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Offset between the seeds of the two columns in independent sampling.
const COLUMN_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Parser)]
#[command(
    name = "multivec",
    version,
    about = "Multivector variate distributions: fit, evaluate, sample, check"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Dependent,
    Independent,
}

impl From<ModeArg> for FitMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Dependent => FitMode::Dependent,
            ModeArg::Independent => FitMode::Independent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SuiteArg {
    Normalization,
    Identities,
    Pushforward,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Normalization => Suite::Normalization,
            SuiteArg::Identities => Suite::Identities,
            SuiteArg::Pushforward => Suite::Pushforward,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the Kotz-gamma model to a `u,v` CSV.
    Fit {
        #[arg(long, default_value = "kotz-gamma")]
        model: String,
        #[arg(long, value_enum, default_value = "dependent")]
        mode: ModeArg,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 10_000)]
        max_iters: usize,
        /// Hold (r, q, s) at the Gaussian generator (1/2, 1, 1).
        #[arg(long)]
        freeze_generator: bool,
    },
    /// Print the log-density at one point.
    Eval {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Write draws as CSV.
    Sample {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        #[arg(short = 'n', long = "n")]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// kotz-gamma only: one joint draw of all rows, or iid rows.
        #[arg(long, value_enum, default_value = "dependent")]
        mode: ModeArg,
    },
    /// Run a validation suite and print one JSON report per line.
    Check {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Draws per goodness-of-fit check.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Write the kotz-gamma density on a K×K grid as `u,v,pdf`.
    Grid {
        #[arg(long)]
        model: String,
        #[arg(long)]
        params: PathBuf,
        /// "umin,umax,vmin,vmax"
        #[arg(long, allow_hyphen_values = true)]
        range: String,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::input(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and
/// returns its exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn execute(command: Command, out: &mut dyn std::io::Write) -> CliResult<u8> {
    match command {
        Command::Fit {
            model,
            mode,
            input,
            out: path,
            restarts,
            max_iters,
            freeze_generator,
        } => {
            if model != "kotz-gamma" {
                return Err(CliError::input(format!(
                    "fit supports only `kotz-gamma`, got `{model}`"
                )));
            }
            let data = read_paired_csv(&input)?;
            let opts = FitOptions {
                restarts,
                max_iters,
                freeze_generator,
                ..FitOptions::default()
            };
            let fit = match FitMode::from(mode) {
                FitMode::Dependent => fit_dependent(&data, &opts)?,
                FitMode::Independent => fit_independent(&data, &opts)?,
            };
            let doc = ParamsDocument::from_fit(&model, &fit);
            write_file(&path, &doc.to_json())?;
            if fit.converged {
                Ok(0)
            } else {
                eprintln!("warning: optimizer did not converge");
                Ok(2)
            }
        }
        Command::Eval {
            model,
            params,
            point,
        } => {
            let doc = ParamsDocument::read(&params)?;
            doc.check_model(&model)?;
            let point = parse_list(&point, "point")?;
            let model = Model::build(&model, &doc.params)?;
            writeln!(out, "{}", format_logpdf(model.logpdf(&point)?)).map_err(io_error)?;
            Ok(0)
        }
        Command::Sample {
            model,
            params,
            n,
            seed,
            out: path,
            mode,
        } => {
            let doc = ParamsDocument::read(&params)?;
            doc.check_model(&model)?;
            let m = Model::build(&model, &doc.params)?;
            let sample = m.sample(n, seed, mode.into())?;
            write_file(&path, &sample_csv(&m.column_names(), &sample))?;
            Ok(0)
        }
        Command::Check {
            suite,
            seed,
            draws,
            inject_fault,
        } => {
            let opts = SuiteOptions {
                seed,
                draws,
                inject_fault,
                ..SuiteOptions::default()
            };
            let reports = run_suite(suite.into(), &opts).map_err(|e| CliError {
                code: 3,
                message: format!("check could not run: {e}"),
            })?;
            let mut failed = 0;
            for r in &reports {
                writeln!(out, "{}", r.to_json()).map_err(io_error)?;
                if !r.passed {
                    failed += 1;
                }
            }
            eprintln!("{} checks, {failed} failed", reports.len());
            Ok(if failed == 0 { 0 } else { 3 })
        }
        Command::Grid {
            model,
            params,
            range,
            steps,
            out: path,
        } => {
            if model != "kotz-gamma-2d" {
                return Err(CliError::input(format!(
                    "grid supports only `kotz-gamma-2d`, got `{model}`"
                )));
            }
            let doc = ParamsDocument::read(&params)?;
            doc.check_model(&model)?;
            let range = parse_range(&range)?;
            let p = kotz_gamma_pair(&doc.params)?;
            write_file(&path, &grid_csv(&p, range, steps)?)?;
            Ok(0)
        }
    }
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::input(format!("i/o error: {e}"))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn parse_list(text: &str, what: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::input(format!("{what}: `{}` is not a number", s.trim())))
        })
        .collect()
}

fn parse_range(text: &str) -> CliResult<[f64; 4]> {
    let v = parse_list(text, "range")?;
    if v.len() != 4 {
        return Err(CliError::input(format!(
            "range needs 4 values umin,umax,vmin,vmax, got {}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) || !(v[0] < v[1]) || !(v[2] < v[3]) {
        return Err(CliError::input(format!(
            "invalid range {text}: need finite umin < umax and vmin < vmax"
        )));
    }
    Ok([v[0], v[1], v[2], v[3]])
}

// ---------------------------------------------------------------------------
// Number formatting

/// 17 significant digits in scientific notation.
pub fn format_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// `sig` significant digits, fixed notation for moderate exponents.
pub fn format_significant(x: f64, sig: usize) -> String {
    if x == f64::NEG_INFINITY {
        return "-inf".into();
    }
    if x == f64::INFINITY {
        return "inf".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..15).contains(&exp) {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn format_logpdf(v: f64) -> String {
    format_significant(v, 12)
}

// ---------------------------------------------------------------------------
// Parameter documents

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub restarts: Vec<(String, f64)>,
    pub at_bound: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub version: String,
    pub seed: Option<u64>,
    pub command: String,
}

/// Canonical JSON parameter file: keys sorted, numbers with 17 significant
/// digits, so write → read → write is byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsDocument {
    pub model: Option<String>,
    pub mode: Option<FitMode>,
    pub params: BTreeMap<String, f64>,
    pub loglik: Option<f64>,
    pub meta: Option<Meta>,
    pub diagnostics: Option<FitDiagnostics>,
}

impl ParamsDocument {
    pub fn new(model: &str, params: BTreeMap<String, f64>) -> Self {
        Self {
            model: Some(model.to_string()),
            mode: None,
            params,
            loglik: None,
            meta: None,
            diagnostics: None,
        }
    }

    pub fn from_fit(model: &str, fit: &FitResult) -> Self {
        Self {
            model: Some(model.to_string()),
            mode: Some(fit.mode),
            params: fit.params.clone(),
            loglik: Some(fit.loglik),
            meta: Some(Meta {
                version: VERSION.to_string(),
                seed: None,
                command: "fit".into(),
            }),
            diagnostics: Some(FitDiagnostics {
                iterations: fit.iterations,
                converged: fit.converged,
                restarts: fit.restarts.clone(),
                at_bound: fit.at_bound.clone(),
            }),
        }
    }

    pub fn to_json(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("strings serialize");
        let mut fields: Vec<(&str, String)> = Vec::new();
        if let Some(d) = &self.diagnostics {
            let mut sorted = d.restarts.clone();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            let restarts: Vec<String> = sorted
                .iter()
                .map(|(label, v)| format!("      {}: {}", q(label), format_real(*v)))
                .collect();
            let bound: Vec<String> = d.at_bound.iter().map(|k| q(k)).collect();
            let restarts = if restarts.is_empty() {
                "{}".to_string()
            } else {
                format!("{{\n{}\n    }}", restarts.join(",\n"))
            };
            fields.push((
                "diagnostics",
                format!(
                    "{{\n    \"at_bound\": [{}],\n    \"converged\": {},\n    \"iterations\": {},\n    \"restarts\": {}\n  }}",
                    bound.join(", "),
                    d.converged,
                    d.iterations,
                    restarts
                ),
            ));
        }
        if let Some(l) = self.loglik {
            fields.push(("loglik", format_real(l)));
        }
        if let Some(m) = &self.meta {
            let seed = m.seed.map_or("null".to_string(), |s| s.to_string());
            fields.push((
                "meta",
                format!(
                    "{{\n    \"command\": {},\n    \"seed\": {seed},\n    \"version\": {}\n  }}",
                    q(&m.command),
                    q(&m.version)
                ),
            ));
        }
        if let Some(mode) = self.mode {
            fields.push(("mode", q(mode.as_str())));
        }
        if let Some(model) = &self.model {
            fields.push(("model", q(model)));
        }
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("    {}: {}", q(k), format_real(*v)))
            .collect();
        fields.push((
            "params",
            if params.is_empty() {
                "{}".to_string()
            } else {
                format!("{{\n{}\n  }}", params.join(",\n"))
            },
        ));
        let mut s = String::from("{\n");
        for (i, (k, v)) in fields.iter().enumerate() {
            let _ = write!(s, "  {}: {v}", q(k));
            s.push_str(if i + 1 < fields.len() { ",\n" } else { "\n" });
        }
        s.push_str("}\n");
        s
    }

    /// Accepts a full document or a bare `{"name": number, …}` map.
    pub fn parse(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::input(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::input("parameter file must hold a JSON object"))?;
        let number = |v: &Value, what: &str| -> CliResult<f64> {
            v.as_f64()
                .ok_or_else(|| CliError::input(format!("`{what}` must be a number")))
        };
        let string = |v: &Value, what: &str| -> CliResult<String> {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| CliError::input(format!("`{what}` must be a string")))
        };
        let Some(params) = obj.get("params") else {
            let mut params = BTreeMap::new();
            for (k, v) in obj {
                params.insert(k.clone(), number(v, k)?);
            }
            return Ok(Self {
                model: None,
                mode: None,
                params,
                loglik: None,
                meta: None,
                diagnostics: None,
            });
        };
        let mut doc = Self {
            model: None,
            mode: None,
            params: BTreeMap::new(),
            loglik: None,
            meta: None,
            diagnostics: None,
        };
        let pmap = params
            .as_object()
            .ok_or_else(|| CliError::input("`params` must be an object"))?;
        for (k, v) in pmap {
            doc.params.insert(k.clone(), number(v, k)?);
        }
        for (key, v) in obj {
            match key.as_str() {
                "params" => {}
                "model" => doc.model = Some(string(v, "model")?),
                "mode" => {
                    doc.mode = Some(match string(v, "mode")?.as_str() {
                        "dependent" => FitMode::Dependent,
                        "independent" => FitMode::Independent,
                        other => return Err(CliError::input(format!("unknown mode `{other}`"))),
                    })
                }
                "loglik" => doc.loglik = v.as_f64(),
                "meta" => {
                    let m = v
                        .as_object()
                        .ok_or_else(|| CliError::input("`meta` must be an object"))?;
                    doc.meta = Some(Meta {
                        version: m
                            .get("version")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string(),
                        seed: m.get("seed").and_then(Value::as_u64),
                        command: m
                            .get("command")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string(),
                    });
                }
                "diagnostics" => {
                    let d = v
                        .as_object()
                        .ok_or_else(|| CliError::input("`diagnostics` must be an object"))?;
                    let mut restarts = Vec::new();
                    if let Some(r) = d.get("restarts").and_then(Value::as_object) {
                        for (label, val) in r {
                            restarts.push((label.clone(), val.as_f64().unwrap_or(f64::NAN)));
                        }
                    }
                    doc.diagnostics = Some(FitDiagnostics {
                        iterations: d.get("iterations").and_then(Value::as_u64).unwrap_or(0)
                            as usize,
                        converged: d.get("converged").and_then(Value::as_bool).unwrap_or(false),
                        restarts,
                        at_bound: d
                            .get("at_bound")
                            .and_then(Value::as_array)
                            .map(|a| {
                                a.iter()
                                    .filter_map(|x| x.as_str().map(str::to_string))
                                    .collect()
                            })
                            .unwrap_or_default(),
                    });
                }
                other => {
                    return Err(CliError::input(format!(
                        "unknown field `{other}` in parameter file"
                    )))
                }
            }
        }
        Ok(doc)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn check_model(&self, model: &str) -> CliResult<()> {
        match &self.model {
            Some(m) if m != model && !(m == "kotz-gamma" && model == "kotz-gamma-2d") => Err(
                CliError::input(format!("parameter file is for model `{m}`, not `{model}`")),
            ),
            _ => Ok(()),
        }
    }
}

// ---------------------------------------------------------------------------
// CSV

/// Reads a `u,v` CSV of positive decimals.
pub fn read_paired_csv(path: &Path) -> CliResult<SampleMatrix> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    parse_paired_csv(&text)
}

pub fn parse_paired_csv(text: &str) -> CliResult<SampleMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::input(format!("line 1: {e}")))?
        .clone();
    if header.len() != 2 || &header[0] != "u" || &header[1] != "v" {
        return Err(CliError::input(format!(
            "line 1: header must be `u,v`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut u = Vec::new();
    let mut v = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| {
            let line = e.position().map_or(row + 1, |p| p.line() as usize);
            CliError::input(format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(CliError::input(format!(
                "line {line} (row {row}): expected 2 fields, got {}",
                record.len()
            )));
        }
        for (c, col) in [&mut u, &mut v].into_iter().enumerate() {
            let field = &record[c];
            let x: f64 = field.parse().map_err(|_| {
                CliError::input(format!(
                    "line {line} (row {row}): `{field}` is not a number"
                ))
            })?;
            if !x.is_finite() || !(x > 0.0) {
                return Err(CliError::input(format!(
                    "line {line} (row {row}): value {field} in column {} must be positive and finite",
                    ["u", "v"][c]
                )));
            }
            col.push(x);
        }
    }
    if u.len() < 3 {
        return Err(CliError::input(format!(
            "need at least 3 data rows, got {}",
            u.len()
        )));
    }
    Ok(SampleMatrix::from_columns(&[u, v])?)
}

pub fn sample_csv(names: &[String], sample: &SampleMatrix) -> String {
    let mut s = names.join(",");
    s.push('\n');
    for r in 0..sample.rows() {
        let row: Vec<String> = sample.row(r).iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------------------
// Models

/// Parameter map reader that remembers which keys were used.
struct Keys<'a> {
    map: &'a BTreeMap<String, f64>,
    used: BTreeSet<String>,
}

impl<'a> Keys<'a> {
    fn new(map: &'a BTreeMap<String, f64>) -> Self {
        Self {
            map,
            used: BTreeSet::new(),
        }
    }

    fn opt(&mut self, key: &str) -> Option<f64> {
        let v = self.map.get(key).copied();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn get(&mut self, key: &str) -> CliResult<f64> {
        self.opt(key)
            .ok_or_else(|| CliError::input(format!("missing parameter `{key}`")))
    }

    fn count(&mut self, key: &str) -> CliResult<usize> {
        let v = self.get(key)?;
        if v.fract() != 0.0 || !(v >= 1.0) || v > 1e6 {
            return Err(CliError::input(format!(
                "`{key}` must be a positive integer, got {v}"
            )));
        }
        Ok(v as usize)
    }

    /// `prefix.start`, `prefix.start+1`, … up to the first missing index.
    fn list(&mut self, prefix: &str, start: usize) -> Vec<f64> {
        let mut out = Vec::new();
        while let Some(v) = self.opt(&format!("{prefix}.{}", start + out.len())) {
            out.push(v);
        }
        out
    }

    fn list_required(&mut self, prefix: &str, start: usize) -> CliResult<Vec<f64>> {
        let v = self.list(prefix, start);
        if v.is_empty() {
            return Err(CliError::input(format!(
                "missing parameter `{prefix}.{start}`"
            )));
        }
        Ok(v)
    }

    fn counts(&mut self, prefix: &str) -> CliResult<Vec<usize>> {
        let n = self.list_required(prefix, 1)?.len();
        (1..=n)
            .map(|i| self.count(&format!("{prefix}.{i}")))
            .collect()
    }

    /// `kotz.{r,q,s}`, `pearson7.{r,q}`, `pearson2.q` or `bessel.{r,q}`;
    /// Gaussian when none is given.
    fn generator(&mut self) -> CliResult<GeneratorSpec> {
        let present: Vec<&str> = ["kotz", "pearson7", "pearson2", "bessel"]
            .into_iter()
            .filter(|g| self.map.keys().any(|k| k.starts_with(&format!("{g}."))))
            .collect();
        match present.as_slice() {
            [] => Ok(GeneratorSpec::GAUSSIAN),
            ["kotz"] => Ok(GeneratorSpec::Kotz {
                r: self.get("kotz.r")?,
                q: self.get("kotz.q")?,
                s: self.get("kotz.s")?,
            }),
            ["pearson7"] => Ok(GeneratorSpec::PearsonVII {
                r: self.get("pearson7.r")?,
                q: self.get("pearson7.q")?,
            }),
            ["pearson2"] => Ok(GeneratorSpec::PearsonII {
                q: self.get("pearson2.q")?,
            }),
            ["bessel"] => Ok(GeneratorSpec::Bessel {
                r: self.get("bessel.r")?,
                q: self.get("bessel.q")?,
            }),
            many => Err(CliError::input(format!(
                "more than one generator given: {}",
                many.join(", ")
            ))),
        }
    }

    fn finish(self) -> CliResult<()> {
        if let Some(k) = self.map.keys().find(|k| !self.used.contains(*k)) {
            return Err(CliError::input(format!("unknown parameter `{k}`")));
        }
        Ok(())
    }
}

/// Per-variable Kotz-gamma parameters (shape, scale) with a shared or
/// per-variable generator.
#[derive(Debug, Clone)]
enum KotzGamma {
    /// One joint law over the blocks (sigma1, alpha) and optionally (sigma2, beta).
    Dependent {
        blocks: Vec<(f64, f64)>,
        spec: GeneratorSpec,
    },
    /// Independent u and v laws.
    Independent {
        u: (f64, f64, GeneratorSpec),
        v: (f64, f64, GeneratorSpec),
    },
}

#[derive(Debug, Clone)]
enum Model {
    Family(Family),
    KotzGamma(KotzGamma),
}

fn kotz(r: f64, q: f64, s: f64) -> GeneratorSpec {
    GeneratorSpec::Kotz { r, q, s }
}

fn parse_kotz_gamma(map: &BTreeMap<String, f64>) -> CliResult<KotzGamma> {
    let mut k = Keys::new(map);
    let model = if map.keys().any(|key| key.starts_with("u.")) {
        let mut side = |p: &str| -> CliResult<(f64, f64, GeneratorSpec)> {
            Ok((
                k.get(&format!("{p}.shape"))?,
                k.get(&format!("{p}.sigma"))?,
                kotz(
                    k.get(&format!("{p}.r"))?,
                    k.get(&format!("{p}.q"))?,
                    k.get(&format!("{p}.s"))?,
                ),
            ))
        };
        let u = side("u")?;
        let v = side("v")?;
        KotzGamma::Independent { u, v }
    } else {
        let mut blocks = vec![(k.get("alpha")?, k.get("sigma1")?)];
        if map.contains_key("beta") || map.contains_key("sigma2") {
            blocks.push((k.get("beta")?, k.get("sigma2")?));
        }
        KotzGamma::Dependent {
            blocks,
            spec: kotz(k.get("r")?, k.get("q")?, k.get("s")?),
        }
    };
    k.finish()?;
    Ok(model)
}

/// Dependent parameters of a single (u, v) pair, for grids.
fn kotz_gamma_pair(map: &BTreeMap<String, f64>) -> CliResult<GenGammaParams> {
    let p = KotzGammaDepParams::from_map(map)?;
    let mut k = Keys::new(map);
    for key in KotzGammaDepParams::KEYS {
        k.get(key)?;
    }
    k.finish()?;
    Ok(GenGammaParams::new(
        ScaleShapeParams::new(vec![p.alpha, p.beta], vec![p.sigma1, p.sigma2])?,
        kotz(p.r, p.q, p.s),
    )?)
}

fn elliptical(k: &mut Keys) -> CliResult<EllipticalParams> {
    let dims = k.counts("n")?;
    let mut mus = Vec::new();
    let mut sigmas = Vec::new();
    for (i, &d) in dims.iter().enumerate() {
        let mut mu = vec![0.0; d];
        for (j, m) in mu.iter_mut().enumerate() {
            if let Some(v) = k.opt(&format!("mu.{}.{}", i + 1, j + 1)) {
                *m = v;
            }
        }
        mus.push(mu);
        let scale = k.opt(&format!("scale.{}", i + 1)).unwrap_or(1.0);
        sigmas.push(DMatrix::identity(d, d) * scale);
    }
    let spec = k.generator()?;
    Ok(EllipticalParams::new(
        MvEllipticalParams::new(Partition::new(dims)?, mus, sigmas)?,
        spec,
    )?)
}

fn t_params(k: &mut Keys) -> CliResult<MvTParams> {
    let dims = k.counts("n")?;
    let betas = k.list_required("beta", 1)?;
    if k.map.contains_key("alpha0") {
        Ok(MvTParams::extended(
            k.get("alpha0")?,
            Partition::new(dims)?,
            betas,
        )?)
    } else {
        let n0 = k.count("n0")?;
        Ok(MvTParams::new(Partition::with_aux(dims, n0)?, betas)?)
    }
}

impl Model {
    fn build(name: &str, map: &BTreeMap<String, f64>) -> CliResult<Self> {
        if name == "kotz-gamma" || name == "kotz-gamma-2d" {
            return Ok(Model::KotzGamma(parse_kotz_gamma(map)?));
        }
        let mut k = Keys::new(map);
        let family = match name {
            "mv-elliptical" => Family::MvElliptical(elliptical(&mut k)?),
            "mv-log-elliptical" => Family::MvLogElliptical(elliptical(&mut k)?),
            "mixed-ell-logell" => {
                let k1 = k.count("k1")?;
                let params = elliptical(&mut k)?;
                if k1 >= params.params.partition.k() {
                    return Err(CliError::input(
                        "`k1` must be smaller than the number of blocks",
                    ));
                }
                Family::MixedEllLogEll { k1, params }
            }
            "mv-t" => Family::MvT(t_params(&mut k)?),
            "mv-pearson2" => Family::MvPearsonII(t_params(&mut k)?),
            "gengamma-pearson7" | "gengamma-pearson2" => {
                let alpha0 = k.get("alpha0")?;
                let dims = k.counts("n")?;
                let sigmas = k.list_required("sigma", 0)?;
                let p =
                    GenGammaTParams::new(alpha0, Partition::new(dims)?, sigmas, k.generator()?)?;
                if name == "gengamma-pearson7" {
                    Family::GenGammaPearsonVII(p)
                } else {
                    Family::GenGammaPearsonII(p)
                }
            }
            "mv-gengamma" => {
                let shapes = k.list_required("alpha", 1)?;
                let scales = k.list_required("sigma", 1)?;
                Family::MvGenGamma(GenGammaParams::new(
                    ScaleShapeParams::new(shapes, scales)?,
                    k.generator()?,
                )?)
            }
            "mv-beta1" | "mv-beta2" => {
                let shape = ExtendedShape::new(k.get("alpha0")?, k.list_required("alpha", 1)?)?;
                let p = BetaParams::new(shape, k.list_required("beta", 1)?)?;
                if name == "mv-beta1" {
                    Family::MvBetaI(p)
                } else {
                    Family::MvBetaII(p)
                }
            }
            "gengamma-beta1" | "gengamma-beta2" => {
                let shape = ExtendedShape::new(k.get("alpha0")?, k.list_required("alpha", 1)?)?;
                let p =
                    GenGammaBetaParams::new(shape, k.list_required("sigma", 0)?, k.generator()?)?;
                if name == "gengamma-beta1" {
                    Family::GenGammaBetaI(p)
                } else {
                    Family::GenGammaBetaII(p)
                }
            }
            "gamma-loggamma" => {
                let gamma = (k.list("alpha", 1), k.list("sigma", 1));
                let loggamma = (k.list("rho", 1), k.list("delta", 1));
                Family::GammaLogGamma(GammaLogGammaParams::new(gamma, loggamma, k.generator()?)?)
            }
            other => {
                return Err(CliError::input(format!(
                    "unknown model `{other}`; expected one of {}",
                    MODEL_NAMES.join(", ")
                )))
            }
        };
        k.finish()?;
        Ok(Model::Family(family))
    }

    fn logpdf(&self, x: &[f64]) -> CliResult<f64> {
        match self {
            Model::Family(f) => Ok(f.logpdf(x)?),
            Model::KotzGamma(KotzGamma::Dependent { blocks, spec }) => {
                if x.len() != blocks.len() {
                    return Err(Error::DimensionMismatch {
                        expected: blocks.len(),
                        got: x.len(),
                    }
                    .into());
                }
                let (shapes, scales) = blocks.iter().copied().unzip();
                let f = Family::MvGenGamma(GenGammaParams::new(
                    ScaleShapeParams::new(shapes, scales)?,
                    *spec,
                )?);
                Ok(f.logpdf(x)?)
            }
            Model::KotzGamma(KotzGamma::Independent { u, v }) => {
                if x.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: x.len(),
                    }
                    .into());
                }
                let mut total = 0.0;
                for (&(shape, sigma, spec), &xi) in [u, v].into_iter().zip(x) {
                    let f = Family::MvGenGamma(GenGammaParams::new(
                        ScaleShapeParams::new(vec![shape], vec![sigma])?,
                        spec,
                    )?);
                    total += f.logpdf(&[xi])?;
                }
                Ok(total)
            }
        }
    }

    fn column_names(&self) -> Vec<String> {
        match self {
            Model::Family(f) => (1..=f.dim()).map(|i| format!("x{i}")).collect(),
            Model::KotzGamma(_) => vec!["u".into(), "v".into()],
        }
    }

    fn sample(&self, n: usize, seed: u64, mode: FitMode) -> CliResult<SampleMatrix> {
        match self {
            Model::Family(f) => Ok(FamilySampler::new(f.clone())?.sample(n, seed)),
            Model::KotzGamma(kg) => {
                let (u, v) = match kg {
                    KotzGamma::Dependent { blocks, spec } => {
                        if blocks.len() != 2 {
                            return Err(CliError::input(
                                "kotz-gamma sampling needs sigma2 and beta",
                            ));
                        }
                        let (a, s1) = blocks[0];
                        let (b, s2) = blocks[1];
                        ((a, s1, *spec), (b, s2, *spec))
                    }
                    KotzGamma::Independent { u, v } => (*u, *v),
                };
                if n == 0 {
                    return Ok(SampleMatrix::new(0, 2, Vec::new())?);
                }
                match mode {
                    FitMode::Dependent => {
                        if u.2 != v.2 {
                            return Err(CliError::input(
                                "dependent sampling needs one shared generator (r, q, s) for u and v",
                            ));
                        }
                        let mut shapes = vec![u.0; n];
                        shapes.extend(std::iter::repeat(v.0).take(n));
                        let mut scales = vec![u.1; n];
                        scales.extend(std::iter::repeat(v.1).take(n));
                        let p = GenGammaParams::new(ScaleShapeParams::new(shapes, scales)?, u.2)?;
                        let radius = RadiusSampler::new(*p.law())?;
                        let x = sample_mv_gengamma(&p, &radius, &mut RngState::new(seed));
                        Ok(SampleMatrix::from_columns(&[
                            x[..n].to_vec(),
                            x[n..].to_vec(),
                        ])?)
                    }
                    FitMode::Independent => {
                        let column = |(shape, sigma, spec): (f64, f64, GeneratorSpec),
                                      seed: u64|
                         -> CliResult<Vec<f64>> {
                            let f = Family::MvGenGamma(GenGammaParams::new(
                                ScaleShapeParams::new(vec![shape], vec![sigma])?,
                                spec,
                            )?);
                            Ok(FamilySampler::new(f)?.sample(n, seed).column(0))
                        };
                        let cu = column(u, seed)?;
                        let cv = column(v, seed.wrapping_add(COLUMN_SEED_OFFSET))?;
                        Ok(SampleMatrix::from_columns(&[cu, cv])?)
                    }
                }
            }
        }
    }
}

pub const MODEL_NAMES: [&str; 15] = [
    "kotz-gamma",
    "kotz-gamma-2d",
    "mv-elliptical",
    "mv-log-elliptical",
    "mixed-ell-logell",
    "mv-t",
    "mv-pearson2",
    "gengamma-pearson7",
    "gengamma-pearson2",
    "mv-gengamma",
    "mv-beta1",
    "mv-beta2",
    "gengamma-beta1",
    "gengamma-beta2",
    "gamma-loggamma",
];

/// K×K grid rows `u,v,pdf`, u varying slowest; K = 1 gives the corner.
pub fn grid_csv(p: &GenGammaParams, range: [f64; 4], steps: usize) -> CliResult<String> {
    if steps == 0 {
        return Err(CliError::input("steps must be >= 1"));
    }
    let family = Family::MvGenGamma(p.clone());
    let at = |lo: f64, hi: f64, i: usize| {
        if steps == 1 {
            lo
        } else {
            lo + (hi - lo) * i as f64 / (steps - 1) as f64
        }
    };
    let mut s = String::from("u,v,pdf\n");
    for i in 0..steps {
        let u = at(range[0], range[1], i);
        for j in 0..steps {
            let v = at(range[2], range[3], j);
            let pdf = family.logpdf(&[u, v])?.exp();
            let pdf = if pdf < f64::MIN_POSITIVE { 0.0 } else { pdf };
            let _ = writeln!(s, "{u:e},{v:e},{pdf:e}");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn significant_digits() {
        assert_eq!(
            format_significant(-1.6931471805599453, 12),
            "-1.69314718056"
        );
        assert_eq!(format_significant(f64::NEG_INFINITY, 12), "-inf");
        assert_eq!(format_significant(1234.5, 12), "1234.50000000");
        assert_eq!(format_significant(2.5e-9, 3), "2.50e-9");
    }

    #[test]
    fn document_round_trip_is_byte_identical() {
        let mut doc = ParamsDocument::new(
            "kotz-gamma",
            map(&[("alpha", 0.1), ("sigma1", 1.0 / 3.0), ("r", 1e-300)]),
        );
        doc.loglik = Some(-12.5);
        doc.mode = Some(FitMode::Dependent);
        doc.meta = Some(Meta {
            version: VERSION.into(),
            seed: Some(7),
            command: "fit".into(),
        });
        doc.diagnostics = Some(FitDiagnostics {
            iterations: 12,
            converged: true,
            restarts: vec![
                ("gaussian".into(), -12.5),
                ("q,s x0.8".into(), -13.0),
                ("q,s x1.2".into(), -13.5),
            ],
            at_bound: vec!["q".into()],
        });
        let text = doc.to_json();
        let back = ParamsDocument::parse(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_json(), text);
        assert!(serde_json::from_str::<Value>(&text).is_ok());
    }

    #[test]
    fn bare_map_documents() {
        let doc = ParamsDocument::parse(r#"{"alpha": 1, "sigma1": 1}"#).unwrap();
        assert_eq!(doc.params["alpha"], 1.0);
        assert!(ParamsDocument::parse(r#"{"alpha": "x"}"#).is_err());
        assert!(ParamsDocument::parse("[1]").is_err());
    }

    #[test]
    fn kotz_gamma_eval_gaussian_case() {
        let m = Model::build(
            "kotz-gamma",
            &map(&[
                ("alpha", 1.0),
                ("sigma1", 1.0),
                ("r", 0.5),
                ("q", 1.0),
                ("s", 1.0),
            ]),
        )
        .unwrap();
        let v = m.logpdf(&[2.0]).unwrap();
        assert!((v - (-1.0 - 2f64.ln())).abs() < 1e-13);
        assert_eq!(format_logpdf(v), "-1.69314718056");
    }

    #[test]
    fn beta1_outside_support_is_neg_inf() {
        let m = Model::build(
            "mv-beta1",
            &map(&[
                ("alpha0", 1.5),
                ("alpha.1", 1.0),
                ("alpha.2", 2.0),
                ("beta.1", 1.0),
                ("beta.2", 3.0),
            ]),
        )
        .unwrap();
        assert_eq!(format_logpdf(m.logpdf(&[0.3, 1.2]).unwrap()), "-inf");
    }

    #[test]
    fn missing_and_unknown_keys() {
        let e = Model::build(
            "kotz-gamma",
            &map(&[("alpha", 1.0), ("sigma1", 1.0), ("r", 0.5), ("q", 1.0)]),
        )
        .unwrap_err();
        assert!(e.message.contains("`s`"), "{}", e.message);
        let e = Model::build(
            "mv-gengamma",
            &map(&[("alpha.1", 1.0), ("sigma.1", 1.0), ("sigam.2", 1.0)]),
        )
        .unwrap_err();
        assert!(e.message.contains("sigam.2"));
        assert!(Model::build("nope", &BTreeMap::new()).is_err());
    }

    #[test]
    fn every_model_name_builds() {
        let cases: Vec<(&str, Vec<(&str, f64)>)> = vec![
            (
                "mv-elliptical",
                vec![
                    ("n.1", 1.0),
                    ("n.2", 2.0),
                    ("kotz.r", 1.0),
                    ("kotz.q", 2.0),
                    ("kotz.s", 1.5),
                ],
            ),
            ("mv-log-elliptical", vec![("n.1", 1.0), ("mu.1.1", 0.2)]),
            (
                "mixed-ell-logell",
                vec![("k1", 1.0), ("n.1", 1.0), ("n.2", 1.0), ("scale.2", 0.5)],
            ),
            ("mv-t", vec![("n0", 3.0), ("n.1", 1.0), ("beta.1", 1.0)]),
            (
                "mv-pearson2",
                vec![("alpha0", 1.5), ("n.1", 2.0), ("beta.1", 2.0)],
            ),
            (
                "gengamma-pearson7",
                vec![
                    ("alpha0", 1.5),
                    ("n.1", 1.0),
                    ("sigma.0", 1.0),
                    ("sigma.1", 0.5),
                ],
            ),
            (
                "gengamma-pearson2",
                vec![
                    ("alpha0", 1.5),
                    ("n.1", 1.0),
                    ("sigma.0", 1.0),
                    ("sigma.1", 0.5),
                ],
            ),
            (
                "mv-gengamma",
                vec![
                    ("alpha.1", 2.0),
                    ("sigma.1", 1.0),
                    ("bessel.r", 1.0),
                    ("bessel.q", 0.5),
                ],
            ),
            (
                "mv-beta2",
                vec![("alpha0", 2.0), ("alpha.1", 1.0), ("beta.1", 1.0)],
            ),
            (
                "gengamma-beta1",
                vec![
                    ("alpha0", 2.0),
                    ("alpha.1", 1.0),
                    ("sigma.0", 1.0),
                    ("sigma.1", 1.0),
                ],
            ),
            (
                "gengamma-beta2",
                vec![
                    ("alpha0", 2.0),
                    ("alpha.1", 1.0),
                    ("sigma.0", 1.0),
                    ("sigma.1", 1.0),
                ],
            ),
            (
                "gamma-loggamma",
                vec![
                    ("alpha.1", 2.0),
                    ("sigma.1", 1.0),
                    ("rho.1", 1.0),
                    ("delta.1", 1.0),
                    ("pearson7.r", 1.0),
                    ("pearson7.q", 5.0),
                ],
            ),
        ];
        for (name, pairs) in cases {
            let m = Model::build(name, &map(&pairs))
                .unwrap_or_else(|e| panic!("{name}: {}", e.message));
            let s = m.sample(5, 1, FitMode::Dependent).unwrap();
            assert_eq!(s.rows(), 5);
            assert!(m.logpdf(s.row(0)).unwrap().is_finite(), "{name}");
        }
        let two = map(&[("pearson2.q", 1.0), ("kotz.r", 1.0), ("n.1", 1.0)]);
        assert!(Model::build("mv-elliptical", &two).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = parse_paired_csv("u,v\n1,2\n3,4\n5,6\n").unwrap();
        assert_eq!(m.row(2), &[5.0, 6.0]);
        let e = parse_paired_csv("u,v\n1,2\n0,4\n5,6\n").unwrap_err();
        assert!(
            e.message.contains("row 2") && e.message.contains("line 3"),
            "{}",
            e.message
        );
        assert!(parse_paired_csv("a,b\n1,2\n")
            .unwrap_err()
            .message
            .contains("header"));
        assert!(parse_paired_csv("u,v\n1,x\n1,2\n1,2\n")
            .unwrap_err()
            .message
            .contains("line 2"));
        assert!(parse_paired_csv("u,v\n1,2\n")
            .unwrap_err()
            .message
            .contains("at least 3"));
    }

    #[test]
    fn csv_write_read_round_trip() {
        let s = SampleMatrix::from_columns(&[vec![0.1, 1.0 / 3.0, 7e-12], vec![2.0, 1e10, 0.5]])
            .unwrap();
        let text = sample_csv(&["u".into(), "v".into()], &s);
        assert_eq!(parse_paired_csv(&text).unwrap(), s);
    }

    #[test]
    fn grid_shapes() {
        let p = kotz_gamma_pair(&map(&[
            ("sigma1", 1.0),
            ("alpha", 2.0),
            ("sigma2", 1.0),
            ("beta", 2.0),
            ("r", 0.4),
            ("q", 1.5),
            ("s", 1.1),
        ]))
        .unwrap();
        let one = grid_csv(&p, [0.5, 3.0, 1.0, 4.0], 1).unwrap();
        assert_eq!(one.lines().count(), 2);
        assert!(one.lines().nth(1).unwrap().starts_with("5e-1,1e0,"));
        let g = grid_csv(&p, [0.1, 5.0, 0.1, 5.0], 7).unwrap();
        let rows: Vec<Vec<f64>> = g
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        assert_eq!(rows.len(), 49);
        for i in 0..7 {
            for j in 0..7 {
                let a = rows[i * 7 + j][2];
                let b = rows[j * 7 + i][2];
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
        assert!(parse_range("1,0,0,1").is_err());
        assert!(parse_range("0,1,0").is_err());
    }
}
