//! The `confinv` command line.
//!
//! Exit codes: 0 success, 1 failed check, 2 non-generic metric, 3 bad input
//! or evaluation domain error.

mod render;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use confinv::catalog::{self, CatalogError};
use confinv::conformal::{verify_invariance, ConformalError, InvariantReport, Points};
use confinv::expr::{parse, Bindings, Sampler};
use confinv::geometry::{MetricSpec, Scalar};

pub use render::{fmt_num, ReportJson, SampleJson, ScalarSet, TableEntry, TableJson, TableRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NON_GENERIC: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "confinv",
    version,
    about = "Curvature and conformal invariants of metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print curvature scalars of a metric and their values at sample points.
    Invariants(InvariantsArgs),
    /// Compare computed R, K and S of the table metrics with their closed forms.
    Table(TableArgs),
    /// Verify the rescaling laws for g -> factor * g.
    Check(CheckArgs),
    /// Write an invariant report as JSON.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
struct Source {
    /// Built-in metric name.
    #[arg(long, conflicts_with = "file", required_unless_present = "file")]
    builtin: Option<String>,
    /// Metric file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Parameter overrides, e.g. `k=1,M=2`.
    #[arg(long, value_parser = parse_bindings)]
    param: Option<Bindings>,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Number of sample points.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    /// Seed for sample points.
    #[arg(long, default_value_t = Sampler::DEFAULT_SEED)]
    seed: u64,
    /// Evaluate at this point instead of sampling, e.g. `r=4,theta=1`.
    #[arg(long, value_parser = parse_bindings)]
    at: Option<Bindings>,
}

#[derive(Args, Debug)]
struct InvariantsArgs {
    #[command(flatten)]
    source: Source,
    /// Scalars to compute.
    #[arg(long, value_delimiter = ',', default_value = "R,K,H,J,S")]
    scalars: Vec<Scalar>,
    #[command(flatten)]
    sampling: Sampling,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, value_delimiter = ',', default_value = "R,K,H,J,S")]
    scalars: Vec<Scalar>,
    #[command(flatten)]
    sampling: Sampling,
    /// Output file; standard output if absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Points used for the value comparison.
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = Sampler::DEFAULT_SEED)]
    seed: u64,
    /// Relative tolerance for agreement.
    #[arg(long, default_value_t = 1e-7, value_parser = parse_tol)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    source: Source,
    /// Conformal factor, an expression positive on the sample domain.
    #[arg(long)]
    factor: String,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,
    #[arg(long, default_value_t = 1e-6, value_parser = parse_tol)]
    tol: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Format {
    Text,
    Json,
}

fn parse_bindings(s: &str) -> Result<Bindings, String> {
    let mut b = Bindings::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("expected NAME=VALUE, got `{part}`"))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", v.trim()))?;
        if !v.is_finite() {
            return Err(format!("`{part}` is not finite"));
        }
        b.insert(k.trim(), v);
    }
    Ok(b)
}

fn parse_tol(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("tolerance must be a positive number, got `{s}`")),
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(m: impl ToString) -> Failure {
        Failure {
            code: EXIT_INPUT,
            message: m.to_string(),
        }
    }
}

impl From<CatalogError> for Failure {
    fn from(e: CatalogError) -> Self {
        Failure::input(e)
    }
}

impl From<ConformalError> for Failure {
    fn from(e: ConformalError) -> Self {
        match e {
            ConformalError::NonGeneric(_) => Failure {
                code: EXIT_NON_GENERIC,
                message: e.to_string(),
            },
            e => Failure::input(e),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e)
    }
}

/// Runs the command line given by `args` and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_INPUT
                }
            };
        }
    };
    let result = match cli.command {
        Command::Invariants(a) => cmd_invariants(a, out),
        Command::Table(a) => cmd_table(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Export(a) => cmd_export(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load(source: &Source) -> Result<MetricSpec, Failure> {
    let spec = match (&source.builtin, &source.file) {
        (Some(name), _) => catalog::builtin(name)?,
        (None, Some(path)) => catalog::load_metric(path)?,
        (None, None) => return Err(Failure::input("one of --builtin or --file is required")),
    };
    Ok(match &source.param {
        Some(p) => {
            for (k, _) in p.iter() {
                if !spec.params.iter().any(|x| x == k) {
                    return Err(Failure::input(format!("metric has no parameter `{k}`")));
                }
            }
            spec.with_params(&p.iter().map(|(k, v)| (k.to_string(), v)).collect())
        }
        None => spec,
    })
}

fn build_report(
    spec: &MetricSpec,
    scalars: &[Scalar],
    sampling: &Sampling,
) -> Result<InvariantReport, Failure> {
    let points = match &sampling.at {
        Some(b) => {
            let mut b = b.clone();
            for (k, v) in &spec.defaults {
                if b.get(k).is_none() {
                    b.insert(k, *v);
                }
            }
            Points::Given(vec![b])
        }
        None => Points::Sample(sampling.points as usize),
    };
    Ok(InvariantReport::build(
        spec,
        scalars,
        points,
        sampling.seed,
    )?)
}

fn non_generic_requested(report: &InvariantReport) -> Option<String> {
    let conformal = report
        .scalars
        .keys()
        .any(|s| matches!(s, Scalar::H | Scalar::J | Scalar::S));
    match &report.genericity {
        Some(g) if conformal && !g.is_generic() => Some(format!("non-generic: {g}")),
        _ => None,
    }
}

fn cmd_invariants(a: InvariantsArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load(&a.source)?;
    let report = build_report(&spec, &a.scalars, &a.sampling)?;
    match a.format {
        Format::Text => render::report_text(&report, out)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &ReportJson::from_report(&report))
                .map_err(Failure::input)?;
            writeln!(out)?;
        }
    }
    Ok(match non_generic_requested(&report) {
        Some(msg) => {
            writeln!(out, "{msg}")?;
            EXIT_NON_GENERIC
        }
        None => EXIT_OK,
    })
}

fn cmd_export(a: ExportArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load(&a.source)?;
    let report = build_report(&spec, &a.scalars, &a.sampling)?;
    let json =
        serde_json::to_string_pretty(&ReportJson::from_report(&report)).map_err(Failure::input)?;
    match &a.output {
        Some(path) => std::fs::write(path, json + "\n")
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => writeln!(out, "{json}")?,
    }
    Ok(EXIT_OK)
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let spec = load(&a.source)?;
    let alpha = parse(&a.factor).map_err(|e| Failure::input(format!("bad factor: {e}")))?;
    let symbols: Vec<&String> = spec.coords.iter().chain(&spec.params).collect();
    if let Some(s) = alpha.free_symbols().iter().find(|s| !symbols.contains(s)) {
        return Err(Failure::input(format!("factor uses unknown symbol `{s}`")));
    }
    let report = verify_invariance(&spec, &alpha, a.points as usize, a.tol)?;
    writeln!(out, "metric: {}", report.metric)?;
    writeln!(out, "factor: {}", report.factor)?;
    writeln!(out, "points: {}", report.points.len())?;
    writeln!(out, "tolerance: {:e}", report.tol)?;
    for c in &report.checks {
        writeln!(
            out,
            "{:<3} max deviation {:.3e}  {}",
            c.name,
            c.max_deviation,
            if c.passed { "pass" } else { "FAIL" }
        )?;
    }
    let ok = report.passed();
    writeln!(out, "result: {}", if ok { "pass" } else { "fail" })?;
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_table(a: TableArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let rows: Vec<Result<TableRow, Failure>> = std::thread::scope(|s| {
        let handles: Vec<_> = catalog::TABLE
            .iter()
            .map(|name| s.spawn(move || table_row(name, a.points as usize, a.seed, a.tol)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("table worker panicked"))
            .collect()
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    match a.format {
        Format::Text => render::table_text(&rows, out)?,
        Format::Json => {
            let doc = TableJson {
                seed: a.seed,
                points: a.points as usize,
                tolerance: fmt_num(a.tol),
                rows,
            };
            serde_json::to_writer_pretty(&mut *out, &doc).map_err(Failure::input)?;
            writeln!(out)?;
        }
    }
    Ok(EXIT_OK)
}

/// Computes one table row: R, K and S against their closed forms.
pub fn table_row(name: &str, points: usize, seed: u64, tol: f64) -> Result<TableRow, Failure> {
    let spec = catalog::builtin(name)?;
    let reference = catalog::reference_row(name)
        .ok_or_else(|| Failure::input(format!("no reference row for {name}")))?;
    let mut pipe = confinv::conformal::Conformal::with_seed(&spec, seed)?;
    let genericity = pipe.genericity()?;
    let pairs = [
        (Scalar::R, reference.r),
        (Scalar::K, reference.k),
        (Scalar::S, reference.s),
    ];
    let mut computed = Vec::new();
    for (s, r) in pairs {
        computed.push((s, pipe.scalar(s)?, r));
    }
    let exprs: Vec<_> = computed
        .iter()
        .flat_map(|(_, c, r)| [c.clone(), r.clone()])
        .collect();
    let pts = spec
        .sampler(seed)
        .points_for(&exprs, points)
        .map_err(Failure::input)?;
    let prog = confinv::expr::Program::compile(&exprs);
    let mut dev = vec![0.0f64; computed.len()];
    let mut first = Vec::new();
    for (k, b) in pts.iter().enumerate() {
        let v = prog.eval(b).map_err(Failure::input)?;
        for (i, d) in dev.iter_mut().enumerate() {
            *d = d.max(confinv::conformal::relative_deviation(
                v[2 * i],
                v[2 * i + 1],
            ));
        }
        if k == 0 {
            first = v;
        }
    }
    let point: BTreeMap<String, String> = pts[0]
        .iter()
        .map(|(k, v)| (k.to_string(), fmt_num(v)))
        .collect();
    let entries = computed
        .iter()
        .enumerate()
        .map(|(i, (s, c, r))| TableEntry {
            scalar: s.name().to_string(),
            computed: c.to_string(),
            reference: r.to_string(),
            value: fmt_num(first[2 * i]),
            reference_value: fmt_num(first[2 * i + 1]),
            max_deviation: fmt_num(dev[i]),
            agree: dev[i] <= tol,
        })
        .collect();
    Ok(TableRow {
        name: name.to_string(),
        genericity: genericity.to_string(),
        point,
        entries,
    })
}
