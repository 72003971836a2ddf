use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use carnot_coarea::coarea::{verify_coarea, CoareaConfig, CoareaReport, Region, Verdict};
use carnot_coarea::group::file::{dump_schema, load_schema};
use carnot_coarea::group::builtin_schema;
use carnot_coarea::maps::BuiltinMap;
use carnot_coarea::measure::{CoordBox, QuadratureConfig};
use carnot_coarea::projection::{fubini_check, FubiniReport, Integrand};
use carnot_coarea::{Error, Group};

mod selftest;

/// Exit codes.
const OK: u8 = 0;
const USAGE: u8 = 1;
const VIOLATION: u8 = 2;
const RUNTIME: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "carnot", version, about = "Coarea verification runs on Carnot groups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate or dump group schemas.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Run the group invariant suite on random samples.
    Selftest(SelftestArgs),
    /// Compare both sides of the Fubini decomposition on a box.
    Fubini(FubiniArgs),
    /// Coarea inequality runs.
    #[command(subcommand)]
    Coarea(CoareaCommand),
}

#[derive(Subcommand, Debug)]
enum SchemaCommand {
    /// Check every schema invariant; the first violation is reported.
    Validate { path: PathBuf },
    /// Print a builtin schema in file format.
    Dump {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Builtin name or path to a schema file.
    #[arg(long)]
    group: String,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest defect accepted before exiting with status 2.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FubiniArgs {
    #[arg(long)]
    group: String,
    /// Horizontal direction, 1-based.
    #[arg(long)]
    j: usize,
    /// `one`, `square:k=<i>` or `halfspace:k=<i>,c=<v>`.
    #[arg(long, default_value = "one")]
    f: String,
    /// Bounds `a1,b1,a2,b2,...`.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    bx: String,
    #[arg(long, default_value_t = 128)]
    grid: usize,
    /// Relative gap above which the run exits with status 2.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum CoareaCommand {
    /// Estimate both sides of the coarea inequality and classify.
    Run(CoareaArgs),
}

#[derive(Args, Debug, Serialize)]
struct CoareaArgs {
    #[arg(long)]
    group: String,
    /// Builtin map `name:key=value,...`.
    #[arg(long)]
    map: String,
    /// Horizontal direction, 1-based.
    #[arg(long)]
    j: usize,
    /// Bounds `a1,b1,a2,b2,...`.
    #[arg(long = "box")]
    #[serde(rename = "box")]
    bx: String,
    /// Left translation `g1,g2,...` applied to the box.
    #[arg(long)]
    translate: Option<String>,
    #[arg(long = "p-grid", default_value_t = 64)]
    p_grid: usize,
    /// `grid:<n>` or `mc:<n>`.
    #[arg(long, default_value = "grid:32")]
    quad: String,
    #[arg(long)]
    seed: u64,
    #[arg(long = "scan-cells")]
    scan_cells: Option<usize>,
    #[arg(long = "tau-seed")]
    tau_seed: Option<f64>,
    #[arg(long = "tau-track")]
    tau_track: Option<f64>,
    #[arg(long = "tau-adj")]
    tau_adj: Option<f64>,
    #[arg(long = "tau-verdict")]
    tau_verdict: Option<f64>,
    #[arg(long = "tau-eq")]
    tau_eq: Option<f64>,
    #[arg(long = "failure-budget")]
    failure_budget: Option<f64>,
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Per-p rows `p_1..p_{N-1},length` for plotting.
    #[arg(long)]
    #[serde(skip)]
    csv: Option<PathBuf>,
    /// Scales the right-hand side; only for exercising the violation path.
    #[arg(long = "rhs-scale", hide = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rhs_scale: Option<f64>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. }
            | Error::Schema { .. }
            | Error::Parse(_)
            | Error::UnknownSchema(_)
            | Error::NonPositiveDilation(_)
            | Error::NotHorizontal { .. }
            | Error::InvalidRegion(_)
            | Error::Config(_)
            | Error::UnknownMap(_)
            | Error::MissingLipschitz(_) => USAGE,
            _ => RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: USAGE, message: message.into() }
}

/// A builtin name, or a schema file if the argument names an existing path.
fn resolve_group(spec: &str) -> Result<Group, Failure> {
    let schema = if Path::new(spec).is_file() { load_schema(spec)? } else { builtin_schema(spec)? };
    Ok(Group::new(schema)?)
}

fn horizontal_index(group: &Group, j: usize) -> Result<usize, Failure> {
    if j == 0 || j > group.horizontal_dim() {
        return Err(usage(format!("--j must be in 1..={} (1-based), got {j}", group.horizontal_dim())));
    }
    Ok(j - 1)
}

fn parse_coords(text: &str, what: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| usage(format!("{what} `{text}`: {e}"))))
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::from(Error::Io(e))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).map_err(|e| Failure::from(Error::Io(e)))
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn schema_validate(path: &Path) -> Result<u8, Failure> {
    let schema = load_schema(path)?;
    schema.validate()?;
    println!(
        "ok: {} (N = {}, step {}, homogeneous dimension {})",
        schema.name,
        schema.dim(),
        schema.step(),
        schema.homogeneous_dim()
    );
    Ok(OK)
}

fn schema_dump(name: &str, out: Option<&Path>) -> Result<u8, Failure> {
    let schema = builtin_schema(name)?;
    emit(&dump_schema(&schema), out)?;
    Ok(OK)
}

#[derive(Serialize)]
struct FubiniOutput<'a> {
    schema: &'a str,
    run: &'a FubiniArgs,
    #[serde(flatten)]
    report: FubiniReport,
    agree: bool,
}

fn fubini(args: &FubiniArgs) -> Result<u8, Failure> {
    let group = resolve_group(&args.group)?;
    let j = horizontal_index(&group, args.j)?;
    let f = Integrand::parse(&args.f)?;
    let bx = CoordBox::parse(&args.bx)?;
    group.check_dim(bx.dim())?;
    if args.grid < 2 {
        return Err(usage(format!("--grid must be at least 2, got {}", args.grid)));
    }
    let report = fubini_check(&group, &f, &bx, j, args.grid)?;
    let agree = report.gap <= args.tol;
    emit(&to_json(&FubiniOutput { schema: group.name(), run: args, report, agree }), args.out.as_deref())?;
    Ok(if agree { OK } else { VIOLATION })
}

#[derive(Serialize)]
struct CoareaOutput<'a> {
    run: &'a CoareaArgs,
    #[serde(flatten)]
    report: &'a CoareaReport,
}

fn coarea_config(args: &CoareaArgs) -> Result<CoareaConfig, Failure> {
    let mut cfg = CoareaConfig {
        p_grid: args.p_grid,
        scan_cells: args.scan_cells,
        quadrature: QuadratureConfig::parse(&args.quad, args.seed)?,
        seed: args.seed,
        ..CoareaConfig::default()
    };
    let t = &mut cfg.tolerances;
    for (slot, value) in [
        (&mut t.tau_seed, args.tau_seed),
        (&mut t.tau_track, args.tau_track),
        (&mut t.tau_adj, args.tau_adj),
        (&mut t.tau_verdict, args.tau_verdict),
        (&mut t.tau_eq, args.tau_eq),
    ] {
        if let Some(v) = value {
            *slot = v;
        }
    }
    if let Some(b) = args.failure_budget {
        cfg.failure_budget = b;
    }
    if let Some(s) = args.rhs_scale {
        cfg.rhs_scale = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn csv_rows(report: &CoareaReport, group: &Group) -> String {
    let j = report.j - 1;
    let mut out = String::new();
    let names: Vec<String> = (0..group.dim()).filter(|&k| k != j).map(|k| format!("p{}", k + 1)).collect();
    out.push_str(&names.join(","));
    out.push_str(",length\n");
    for r in &report.diagnostics {
        let cells: Vec<String> = r.p.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&format!("{},{:e}\n", cells.join(","), r.length));
    }
    out
}

fn coarea_run(args: &CoareaArgs) -> Result<u8, Failure> {
    let group = resolve_group(&args.group)?;
    let j = horizontal_index(&group, args.j)?;
    let phi = BuiltinMap::parse(&group, &args.map)?;
    let bx = CoordBox::parse(&args.bx)?;
    let region = match &args.translate {
        Some(t) => Region::translated(&group, bx, parse_coords(t, "translation")?)?,
        None => Region::new(&group, bx)?,
    };
    let cfg = coarea_config(args)?;
    let report = verify_coarea(&group, &phi, &region, j, &cfg)?;
    emit(&to_json(&CoareaOutput { run: args, report: &report }), args.out.as_deref())?;
    if let Some(path) = &args.csv {
        emit(&csv_rows(&report, &group), Some(path))?;
    }
    eprintln!(
        "{}: lhs {:.6} ± {:.1e}, rhs {:.6} ± {:.1e}",
        report.verdict.as_str(),
        report.lhs.value,
        report.lhs.err,
        report.rhs.value,
        report.rhs.err
    );
    Ok(if report.verdict == Verdict::Violation { VIOLATION } else { OK })
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Schema(SchemaCommand::Validate { path }) => schema_validate(&path),
        Command::Schema(SchemaCommand::Dump { name, out }) => schema_dump(&name, out.as_deref()),
        Command::Selftest(args) => {
            let group = resolve_group(&args.group)?;
            let report = selftest::run(&group, args.samples, args.seed)?;
            emit(&to_json(&report), args.out.as_deref())?;
            Ok(if report.max_defect() <= args.tol { OK } else { VIOLATION })
        }
        Command::Fubini(args) => fubini(&args),
        Command::Coarea(CoareaCommand::Run(args)) => coarea_run(&args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
