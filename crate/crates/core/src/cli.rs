//! Command-line front end.
//!
//! Exit codes: 0 success (pair / condition holds), 1 not a pair / condition
//! fails, 2 inconclusive pair check, 64 usage error, 70 computation failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::besselpair::{is_bessel_pair, Verdict, DEFAULT_TOL};
use crate::conditions::{check_integral, check_pointwise, ConditionId, DEFAULT_SAMPLES};
use crate::error::Error;
use crate::grid::{build_grid, GridSpec, MeshKind, RadialDomain, DEFAULT_NODES};
use crate::report::{spectral_columns, spectral_csv, to_json};
use crate::spectrum::{
    best_constant, inequality_margin, mellin_constant, mode_scan, symmetry_verdict, t51_equivalence_check, Estimate,
    Problem, ScanKind, Setup, SpectralReport, SymmetryVerdict, DEFAULT_KMAX,
};
use crate::weightlang::{catalog, catalog_about, catalog_names, parse, ParamBinding, WeightExpr};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_SOFTWARE: i32 = 70;

const EXIT_HELP: &str = "\
Exit codes:
  0   success; pair certified; condition holds
  1   not a pair; condition fails
  2   pair check inconclusive
  64  usage error (bad flags, weights, grid or catalog parameters)
  70  computation failure";

#[derive(Parser, Debug)]
#[command(name = "hrlab", version, about = "Numerical lab for weighted Hardy, Hardy-Rellich and Rellich inequalities", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify (V, W) as a Bessel pair in dimension d.
    CheckPair(CheckPairArgs),
    /// Check one of the conditions Con, Con2, Con3, ConM, ConM2.
    CheckCond(CheckCondArgs),
    /// Best constant (or margin) of one mode.
    BestConstant(BestConstantArgs),
    /// Best constants (or margins) over the modes 0..=kmax.
    ModeScan(ScanArgs),
    /// Radial optimality verdict from a mode scan (text by default).
    Symmetry(ScanArgs),
    /// List the catalog or show one entry.
    Catalog(CatalogArgs),
    /// Closed-form constant for V = 1 and power weights.
    Oracle(OracleArgs),
    /// Radial Hardy-Rellich constant in dimension N against Hardy in N+2.
    EquivCheck(EquivArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Kind {
    Log,
    Uniform,
}

#[derive(Args, Debug)]
struct Common {
    /// Output format [default: json; text for symmetry]
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the output to a file instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Number of grid nodes.
    #[arg(long = "grid-m", default_value_t = DEFAULT_NODES)]
    grid_m: usize,
    /// Left end of the grid [default: domain dependent].
    #[arg(long = "grid-rmin")]
    grid_rmin: Option<f64>,
    /// Right end of the grid [default: R, or 1e4 on the whole space].
    #[arg(long = "grid-rmax")]
    grid_rmax: Option<f64>,
    #[arg(long = "grid-kind", value_enum, default_value = "log")]
    grid_kind: Kind,
}

impl Common {
    fn spec(&self) -> GridSpec {
        GridSpec {
            nodes: self.grid_m,
            r_min: self.grid_rmin,
            r_max: self.grid_rmax,
            kind: match self.grid_kind {
                Kind::Log => MeshKind::Log,
                Kind::Uniform => MeshKind::Uniform,
            },
        }
    }
}

#[derive(Args, Debug)]
struct Params {
    /// Ball radius; the whole space if omitted.
    #[arg(long = "R")]
    radius: Option<f64>,
    /// Value of the weight parameter b.
    #[arg(long)]
    b: Option<f64>,
    /// Value of the weight parameter c.
    #[arg(long)]
    c: Option<f64>,
}

impl Params {
    fn binding(&self, n: u32) -> ParamBinding {
        let mut b = ParamBinding::with_dim(n);
        if let Some(r) = self.radius {
            b = b.radius(r);
        }
        if let Some(x) = self.b {
            b = b.b(x);
        }
        if let Some(x) = self.c {
            b = b.c(x);
        }
        b
    }

    fn radius(&self) -> f64 {
        self.radius.unwrap_or(f64::INFINITY)
    }
}

#[derive(Args, Debug)]
struct CheckPairArgs {
    /// Dimension of the pair equation [default: from the catalog entry].
    #[arg(long)]
    dim: Option<u32>,
    #[arg(long = "V")]
    v: Option<String>,
    #[arg(long = "W")]
    w: Option<String>,
    /// Take V, W and the dimension from a catalog entry.
    #[arg(long, conflicts_with_all = ["v", "w", "dim"])]
    catalog: Option<String>,
    /// Value of N in the weights [default: dim].
    #[arg(long = "N")]
    n: Option<u32>,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[command(flatten)]
    params: Params,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CheckCondArgs {
    /// con, con2, con3, conm or conm2.
    #[arg(long)]
    id: String,
    #[arg(long = "V")]
    v: String,
    #[arg(long = "W")]
    w: Option<String>,
    #[arg(long = "N")]
    n: u32,
    /// Sample count for the pointwise conditions.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[command(flatten)]
    params: Params,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    /// hardy, hardy-rellich or rellich.
    #[arg(long)]
    problem: Problem,
    #[arg(long = "N")]
    n: u32,
    #[arg(long = "V", default_value = "1")]
    v: String,
    /// [default: 1/r^2, or 1/r^4 for rellich]
    #[arg(long = "W")]
    w: Option<String>,
    /// Smallest eigenvalue of A - B against the mass instead of the ratio.
    #[arg(long)]
    margin: bool,
    #[command(flatten)]
    params: Params,
}

#[derive(Args, Debug)]
struct BestConstantArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = DEFAULT_KMAX)]
    kmax: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CatalogArgs {
    /// List the entries.
    #[arg(long, conflicts_with = "name")]
    list: bool,
    #[arg(long, required_unless_present = "list")]
    name: Option<String>,
    #[arg(long = "N", required_unless_present = "list")]
    n: Option<u32>,
    #[command(flatten)]
    params: Params,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    problem: Problem,
    #[arg(long = "N")]
    n: u32,
    #[arg(long, default_value_t = 0)]
    k: u32,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[arg(long = "W")]
    w: String,
    #[arg(long = "N")]
    n: u32,
    #[arg(long = "R")]
    radius: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Catalog(_) | Error::Grid(_) => Failure::Usage(e.to_string()),
            Error::Eval(crate::error::EvalError::Unbound(_)) => Failure::Usage(e.to_string()),
            e => Failure::Compute(e.to_string()),
        }
    }
}

type Outcome = std::result::Result<(String, i32), Failure>;

fn weight(text: &str, flag: &str, binding: &ParamBinding) -> Result<WeightExpr, Failure> {
    let e = parse(text).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))?;
    e.check_bound(binding).map_err(|e| Failure::Usage(format!("--{flag}: {e}")))?;
    Ok(e)
}

fn domain(n: u32, radius: f64) -> Result<RadialDomain, Failure> {
    RadialDomain::new(n, radius).map_err(|e| Failure::Usage(e.to_string()))
}

fn validate(common: &Common) -> Result<(), Failure> {
    let s = common.spec();
    if s.nodes < crate::grid::MIN_NODES {
        return Err(Failure::Usage(format!("--grid-m must be at least {}", crate::grid::MIN_NODES)));
    }
    for (flag, x) in [("grid-rmin", s.r_min), ("grid-rmax", s.r_max)] {
        if x.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
            return Err(Failure::Usage(format!("--{flag} must be finite and positive")));
        }
    }
    Ok(())
}

/// Dotted `key: value` lines for the scalar leaves; arrays are omitted.
fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(o) => {
            for (k, x) in o {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(_) => {}
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn leaves(json: &str) -> Vec<(String, String)> {
    let v: Value = serde_json::from_str(json).expect("own output is json");
    let mut out = Vec::new();
    flatten("", &v, &mut out);
    out
}

fn render<T: Serialize>(kind: &str, payload: &T, format: Format) -> Result<String, Failure> {
    let json = to_json(kind, payload)?;
    Ok(match format {
        Format::Json => json,
        Format::Text => leaves(&json).into_iter().map(|(k, v)| format!("{k}: {v}\n")).collect(),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Failure::Compute(format!("csv output failed: {e}"));
            w.write_record(["key", "value"]).map_err(io)?;
            for (k, v) in leaves(&json) {
                w.write_record([k, v]).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| Failure::Compute(format!("csv output failed: {e}")))?;
            String::from_utf8(bytes).expect("csv is utf-8")
        }
    })
}

fn check_pair(a: &CheckPairArgs) -> Outcome {
    let (v, w, d, binding, dom) = if let Some(name) = &a.catalog {
        let n = a.n.ok_or_else(|| Failure::Usage("--catalog needs --N".into()))?;
        let p = catalog(name, &a.params.binding(n)).map_err(Error::from)?;
        (p.v, p.w, p.dim, p.binding, p.domain)
    } else {
        let (Some(v), Some(w), Some(d)) = (&a.v, &a.w, a.dim) else {
            return Err(Failure::Usage("check-pair needs --V, --W and --dim, or --catalog".into()));
        };
        let binding = a.params.binding(a.n.unwrap_or(d));
        (weight(v, "V", &binding)?, weight(w, "W", &binding)?, d, binding, domain(d, a.params.radius())?)
    };
    if !(a.tol >= 0.0) {
        return Err(Failure::Usage("--tol must be non-negative".into()));
    }
    let grid = build_grid(RadialDomain { dim: d, ..dom }, &a.common.spec()).map_err(Error::from)?;
    let cert = is_bessel_pair(&v, &w, d, &binding, &grid, a.tol)?;
    let code = match cert.verdict {
        Verdict::Pair => EXIT_OK,
        Verdict::NotPair => EXIT_FAIL,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    };
    Ok((render("bessel_certificate", &cert, a.common.format.unwrap_or(Format::Json))?, code))
}

fn check_cond(a: &CheckCondArgs) -> Outcome {
    let id: ConditionId = a.id.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let binding = a.params.binding(a.n);
    let v = weight(&a.v, "V", &binding)?;
    let w = a.w.as_deref().map(|t| weight(t, "W", &binding)).transpose()?;
    if id.needs_w() && w.is_none() {
        return Err(Failure::Usage(format!("{id} needs --W")));
    }
    let dom = domain(a.n, a.params.radius())?;
    let rep = if id.is_pointwise() {
        if a.samples < 2 {
            return Err(Failure::Usage("--samples must be at least 2".into()));
        }
        check_pointwise(id, &v, w.as_ref(), &binding, dom, &a.common.spec(), a.samples)?
    } else {
        let grid = build_grid(dom, &a.common.spec()).map_err(Error::from)?;
        check_integral(id, &v, w.as_ref().expect("checked"), &binding, &grid)?
    };
    let code = if rep.holds { EXIT_OK } else { EXIT_FAIL };
    Ok((render("condition_report", &rep, a.common.format.unwrap_or(Format::Json))?, code))
}

fn setup(p: &ProblemArgs, common: &Common) -> Result<Setup, Failure> {
    let binding = p.params.binding(p.n);
    Ok(Setup {
        problem: p.problem,
        v: weight(&p.v, "V", &binding)?,
        w: weight(p.w.as_deref().unwrap_or(p.problem.default_w()), "W", &binding)?,
        binding,
        domain: domain(p.n, p.params.radius())?,
        grid: common.spec(),
    })
}

fn kind(p: &ProblemArgs) -> ScanKind {
    if p.margin {
        ScanKind::Margin
    } else {
        ScanKind::Constant
    }
}

#[derive(Serialize)]
struct ModeValue {
    problem: Problem,
    #[serde(rename = "N")]
    n: u32,
    k: u32,
    kind: ScanKind,
    v: String,
    w: String,
    #[serde(flatten)]
    estimate: Estimate,
}

fn best(a: &BestConstantArgs) -> Outcome {
    let s = setup(&a.problem, &a.common)?;
    let kind = kind(&a.problem);
    let estimate = match kind {
        ScanKind::Constant => best_constant(&s, a.k)?,
        ScanKind::Margin => inequality_margin(&s, a.k)?,
    };
    let out = ModeValue {
        problem: s.problem,
        n: a.problem.n,
        k: a.k,
        kind,
        v: s.v.to_string(),
        w: s.w.to_string(),
        estimate,
    };
    Ok((render("mode_value", &out, a.common.format.unwrap_or(Format::Json))?, EXIT_OK))
}

fn scan(a: &ScanArgs) -> Result<SpectralReport, Failure> {
    let s = setup(&a.problem, &a.common)?;
    let ks: Vec<u32> = (0..=a.kmax).collect();
    Ok(mode_scan(&s, &ks, kind(&a.problem)))
}

fn mode_scan_cmd(a: &ScanArgs) -> Outcome {
    let rep = scan(a)?;
    let text = match a.common.format.unwrap_or(Format::Json) {
        Format::Json => to_json("spectral_report", &rep)?,
        Format::Csv => spectral_csv(&rep)?,
        Format::Text => spectral_columns(&rep),
    };
    Ok((text, EXIT_OK))
}

#[derive(Serialize)]
struct SymmetryOut {
    scan: SpectralReport,
    verdict: SymmetryVerdict,
}

fn symmetry(a: &ScanArgs) -> Outcome {
    let report = scan(a)?;
    let verdict = symmetry_verdict(&report)?;
    let text = match a.common.format.unwrap_or(Format::Text) {
        Format::Text => {
            let head = if verdict.radial_optimal { "RADIAL OPTIMAL" } else { "SYMMETRY BREAKING" };
            let gap = crate::report::round_sig(verdict.gap).unwrap_or(f64::NAN);
            format!("{head}: argmin k={}\ngap: {gap}\n", verdict.argmin_k)
        }
        f => render("symmetry", &SymmetryOut { scan: report, verdict }, f)?,
    };
    Ok((text, EXIT_OK))
}

#[derive(Serialize)]
struct CatalogLine {
    name: &'static str,
    about: &'static str,
}

fn catalog_cmd(a: &CatalogArgs) -> Outcome {
    let format = a.common.format.unwrap_or(Format::Json);
    if a.list {
        let lines: Vec<CatalogLine> = catalog_names()
            .into_iter()
            .map(|name| CatalogLine {
                name,
                about: catalog_about(name).unwrap_or_default(),
            })
            .collect();
        let text = match format {
            Format::Json => to_json("catalog", &lines)?,
            _ => lines.iter().map(|l| format!("{}\t{}\n", l.name, l.about)).collect(),
        };
        return Ok((text, EXIT_OK));
    }
    let name = a.name.as_deref().expect("required by clap");
    let n = a.n.expect("required by clap");
    let pair = catalog(name, &a.params.binding(n)).map_err(Error::from)?;
    Ok((render("catalog_pair", &pair, format)?, EXIT_OK))
}

#[derive(Serialize)]
struct OracleOut {
    problem: Problem,
    #[serde(rename = "N")]
    n: u32,
    k: u32,
    value: f64,
}

fn oracle(a: &OracleArgs) -> Outcome {
    let out = OracleOut {
        problem: a.problem,
        n: a.n,
        k: a.k,
        value: mellin_constant(a.problem, a.n, a.k),
    };
    Ok((render("oracle", &out, a.common.format.unwrap_or(Format::Json))?, EXIT_OK))
}

fn equiv(a: &EquivArgs) -> Outcome {
    let radius = a.radius.unwrap_or(f64::INFINITY);
    let binding = ParamBinding::with_dim(a.n).radius(radius);
    let w = weight(&a.w, "W", &binding)?;
    domain(a.n, radius)?;
    let e = t51_equivalence_check(&w, a.n, radius, &a.common.spec())?;
    Ok((render("equivalence", &e, a.common.format.unwrap_or(Format::Json))?, EXIT_OK))
}

fn common(c: &Command) -> &Common {
    match c {
        Command::CheckPair(a) => &a.common,
        Command::CheckCond(a) => &a.common,
        Command::BestConstant(a) => &a.common,
        Command::ModeScan(a) | Command::Symmetry(a) => &a.common,
        Command::Catalog(a) => &a.common,
        Command::Oracle(a) => &a.common,
        Command::EquivCheck(a) => &a.common,
    }
}

fn dispatch(c: &Command) -> Outcome {
    validate(common(c))?;
    match c {
        Command::CheckPair(a) => check_pair(a),
        Command::CheckCond(a) => check_cond(a),
        Command::BestConstant(a) => best(a),
        Command::ModeScan(a) => mode_scan_cmd(a),
        Command::Symmetry(a) => symmetry(a),
        Command::Catalog(a) => catalog_cmd(a),
        Command::Oracle(a) => oracle(a),
        Command::EquivCheck(a) => equiv(a),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Results go to `out` or the `--output` file, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok((text, code)) => {
            let written = match &common(&cli.command).output {
                Some(path) => std::fs::write(path, &text),
                None => out.write_all(text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: cannot write output: {e}");
                return EXIT_SOFTWARE;
            }
            code
        }
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Compute(m)) => {
            let _ = writeln!(err, "computation failed: {m}");
            EXIT_SOFTWARE
        }
    }
}
