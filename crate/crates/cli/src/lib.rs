//! Command-line front end: one subcommand per analysis, JSON reports written
//! atomically, a one-line summary on stdout.

pub mod render;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use hexweb::classify::{classify_point, ClassifyError, ClassifyOptions, Hexagonality};
use hexweb::equivariant::{
    generate_ode, homotopy_normalize, EquivariantError, EquivariantIntegral, HomotopyOptions, Upstairs, VietaConvention,
};
use hexweb::geometry::RootOptions;
use hexweb::hexagonality::{
    curvature_numeric, hexagon_closure, mixed_web, pde_residual, residual_grid, CurvatureOptions, HexagonOptions,
    HexagonReport, Region, ThreeWeb, Verdict,
};
use hexweb::json::{fmt_num, Json, ToJson};
use hexweb::webtrace::{first_integral_drift, sample_web, trace_solution, Direction, TraceOptions};
use hexweb::{parse, Expression, ImplicitOde, JetPoint};

use render::{render_svg, Viewport};

const XY: &[&str] = &["x", "y"];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{0}")]
    Precondition(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Precondition(_) => 4,
        }
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "hexweb", version, about = "Implicit cubic ODEs with hexagonal 3-webs of solutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Real roots in p over a point.
    Roots(RootsArgs),
    /// Normal form of a point of F = 0.
    Classify(ClassifyArgs),
    /// Hexagonality PDE residual of p^3 + A p + B on a grid.
    Residual(ResidualArgs),
    /// Numerical web curvature at a point.
    Curvature(CurvatureArgs),
    /// Hexagon closure defects around a point.
    Hexagon(HexagonArgs),
    /// One solution curve through a point of F = 0.
    Trace(TraceArgs),
    /// SVG figure of the solution web over a region.
    Render(RenderArgs),
    /// Hexagonal ODE generated from D3-equivariant integrals.
    Generate(GenerateArgs),
    /// Equivariant homotopy from p(2q+p)^3 to a target integral.
    Normalize(NormalizeArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Report path; written atomically.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RootsArgs {
    #[arg(long)]
    pub ode: PathBuf,
    /// x,y
    #[arg(long, value_parser = list::<2>, allow_hyphen_values = true)]
    pub point: [f64; 2],
    #[arg(long, default_value_t = 1e-8)]
    pub rel_tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HexSource {
    /// PDE residual for depressed cubics, a hexagon walk otherwise.
    Auto,
    Pde,
    Walk,
    /// Trust the caller.
    Assert,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub ode: PathBuf,
    /// x,y,p
    #[arg(long, value_parser = list::<3>, allow_hyphen_values = true)]
    pub point: [f64; 3],
    #[arg(long, value_enum, default_value_t = HexSource::Auto)]
    pub hexagonality: HexSource,
    /// Center of the hexagon walk; searched near the point when absent.
    #[arg(long, value_parser = list::<2>, allow_hyphen_values = true)]
    pub hex_center: Option<[f64; 2]>,
    /// Criminant arclength on each side of the point.
    #[arg(long, default_value_t = 0.5)]
    pub radius: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[arg(long = "A", allow_hyphen_values = true)]
    pub a: String,
    #[arg(long = "B", allow_hyphen_values = true)]
    pub b: String,
    /// x_min,x_max,y_min,y_max,n
    #[arg(long, value_parser = list::<5>, allow_hyphen_values = true)]
    pub grid: [f64; 5],
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct WebArgs {
    #[arg(long)]
    pub ode: PathBuf,
    /// Third family `alpha dx + beta dy = 0` for a quadratic ODE.
    #[arg(long, allow_hyphen_values = true, requires = "beta")]
    pub alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true, requires = "alpha")]
    pub beta: Option<String>,
    /// x_min,x_max,y_min,y_max; defaults to a square of half-width --radius.
    #[arg(long, value_parser = list::<4>, allow_hyphen_values = true)]
    pub region: Option<[f64; 4]>,
    #[arg(long, default_value_t = 0.64)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub web: WebArgs,
    /// x,y
    #[arg(long, value_parser = list::<2>, allow_hyphen_values = true)]
    pub point: [f64; 2],
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct HexagonArgs {
    #[command(flatten)]
    pub web: WebArgs,
    /// x,y
    #[arg(long, value_parser = list::<2>, allow_hyphen_values = true)]
    pub center: [f64; 2],
    #[arg(long, value_delimiter = ',', default_value = "0.16,0.08,0.04")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraceDirection {
    Forward,
    Backward,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub ode: PathBuf,
    /// x,y,p
    #[arg(long, value_parser = list::<3>, allow_hyphen_values = true)]
    pub start: [f64; 3],
    #[arg(long, default_value_t = 1.0)]
    pub arclength: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 0.02)]
    pub max_step: f64,
    #[arg(long, value_enum, default_value_t = TraceDirection::Forward)]
    pub direction: TraceDirection,
    /// x_min,x_max,y_min,y_max
    #[arg(long, value_parser = list::<4>, allow_hyphen_values = true)]
    pub bounds: Option<[f64; 4]>,
    /// First integral over (x, y, p) whose drift is reported.
    #[arg(long, allow_hyphen_values = true)]
    pub integral: Option<String>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub ode: PathBuf,
    /// x_min,x_max,y_min,y_max
    #[arg(long, value_parser = list::<4>, allow_hyphen_values = true)]
    pub region: [f64; 4],
    /// Seed lattice points per axis.
    #[arg(long, default_value_t = 6)]
    pub seeds: usize,
    /// Surface arclength traced each way from a seed; defaults to twice the region size.
    #[arg(long)]
    pub arclength: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Horizontal y-axis.
    #[arg(long)]
    pub swap_axes: bool,
    #[arg(long)]
    pub no_discriminant: bool,
    /// SVG path; written atomically.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON report of the traced curves.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON with "F" over (p, q) or "F1", "F3" over (A, B), plus "region", "grid", "vieta".
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    #[arg(long = "F1", allow_hyphen_values = true)]
    pub f1: String,
    #[arg(long = "F3", allow_hyphen_values = true)]
    pub f3: String,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.2)]
    pub radius: f64,
    #[arg(long, default_value_t = 60)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    pub out: OutArgs,
}

fn list<const N: usize>(text: &str) -> Result<[f64; N], String> {
    let values = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<Vec<f64>, String>>()?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err("values must be finite".into());
    }
    values.try_into().map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("--{name} must be positive")))
    }
}

fn load_ode(path: &Path) -> Result<ImplicitOde, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    ImplicitOde::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn region_of(bounds: [f64; 4]) -> Result<Region, CliError> {
    Region::new(bounds[0], bounds[1], bounds[2], bounds[3]).map_err(config)
}

/// Writes through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = path.file_name().ok_or_else(|| CliError::Config(format!("{}: not a file path", path.display())))?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents).map_err(|e| CliError::Config(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Config(format!("{}: {e}", path.display()))
    })
}

fn emit(out: &OutArgs, report: &Json) -> Result<(), CliError> {
    if let Some(path) = &out.out {
        write_atomic(path, &report.to_pretty())?;
    }
    Ok(())
}

/// Caps the global rayon pool from `HEXWEB_THREADS`.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HEXWEB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("HEXWEB_THREADS must be a positive integer, got {v:?}")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `argv` and runs the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match configure_threads().and_then(|_| execute(&cli.command)) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns its summary line.
pub fn execute(command: &Command) -> Result<String, CliError> {
    match command {
        Command::Roots(a) => roots(a),
        Command::Classify(a) => classify(a),
        Command::Residual(a) => residual(a),
        Command::Curvature(a) => curvature(a),
        Command::Hexagon(a) => hexagon(a),
        Command::Trace(a) => trace(a),
        Command::Render(a) => render(a),
        Command::Generate(a) => generate(a),
        Command::Normalize(a) => normalize(a),
    }
}

fn roots(a: &RootsArgs) -> Result<String, CliError> {
    let ode = load_ode(&a.ode)?;
    positive("rel-tol", a.rel_tol)?;
    let [x, y] = a.point;
    let r = ode.roots_at(x, y, &RootOptions { rel_tol: a.rel_tol, allow_degree_drop: true }).map_err(numeric)?;
    let report = Json::obj([
        ("x", x.into()),
        ("y", y.into()),
        ("pattern", r.pattern.as_str().into()),
        (
            "roots",
            Json::Arr(
                r.roots
                    .iter()
                    .map(|root| Json::obj([("p", root.value.into()), ("multiplicity", root.multiplicity.into())]))
                    .collect(),
            ),
        ),
        ("complex_pairs", r.complex_pairs.into()),
        ("at_infinity", r.at_infinity.into()),
        ("scale", r.scale.into()),
    ]);
    emit(&a.out, &report)?;
    let values: Vec<String> = r.values().iter().map(|v| fmt_num(*v)).collect();
    Ok(format!("roots: {} [{}]", r.pattern.as_str(), values.join(", ")))
}

/// Walk centres sit on a `(2n+1) x (2n+1)` lattice around the point; the
/// nearest `MAX_WALKS` with three real families are walked.
const WALK_LATTICE: i32 = 8;
const WALK_SPACING: f64 = 0.1;
const MAX_WALKS: usize = 48;

fn three_families(ode: &ImplicitOde, x: f64, y: f64) -> bool {
    ode.roots_at(x, y, &RootOptions::default()).is_ok_and(|r| {
        r.complex_pairs == 0
            && r.roots.iter().all(|root| root.multiplicity == 1)
            && r.roots.len() + usize::from(ode.degree() == 2) >= 3
    })
}

/// Evidence for hexagonality, as passed to the classifier and reported.
fn hexagonality_evidence(ode: &ImplicitOde, a: &ClassifyArgs) -> Result<(Hexagonality, Json), CliError> {
    let [x, y, _] = a.point;
    let use_pde = match a.hexagonality {
        HexSource::Assert => return Ok((Hexagonality::Asserted, Json::obj([("method", "assert".into())]))),
        HexSource::Pde => true,
        HexSource::Walk => false,
        HexSource::Auto => ode.is_depressed() && a.hex_center.is_none(),
    };
    if use_pde {
        let (big_a, big_b) =
            ode.depressed_ab().ok_or_else(|| CliError::Config("--hexagonality pde needs a depressed cubic".into()))?;
        let res = pde_residual(big_a, big_b).map_err(numeric)?;
        let region = Region::around(x, y, 0.5).map_err(config)?;
        let g = residual_grid(&res, big_a, big_b, &region, 20).map_err(numeric)?;
        let hexagonal = g.max_abs <= 1e-9 * g.scale;
        let verdict = if hexagonal { Hexagonality::Asserted } else { Hexagonality::Verdict(Verdict::NonHexagonal) };
        let evidence = Json::obj([
            ("method", "pde".into()),
            ("max_abs", g.max_abs.into()),
            ("scale", g.scale.into()),
            ("hexagonal", hexagonal.into()),
        ]);
        return Ok((verdict, evidence));
    }
    let mut candidates: Vec<[f64; 2]> = match a.hex_center {
        Some(c) => vec![c],
        None => (-WALK_LATTICE..=WALK_LATTICE)
            .flat_map(|j| (-WALK_LATTICE..=WALK_LATTICE).map(move |i| (i, j)))
            .filter(|&(i, j)| (i, j) != (0, 0))
            .map(|(i, j)| [x + WALK_SPACING * i as f64, y + WALK_SPACING * j as f64])
            .filter(|c| three_families(ode, c[0], c[1]))
            .collect(),
    };
    candidates.sort_by(|c, d| (c[0] - x).hypot(c[1] - y).total_cmp(&(d[0] - x).hypot(d[1] - y)));
    candidates.truncate(MAX_WALKS);
    // a single centre can sit on the zero set of the web curvature, so every
    // candidate walks and any non-hexagonal verdict wins
    let walks: Vec<Result<HexagonReport, String>> = candidates
        .par_iter()
        .map(|c| {
            let region = Region::around(c[0], c[1], 0.45).map_err(|e| e.to_string())?;
            ThreeWeb::from_ode(ode.clone(), region)
                .and_then(|web| hexagon_closure(&web, *c, &HexagonOptions::default()))
                .map_err(|e| e.to_string())
        })
        .collect();
    let last = walks.iter().filter_map(|w| w.as_ref().err()).next_back().cloned();
    let reports: Vec<HexagonReport> = walks.into_iter().filter_map(Result::ok).collect();
    if reports.is_empty() {
        return Err(CliError::Precondition(format!(
            "no hexagon walk near the point succeeded{}",
            last.map(|e| format!(" (last error: {e})")).unwrap_or_default()
        )));
    }
    let verdict = [Verdict::NonHexagonal, Verdict::Hexagonal, Verdict::Inconclusive]
        .into_iter()
        .find(|v| reports.iter().any(|r| r.verdict == *v))
        .expect("at least one report");
    let evidence = Json::obj([
        ("method", "walk".into()),
        ("verdict", verdict.as_str().into()),
        ("reports", Json::Arr(reports.iter().map(|r| r.to_json()).collect())),
    ]);
    Ok((Hexagonality::Verdict(verdict), evidence))
}

fn classify(a: &ClassifyArgs) -> Result<String, CliError> {
    let ode = load_ode(&a.ode)?;
    positive("radius", a.radius)?;
    let [x, y, p] = a.point;
    let m = JetPoint::new(x, y, p).map_err(config)?;
    let v = ode.jet_values(&m).map_err(config)?;
    if v.f.abs() > 1e-6 * v.scale {
        return Err(CliError::Config(format!("point is not on F = 0 (|F| = {:.3e})", v.f.abs())));
    }
    if a.hexagonality == HexSource::Pde && !ode.is_depressed() {
        return Err(CliError::Config("--hexagonality pde needs a depressed cubic".into()));
    }
    let (hex, evidence) = hexagonality_evidence(&ode, a)?;
    let opts = ClassifyOptions { radius: a.radius, ..ClassifyOptions::default() };
    let class = classify_point(&ode, &m, Some(hex), &opts).map_err(|e| match e {
        ClassifyError::MissingHexagonality | ClassifyError::NotHexagonal(_) => CliError::Precondition(e.to_string()),
        ClassifyError::Invalid(_) => CliError::Config(e.to_string()),
        other => CliError::Numeric(other.to_string()),
    })?;
    let mut report = class.to_json();
    report.push("hexagonality_evidence", evidence);
    emit(&a.out, &report)?;
    let label = class.tag.numeral().unwrap_or("-");
    Ok(format!("classify: tag {label} ({}) at ({x}, {y}, {p})", class.tag.as_str()))
}

fn residual(a: &ResidualArgs) -> Result<String, CliError> {
    let big_a = parse(&a.a, XY).map_err(config)?;
    let big_b = parse(&a.b, XY).map_err(config)?;
    let [x0, x1, y0, y1, n] = a.grid;
    if n.fract() != 0.0 || n < 2.0 {
        return Err(CliError::Config("grid size must be an integer >= 2".into()));
    }
    let region = region_of([x0, x1, y0, y1])?;
    let res = pde_residual(&big_a, &big_b).map_err(numeric)?;
    let g = residual_grid(&res, &big_a, &big_b, &region, n as usize).map_err(numeric)?;
    let report = Json::obj([
        ("A", big_a.to_string().into()),
        ("B", big_b.to_string().into()),
        ("residual", res.to_string().into()),
        ("max_abs", g.max_abs.into()),
        ("scale", g.scale.into()),
        ("xs", Json::nums(&g.xs)),
        ("ys", Json::nums(&g.ys)),
        ("values", Json::Arr(g.values.iter().map(|r| Json::nums(r)).collect())),
    ]);
    emit(&a.out, &report)?;
    Ok(format!("residual: max |R| = {} (scale {})", fmt_num(g.max_abs), fmt_num(g.scale)))
}

/// Loads the ODE and region and builds the (possibly mixed) web.
fn build_web(w: &WebArgs, center: [f64; 2]) -> Result<ThreeWeb, CliError> {
    let ode = load_ode(&w.ode)?;
    positive("radius", w.radius)?;
    let region = match w.region {
        Some(b) => region_of(b)?,
        None => Region::around(center[0], center[1], w.radius).map_err(config)?,
    };
    let forms = match (&w.alpha, &w.beta) {
        (Some(al), Some(be)) => {
            if ode.degree() != 2 {
                return Err(CliError::Config("--alpha/--beta need a quadratic ODE".into()));
            }
            parse(al, XY).map_err(config)?;
            parse(be, XY).map_err(config)?;
            Some((al.as_str(), be.as_str()))
        }
        _ => None,
    };
    if !region.contains(center[0], center[1]) {
        return Err(CliError::Config("point is outside the region".into()));
    }
    match forms {
        Some((al, be)) => mixed_web(ode, al, be, region),
        None => ThreeWeb::from_ode(ode, region),
    }
    .map_err(numeric)
}

fn curvature(a: &CurvatureArgs) -> Result<String, CliError> {
    positive("tol", a.tol)?;
    if let Some(h) = a.h {
        positive("h", h)?;
    }
    let web = build_web(&a.web, a.point)?;
    let s =
        curvature_numeric(&web, a.point[0], a.point[1], &CurvatureOptions { h: a.h, tol: a.tol }).map_err(numeric)?;
    emit(&a.out, &s.to_json())?;
    Ok(format!("curvature: K = {} (error {}, reliable {})", fmt_num(s.k), fmt_num(s.error), s.reliable))
}

fn hexagon(a: &HexagonArgs) -> Result<String, CliError> {
    positive("tol", a.tol)?;
    if a.eps.is_empty() {
        return Err(CliError::Config("--eps needs at least one value".into()));
    }
    for &e in &a.eps {
        positive("eps", e)?;
    }
    let web = build_web(&a.web, a.center)?;
    let opts = HexagonOptions { eps: a.eps.clone(), tol: a.tol, ..HexagonOptions::default() };
    let r = hexagon_closure(&web, a.center, &opts).map_err(numeric)?;
    emit(&a.out, &r.to_json())?;
    let slope = if r.slope.is_finite() { format!("{:.3}", r.slope) } else { "unbounded".into() };
    Ok(format!("hexagon: verdict {}, log-log slope {slope}", r.verdict.as_str()))
}

fn trace(a: &TraceArgs) -> Result<String, CliError> {
    let ode = load_ode(&a.ode)?;
    positive("arclength", a.arclength)?;
    positive("tol", a.tol)?;
    positive("max-step", a.max_step)?;
    if let Some(b) = a.bounds {
        region_of(b)?;
    }
    let integral = match &a.integral {
        Some(t) => Some(parse(t, &["x", "y", "p"]).map_err(config)?),
        None => None,
    };
    let [x, y, p] = a.start;
    let start = JetPoint::new(x, y, p).map_err(config)?;
    let v = ode.jet_values(&start).map_err(config)?;
    if v.f.abs() > 1e-6 * v.scale {
        return Err(CliError::Config(format!("start is not on F = 0 (|F| = {:.3e})", v.f.abs())));
    }
    let opts = TraceOptions {
        arclength: a.arclength,
        tol: a.tol,
        max_step: a.max_step,
        bounds: a.bounds,
        direction: match a.direction {
            TraceDirection::Forward => Direction::Forward,
            TraceDirection::Backward => Direction::Backward,
        },
    };
    let curve = trace_solution(&ode, &start, &opts).map_err(numeric)?;
    let mut report = curve.to_json();
    let drift = match &integral {
        Some(i) => Some(first_integral_drift(&curve, i).map_err(numeric)?),
        None => None,
    };
    if let Some(d) = drift {
        report.push("integral_drift", d.into());
    }
    emit(&a.out, &report)?;
    let cusps = curve.cusps().count();
    Ok(format!(
        "trace: {} points, arclength {:.6}, {} cusp(s){}",
        curve.points.len(),
        curve.stats.arclength,
        cusps,
        drift.map(|d| format!(", drift {d:.3e}")).unwrap_or_default()
    ))
}

fn render(a: &RenderArgs) -> Result<String, CliError> {
    let ode = load_ode(&a.ode)?;
    let view = Viewport::new(a.region, a.swap_axes).map_err(config)?;
    let region = region_of(a.region)?;
    if a.seeds == 0 {
        return Err(CliError::Config("--seeds must be positive".into()));
    }
    positive("tol", a.tol)?;
    let arclength = a.arclength.unwrap_or(2.0 * region.size());
    positive("arclength", arclength)?;
    let opts = TraceOptions { arclength, tol: a.tol, max_step: region.size() / 100.0, ..TraceOptions::default() };
    let web = sample_web(&ode, a.region, a.seeds, &opts).map_err(numeric)?;
    let disc: Option<Expression> = (!a.no_discriminant).then(|| ode.discriminant());
    let svg = render_svg(&web.curves, disc.as_ref(), &view).map_err(numeric)?;
    if let Some(path) = &a.out {
        write_atomic(path, &svg)?;
    }
    let cusps: Vec<[f64; 3]> = web.curves.iter().flat_map(|c| c.cusps()).collect();
    if let Some(path) = &a.report {
        let report = Json::obj([
            ("curves", web.curves.len().into()),
            ("failures", web.failures.len().into()),
            ("cusps", Json::Arr(cusps.iter().map(|z| Json::nums(z)).collect())),
        ]);
        write_atomic(path, &report.to_pretty())?;
    }
    Ok(format!(
        "render: {} curves, {} cusp markers, {} failed seeds",
        web.curves.len(),
        cusps.len(),
        web.failures.len()
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    #[serde(rename = "F")]
    f: Option<String>,
    #[serde(rename = "F1")]
    f1: Option<String>,
    #[serde(rename = "F3")]
    f3: Option<String>,
    region: [f64; 4],
    grid: usize,
    #[serde(default = "default_vieta")]
    vieta: String,
    eps: Option<Vec<f64>>,
}

fn default_vieta() -> String {
    "cubic".into()
}

fn generate(a: &GenerateArgs) -> Result<String, CliError> {
    let text = fs::read_to_string(&a.config).map_err(|e| CliError::Config(format!("{}: {e}", a.config.display())))?;
    let cfg: GenerateConfig = serde_json::from_str(&text).map_err(config)?;
    let convention = match cfg.vieta.as_str() {
        "cubic" => VietaConvention::Cubic,
        "positive" => VietaConvention::Positive,
        other => return Err(CliError::Config(format!("vieta must be \"cubic\" or \"positive\", got {other:?}"))),
    };
    let invariant = |e: EquivariantError| match e {
        EquivariantError::Expr(_) | EquivariantError::Invalid(_) => CliError::Config(e.to_string()),
        other => CliError::Numeric(other.to_string()),
    };
    let upstairs = match (&cfg.f, &cfg.f1, &cfg.f3) {
        (Some(f), None, None) => Upstairs::function(parse(f, &["p", "q"]).map_err(config)?).map_err(invariant)?,
        (None, Some(f1), Some(f3)) => Upstairs::Integral(EquivariantIntegral::parse(f1, f3).map_err(invariant)?),
        _ => return Err(CliError::Config("give either \"F\" or both \"F1\" and \"F3\"".into())),
    };
    let region = region_of(cfg.region)?;
    if cfg.grid < 2 {
        return Err(CliError::Config("grid must be at least 2".into()));
    }
    let mut hex = HexagonOptions::default();
    if let Some(eps) = cfg.eps {
        if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0)) {
            return Err(CliError::Config("eps values must be positive".into()));
        }
        hex.eps = eps;
    }
    let g = generate_ode(&upstairs, region, cfg.grid, convention, &hex).map_err(numeric)?;
    emit(&a.out, &g.to_json())?;
    Ok(format!("generate: {}x{} grid, hexagon verdict {}", cfg.grid, cfg.grid, g.report.verdict.as_str()))
}

fn normalize(a: &NormalizeArgs) -> Result<String, CliError> {
    let target = EquivariantIntegral::parse(&a.f1, &a.f3).map_err(|e| match e {
        EquivariantError::Expr(_) | EquivariantError::Invalid(_) => CliError::Config(e.to_string()),
        other => CliError::Numeric(other.to_string()),
    })?;
    if a.steps == 0 || a.samples == 0 {
        return Err(CliError::Config("--steps and --samples must be positive".into()));
    }
    positive("radius", a.radius)?;
    positive("tol", a.tol)?;
    let opts = HomotopyOptions { steps: a.steps, radius: a.radius, samples: a.samples, tol: a.tol };
    let r = homotopy_normalize(&target, &opts).map_err(numeric)?;
    emit(&a.out, &r.to_json())?;
    Ok(format!(
        "normalize: residual {:.3e}, equivariance {:.3e} over {} samples",
        r.residual,
        r.equivariance,
        r.samples.len()
    ))
}
