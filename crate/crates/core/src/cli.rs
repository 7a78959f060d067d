//! Command-line front end: reads measure and generator JSON, dispatches to
//! the library and writes CSV, JSON or SVG.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::boundary::{trace_curve, BoundaryCurve};
use crate::classify::{classify_semigroup_zero, classify_zero, ZeroClassification};
use crate::cusp::{analyze, attach_fit, check_bounds, Coef, CuspReport};
use crate::density::{
    density_convolution, density_infdiv, density_semigroup, linspace, profile_mass_tol, DensityProfile, PointFlag,
};
use crate::error::Error;
use crate::generators::{power_generator, GeneratorSpec, Kind, SubordinationContext};
use crate::measures::{self, MeasureSpec};
use crate::num::{parse_exact, Num};
use crate::powers::{bernoulli_clt, run_superconv, SuperconvResult, SuperconvRun};
use crate::verify;

pub const SCHEMA_VERSION: u32 = 1;

const GRID_HELP: &str = "\
Grids are written a:b:n and hold n equally spaced points from a to b, both
endpoints included (n >= 2, a < b). Use --grid=-2:2:401 when a is negative.
Grid values are support locations for the density commands (angles in
radians on the circle) and boundary parameters for `boundary` (x, r or the
angle of zeta).

Inputs are paths to JSON files, or the JSON itself when the value starts
with '{'. A generator reads {\"kind\":\"additive|positive|circle\",
\"gamma\":<number>,\"sigma\":<measure>}; a measure reads {\"carrier\":
\"real|positive|circle\",\"atoms\":[[location,mass],...],\"pieces\":[...]}.
Numbers may be given as \"p/q\" strings to keep them exact.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 failed
verification. Errors are reported on stderr as JSON.

FREELAB_THREADS sets the number of worker threads.";

/// Parsed command line.
#[derive(Parser, Debug)]
#[command(name = "freelab", version, about = "Free convolutions with an infinitely divisible factor", after_help = GRID_HELP)]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Density of the infinitely divisible law of a generator.
    Density {
        #[arg(long)]
        generator: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Density of mu1 convolved with the law of a generator.
    Convolve {
        #[arg(long)]
        mu1: String,
        #[arg(long)]
        generator: String,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Density of a convolution power nu^order with real order > 1.
    Semigroup {
        #[arg(long)]
        nu: String,
        #[arg(long)]
        order: f64,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Boundary curve of the subordination domain.
    Boundary {
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Space the grid points geometrically (needs a > 0).
        #[arg(long)]
        log: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Decide which zero set (A, B or C) a boundary point belongs to.
    Classify {
        #[command(flatten)]
        law: LawArgs,
        /// Boundary point; repeat for several. Exact as "p/q" or decimal.
        #[arg(long, required = true, allow_hyphen_values = true)]
        alpha: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Taylor data, cusp case and predicted exponents at a density zero.
    Cusp {
        #[arg(long)]
        mu1: String,
        #[arg(long)]
        generator: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        /// Half order of the zero of the mu1 density (detected when absent).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Grid of a density profile to fit the exponents on.
        #[arg(long, allow_hyphen_values = true)]
        fit_grid: Option<String>,
        /// Check the density bounds on the fit profile.
        #[arg(long, requires = "fit_grid")]
        bounds: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sup-norm errors of rescaled convolution powers against a target.
    Superconv {
        /// Run description in JSON.
        #[arg(long, conflicts_with = "bernoulli_clt")]
        run: Option<String>,
        /// Orders for the rescaled Bernoulli powers against the semicircle.
        #[arg(long, value_delimiter = ',')]
        bernoulli_clt: Vec<f64>,
        #[arg(long, allow_hyphen_values = true, default_value = "-1.9:1.9:1001")]
        window: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run the acceptance criteria or the randomized property suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::Acceptance)]
        suite: Suite,
        #[arg(long, default_value_t = verify::DEFAULT_SEED)]
        seed: u64,
        /// Trials per property suite.
        #[arg(long, default_value_t = verify::TRIALS)]
        trials: usize,
        /// Only these criteria (acceptance) or suites (properties).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Acceptance,
    Properties,
}

#[derive(Args, Debug)]
pub struct GridArgs {
    /// Locations a:b:n, endpoints included.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Also integrate the profile and fail unless its mass is 1 within this
    /// relative tolerance.
    #[arg(long)]
    pub mass_tol: Option<f64>,
}

/// The law whose domain is studied: a generator, optionally with a first
/// factor, or a convolution power.
#[derive(Args, Debug)]
pub struct LawArgs {
    #[arg(long, conflicts_with = "nu")]
    pub generator: Option<String>,
    #[arg(long, requires = "generator")]
    pub mu1: Option<String>,
    #[arg(long, requires = "order")]
    pub nu: Option<String>,
    #[arg(long)]
    pub order: Option<f64>,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Output file; stdout when absent. A JSON summary goes to stdout when
    /// the table is written to a file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    /// Also draw the result as an SVG line plot.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

/// Why a command did not succeed.
#[derive(Debug)]
pub enum Failure {
    Lib(Error),
    Usage(String),
    Io(String),
    /// Output was written but some points or slots failed.
    Partial(String),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Lib(e) if e.is_validation() => 2,
            Failure::Usage(_) | Failure::Io(_) => 2,
            Failure::Lib(_) | Failure::Partial(_) => 3,
            Failure::Verify(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Lib(e) => e.kind(),
            Failure::Usage(_) => "Usage",
            Failure::Io(_) => "Io",
            Failure::Partial(_) => "PointFailures",
            Failure::Verify(_) => "VerificationFailed",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Usage(s) | Failure::Io(s) | Failure::Partial(s) | Failure::Verify(s) => s.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "kind": self.kind(), "message": self.message() },
            "exit_code": self.exit_code(),
        })
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Run with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    set_threads();
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    run_with(argv, &mut out, &mut err)
}

fn set_threads() {
    if let Some(n) = std::env::var("FREELAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // fails only if the pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Run with explicit output streams, returning the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            return report(stderr, Failure::Usage(e.render().to_string().trim().to_string()));
        }
    };
    match execute(&cfg, stdout) {
        Ok(()) => 0,
        Err(f) => report(stderr, f),
    }
}

fn report(stderr: &mut dyn Write, f: Failure) -> i32 {
    let _ = writeln!(stderr, "{}", f.to_json());
    f.exit_code()
}

pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Outcome {
    match &cfg.command {
        Command::Density { generator, grid, out } => {
            let g = read_generator(generator)?;
            let p = density_infdiv(&g, &parse_grid(&grid.grid)?)?;
            emit_profile(&p, grid, out, stdout)
        }
        Command::Convolve { mu1, generator, grid, out } => {
            let m = read_law(mu1)?;
            let g = read_generator(generator)?;
            let p = density_convolution(&m, &g, &parse_grid(&grid.grid)?)?;
            emit_profile(&p, grid, out, stdout)
        }
        Command::Semigroup { nu, order, grid, out } => {
            let m = read_law(nu)?;
            let p = density_semigroup(&m, *order, Kind::from_carrier(m.carrier), &parse_grid(&grid.grid)?)?;
            emit_profile(&p, grid, out, stdout)
        }
        Command::Boundary { law, grid, log, out } => {
            let ctx = law_context(law)?;
            let pts = if *log { parse_log_grid(grid)? } else { parse_grid(grid)? };
            let c = trace_curve(&ctx, &pts)?;
            emit_curve(&c, out, stdout)
        }
        Command::Classify { law, alpha, out } => {
            let alphas = alpha.iter().map(|a| parse_num(a)).collect::<std::result::Result<Vec<_>, _>>()?;
            let rows = classify_all(law, &alphas)?;
            emit_classes(&rows, out, stdout)
        }
        Command::Cusp { mu1, generator, alpha, k, depth, fit_grid, bounds, out } => {
            let m = read_law(mu1)?;
            let g = read_generator(generator)?;
            let a = parse_num(alpha)?;
            let mut r = analyze(&m, &g, &a, *k, *depth)?;
            let mut extra = serde_json::Map::new();
            if let Some(spec) = fit_grid {
                let p = density_convolution(&m, &g, &parse_grid(spec)?)?;
                attach_fit(&mut r, &p);
                if *bounds {
                    extra.insert("bounds".into(), serde_json::to_value(check_bounds(&p, &g, g.kind)).unwrap_or(Value::Null));
                }
            }
            let mut v = r.report_json();
            if let Some(o) = v.as_object_mut() {
                o.extend(extra);
            }
            let text = if out.json { pretty(&v) } else { cusp_csv(&r) };
            write_main(out, stdout, &text, &v)
        }
        Command::Superconv { run, bernoulli_clt: ks, window, out } => {
            let spec: SuperconvRun = match run {
                Some(src) => from_json(&read_input(src)?)?,
                None if !ks.is_empty() => {
                    let (a, b, n) = grid_triple(window)?;
                    let mut w = crate::powers::Window::new(a, b);
                    w.points = n;
                    bernoulli_clt(ks, w)
                }
                None => return Err(Failure::Usage("superconv needs --run or --bernoulli-clt".into())),
            };
            let res = run_superconv(&spec)?;
            emit_superconv(&res, out, stdout)
        }
        Command::Verify { suite, seed, trials, only, out } => match suite {
            Suite::Acceptance => verify_acceptance(*seed, only, out, stdout),
            Suite::Properties => verify_properties(*seed, *trials, only, out, stdout),
        },
    }
}

// inputs

fn read_input(src: &str) -> std::result::Result<String, Failure> {
    if src.trim_start().starts_with('{') {
        return Ok(src.to_string());
    }
    std::fs::read_to_string(src).map_err(|e| Failure::Io(format!("{src}: {e}")))
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, Failure> {
    serde_json::from_str(s).map_err(|e| Failure::Lib(Error::Parse(e.to_string())))
}

/// A probability measure.
fn read_law(src: &str) -> std::result::Result<MeasureSpec, Failure> {
    let m: MeasureSpec = from_json(&read_input(src)?)?;
    Ok(measures::validate(&m, true)?)
}

fn read_generator(src: &str) -> std::result::Result<GeneratorSpec, Failure> {
    let g: GeneratorSpec = from_json(&read_input(src)?)?;
    measures::validate(&g.sigma, false)?;
    g.validate()?;
    Ok(g)
}

fn parse_num(s: &str) -> std::result::Result<Num, Failure> {
    parse_exact(s).map(Num::exact).ok_or_else(|| Failure::Lib(Error::Parse(format!("bad number {s:?}"))))
}

fn grid_triple(spec: &str) -> std::result::Result<(f64, f64, usize), Failure> {
    let bad = |why: &str| Failure::Lib(Error::InvalidGrid(format!("{spec:?}: {why}")));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected a:b:n"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad("a is not a number"))?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad("b is not a number"))?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad("n is not a count"))?;
    if !(a.is_finite() && b.is_finite()) || !(a < b) {
        return Err(bad("need finite a < b"));
    }
    if n < 2 {
        return Err(bad("need n >= 2"));
    }
    Ok((a, b, n))
}

/// `a:b:n` with both endpoints included.
pub fn parse_grid(spec: &str) -> std::result::Result<Vec<f64>, Failure> {
    let (a, b, n) = grid_triple(spec)?;
    Ok(linspace(a, b, n))
}

fn parse_log_grid(spec: &str) -> std::result::Result<Vec<f64>, Failure> {
    let (a, b, n) = grid_triple(spec)?;
    if !(a > 0.0) {
        return Err(Failure::Lib(Error::InvalidGrid(format!("{spec:?}: a log grid needs a > 0"))));
    }
    let mut g: Vec<f64> = linspace(a.ln(), b.ln(), n).into_iter().map(f64::exp).collect();
    // exp(ln a) can miss a by an ulp; the endpoints are exact by contract
    g[0] = a;
    g[n - 1] = b;
    Ok(g)
}

fn law_context(law: &LawArgs) -> std::result::Result<SubordinationContext, Failure> {
    match (&law.generator, &law.mu1, &law.nu, law.order) {
        (Some(g), None, None, _) => Ok(SubordinationContext::pure(&read_generator(g)?)),
        (Some(g), Some(m), None, _) => Ok(SubordinationContext::surrogate(&read_generator(g)?, &read_law(m)?)?),
        (None, None, Some(nu), Some(order)) => {
            let m = read_law(nu)?;
            Ok(power_generator(&m, order, Kind::from_carrier(m.carrier))?)
        }
        _ => Err(Failure::Usage("give --generator [--mu1], or --nu with --order".into())),
    }
}

fn classify_all(law: &LawArgs, alphas: &[Num]) -> std::result::Result<Vec<ZeroClassification>, Failure> {
    match (&law.generator, &law.mu1, &law.nu, law.order) {
        (Some(g), Some(m), None, _) => {
            let (g, m) = (read_generator(g)?, read_law(m)?);
            Ok(alphas.iter().map(|a| classify_zero(&m, &g, a)).collect::<crate::Result<_>>()?)
        }
        (None, None, Some(nu), Some(order)) => {
            let m = read_law(nu)?;
            let kind = Kind::from_carrier(m.carrier);
            Ok(alphas.iter().map(|a| classify_semigroup_zero(&m, order, kind, a)).collect::<crate::Result<_>>()?)
        }
        _ => Err(Failure::Usage("classify needs --mu1 with --generator, or --nu with --order".into())),
    }
}

// outputs

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap_or_default();
    s.push('\n');
    s
}

/// Writes the main output; with `--out` the summary also goes to stdout.
fn write_main(out: &OutputArgs, stdout: &mut dyn Write, text: &str, summary: &Value) -> Outcome {
    match &out.out {
        Some(path) => {
            write_file(path, text)?;
            stdout.write_all(pretty(summary).as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string())),
    }
}

fn write_file(path: &Path, text: &str) -> Outcome {
    std::fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> Value {
    match v {
        Some(x) if x.is_finite() => json!(x),
        _ => Value::Null,
    }
}

fn emit_profile(p: &DensityProfile, grid: &GridArgs, out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    let mut summary = p.report_json();
    if let Some(tol) = grid.mass_tol {
        if !(tol > 0.0) {
            return Err(Failure::Usage(format!("--mass-tol must be positive, got {tol}")));
        }
        let m = profile_mass_tol(p, tol)?;
        summary["mass"] = json!(m);
        if (m - 1.0).abs() > tol {
            return Err(Failure::Lib(Error::MassNotOne(m)));
        }
    }
    let text = if out.json {
        let rows: Vec<Value> = (0..p.grid.len())
            .map(|i| {
                json!({
                    "location": p.grid[i],
                    "value": p.values[i],
                    "alt": fmt_opt(p.alt.as_ref().map(|a| a[i])),
                    "flag": p.flags[i],
                })
            })
            .collect();
        let mut full = summary.clone();
        full["rows"] = Value::Array(rows);
        pretty(&full)
    } else {
        p.to_csv()
    };
    write_main(out, stdout, &text, &summary)?;
    if let Some(svg) = &out.svg {
        let pts: Vec<(f64, f64)> = p.grid.iter().zip(&p.values).map(|(&x, &y)| (x, y)).collect();
        write_file(svg, &svg_plot(&[pts], &p.description, "location", "density"))?;
    }
    let failed = p.flags.iter().filter(|f| **f == PointFlag::Failed).count();
    if failed > 0 {
        return Err(Failure::Partial(format!("{failed} of {} grid points failed", p.grid.len())));
    }
    Ok(())
}

fn emit_curve(c: &BoundaryCurve, out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    let summary = json!({ "schema_version": SCHEMA_VERSION, "kind": c.kind, "points": c.samples.len() });
    let text = if out.json {
        let mut full = summary.clone();
        full["samples"] = c
            .samples
            .iter()
            .map(|s| json!({ "parameter": s.param, "boundary_value": s.value, "psi_re": s.psi.re, "psi_im": s.psi.im }))
            .collect();
        pretty(&full)
    } else {
        c.to_csv()
    };
    write_main(out, stdout, &text, &summary)?;
    if let Some(svg) = &out.svg {
        let pts: Vec<(f64, f64)> = c.samples.iter().map(|s| (s.param, s.value)).collect();
        write_file(svg, &svg_plot(&[pts], "boundary", "parameter", "boundary value"))?;
    }
    Ok(())
}

fn emit_classes(rows: &[ZeroClassification], out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    let summary = json!({ "schema_version": SCHEMA_VERSION, "zeros": rows });
    let text = if out.json {
        pretty(&summary)
    } else {
        let mut s = String::from("alpha,location,set,lhs,rhs,equality_flag\n");
        for r in rows {
            let _ = writeln!(s, "{},{:.17e},{:?},{},{},{}", r.alpha, r.location, r.set_label, r.lhs, r.rhs, r.equality_flag);
        }
        s
    };
    write_main(out, stdout, &text, &summary)
}

/// Coefficient table `n,a,b,c`, exact where known.
fn cusp_csv(r: &CuspReport) -> String {
    let cell = |xs: &[Coef], i: usize| xs.get(i).map(|x| csv_field(&x.to_string())).unwrap_or_default();
    let mut s = String::from("n,a,b,c\n");
    for i in 0..r.a.len().max(r.b.len()).max(r.c.len()) {
        let _ = writeln!(s, "{i},{},{},{}", cell(&r.a, i), cell(&r.b, i), cell(&r.c, i));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn emit_superconv(r: &SuperconvResult, out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    let summary = serde_json::to_value(r).unwrap_or(Value::Null);
    let text = if out.json { pretty(&summary) } else { r.to_csv() };
    write_main(out, stdout, &text, &summary)?;
    if let Some(svg) = &out.svg {
        let pts: Vec<(f64, f64)> = r
            .slots
            .iter()
            .filter_map(|s| s.sup_error.filter(|e| *e > 0.0).map(|e| (s.order.log10(), e.log10())))
            .collect();
        write_file(svg, &svg_plot(&[pts], "sup-norm error", "log10 order", "log10 error"))?;
    }
    let failed: Vec<String> = r.slots.iter().filter_map(|s| s.failure.as_ref().map(|f| format!("n={}: {f}", s.n))).collect();
    if !failed.is_empty() {
        return Err(Failure::Partial(failed.join("; ")));
    }
    Ok(())
}

fn verify_acceptance(seed: u64, only: &[String], out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    let ids: Vec<u32> = if only.is_empty() {
        verify::CRITERIA.iter().map(|c| c.0).collect()
    } else {
        only.iter()
            .map(|s| s.trim().parse::<u32>().ok().filter(|id| verify::CRITERIA.iter().any(|c| c.0 == *id)))
            .collect::<Option<_>>()
            .ok_or_else(|| Failure::Usage(format!("unknown criterion in {only:?}")))?
    };
    let results: Vec<verify::CriterionResult> = ids.iter().map(|&id| verify::criterion(id, seed)).collect();
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let summary = json!({ "schema_version": SCHEMA_VERSION, "suite": "acceptance", "seed": seed, "criteria": results });
    let text = if out.json {
        pretty(&summary)
    } else {
        let mut s = String::new();
        for r in &results {
            let tag = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {:>2} {} ({:.1} s): {}", r.id, r.name, r.seconds, r.detail);
        }
        let _ = writeln!(s, "{}/{} criteria passed", results.len() - failed.len(), results.len());
        s
    };
    write_main(out, stdout, &text, &summary)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("criteria {failed:?} failed")))
    }
}

fn verify_properties(seed: u64, trials: usize, only: &[String], out: &OutputArgs, stdout: &mut dyn Write) -> Outcome {
    if trials == 0 {
        return Err(Failure::Usage("--trials must be positive".into()));
    }
    if let Some(bad) = only.iter().find(|n| !verify::SUITES.iter().any(|s| s.0 == n.as_str())) {
        return Err(Failure::Usage(format!("unknown suite {bad}")));
    }
    let reports: Vec<verify::SuiteReport> = verify::SUITES
        .iter()
        .filter(|s| only.is_empty() || only.iter().any(|n| n == s.0))
        .map(|s| verify::run_suite(s.0, seed, trials))
        .collect();
    let failed: Vec<&str> = reports.iter().filter(|r| r.failures > 0).map(|r| r.name).collect();
    let summary = json!({ "schema_version": SCHEMA_VERSION, "suite": "properties", "seed": seed, "suites": reports });
    let text = if out.json {
        pretty(&summary)
    } else {
        let mut s = String::new();
        for r in &reports {
            let tag = if r.failures == 0 { "PASS" } else { "FAIL" };
            let _ = write!(s, "{tag} {}: {}/{} trials failed ({:.1} s)", r.name, r.failures, r.trials, r.seconds);
            if let Some((t, why)) = &r.first_failure {
                let _ = write!(s, "; first at trial {t}: {why}");
            }
            s.push('\n');
        }
        s
    };
    write_main(out, stdout, &text, &summary)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("suites {failed:?} failed")))
    }
}

/// Polyline plot of one or more series; non-finite points break the line.
pub fn svg_plot(series: &[Vec<(f64, f64)>], title: &str, xlabel: &str, ylabel: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let finite = series.iter().flatten().filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = (x0 - 0.5, x0 + 0.5);
    }
    if !(y0 < y1) {
        (y0, y1) = (y0 - 0.5, y0 + 0.5);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, W / 2.0, esc(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, W / 2.0, H - 15.0, esc(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(ylabel)
    );
    for (v, x, y, anchor) in [
        (x0, M, H - M + 15.0, "start"),
        (x1, W - M, H - M + 15.0, "end"),
        (y0, M - 5.0, H - M, "end"),
        (y1, M - 5.0, M + 10.0, "end"),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.4}</text>"#);
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (k, pts) in series.iter().enumerate() {
        let mut run: Vec<String> = Vec::new();
        let flush = |run: &mut Vec<String>, s: &mut String| {
            if run.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                    colors[k % colors.len()],
                    run.join(" ")
                );
            }
            run.clear();
        };
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                run.push(format!("{:.2},{:.2}", sx(x), sy(y)));
            } else {
                flush(&mut run, &mut s);
            }
        }
        flush(&mut run, &mut s);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_inclusive() {
        let g = parse_grid("-2:2:5").unwrap();
        assert_eq!(g, vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn bad_grids_are_validation_errors() {
        for s in ["2:-2:5", "0:1:1", "0:1", "a:1:3", "0:inf:3"] {
            let e = parse_grid(s).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{s}");
        }
    }

    #[test]
    fn svg_breaks_at_gaps() {
        let s = svg_plot(&[vec![(0.0, 0.0), (1.0, 1.0), (2.0, f64::NAN), (3.0, 0.0), (4.0, 1.0)]], "t", "x", "y");
        assert_eq!(s.matches("<polyline").count(), 2);
    }
}
