//! Command-line front end. Numbers come from config files; flags only choose paths and verbosity.
//!
//! Exit codes: 0 when every verdict passes, 1 on any failing verdict or numerical failure,
//! 2 on usage or configuration errors. A `run-manifest.json` is written to the output
//! directory for every run that gets past argument and config parsing.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entropy_solver::{
    apriori_report, contraction_gap, entropy_residual, solve_with, BumpTest, ProblemSpec, SolveOptions, Trajectory,
};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::harness::{self, SweepConfig, SweepResult};
use crate::levy::FractionalOrder;
use crate::nonlinearity::Nonlinearity;
use crate::spectral_oracle::grid_l1_error;

pub const PROBLEM_SCHEMA: &str = "problem/v1";
pub const MANIFEST_SCHEMA: &str = "run-manifest/v1";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fracdeg", version, about = "Solvers, oracles and sweeps for fractional degenerate convection-diffusion")]
pub struct Cli {
    /// More progress output on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Paths {
    /// Config file (`problem/v1`, or `sweep-config/v1` for `sweep`).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem; writes the sampled trajectory and the a priori report.
    Solve(Paths),
    /// Max principle, L¹/BV non-increase and L¹ contraction against a second datum.
    VerifyInvariants(Paths),
    /// Discrete entropy inequality over a family of constants and test functions.
    EntropyCheck(Paths),
    /// Run a parameter sweep.
    Sweep(Paths),
    /// Solver against the spectral oracle for the linear box example.
    OracleCompare(Paths),
    /// Merge sweep results into one CSV and Markdown summary.
    Report {
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// `sweep-result/v1` files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Solve(_) => "solve",
            Self::VerifyInvariants(_) => "verify-invariants",
            Self::EntropyCheck(_) => "entropy-check",
            Self::Sweep(_) => "sweep",
            Self::OracleCompare(_) => "oracle-compare",
            Self::Report { .. } => "report",
        }
    }
}

/// Initial data on the window `[−half_width, half_width]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `γ 1_{[−γ, γ]}`
    Box { gamma: f64 },
    /// `values[i]` on `[edges[i], edges[i+1])`.
    Steps { edges: Vec<f64>, values: Vec<f64> },
    /// `height · exp(1 − 1/(1 − s²))`, `s = (x − center)/width`.
    Bump { center: f64, width: f64, height: f64 },
}

impl InitialProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Box { gamma } if !(*gamma > 0.0) => Err(Error::Config(format!("box γ must be positive, got {gamma}"))),
            Self::Steps { edges, values } => {
                if edges.len() != values.len() + 1 || values.is_empty() {
                    return Err(Error::Config("steps need one more edge than values".into()));
                }
                if edges.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Config("step edges must increase".into()));
                }
                Ok(())
            }
            Self::Bump { width, .. } if !(*width > 0.0) => Err(Error::Config("bump width must be positive".into())),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Box { gamma } => {
                if x.abs() < *gamma {
                    *gamma
                } else {
                    0.0
                }
            }
            Self::Steps { edges, values } => edges
                .windows(2)
                .position(|w| w[0] <= x && x < w[1])
                .map(|i| values[i])
                .unwrap_or(0.0),
            Self::Bump { center, width, height } => {
                let s = (x - center) / width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            }
        }
    }

    pub fn on_grid(&self, half_width: f64, cells: usize) -> GridFunction {
        GridFunction::from_fn(-half_width, half_width, cells, |x| self.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub center: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyConfig {
    pub ks: Vec<f64>,
    pub tests: Vec<TestSpec>,
    /// Allowed negative part `ε` of the residual.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Largest accepted L¹ error over the stored samples.
    pub tolerance: f64,
}

fn default_cells() -> usize {
    256
}

fn default_half_width() -> f64 {
    4.0
}

fn default_padding() -> f64 {
    0.25
}

fn zero() -> Nonlinearity {
    Nonlinearity::Zero
}

/// `problem/v1`: one Cauchy problem on a window, plus optional check settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema: String,
    pub alpha: f64,
    #[serde(default = "zero")]
    pub flux: Nonlinearity,
    pub diffusion: Nonlinearity,
    pub initial: InitialProfile,
    /// Second datum for the contraction check.
    #[serde(default)]
    pub comparison: Option<InitialProfile>,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    pub horizon: f64,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_padding")]
    pub padding: f64,
    #[serde(default)]
    pub entropy: Option<EntropyConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
        if found != PROBLEM_SCHEMA {
            return Err(Error::Schema {
                found: found.into(),
                expected: PROBLEM_SCHEMA.into(),
            });
        }
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.initial.validate()?;
        if let Some(c) = &cfg.comparison {
            c.validate()?;
        }
        if cfg.cells < 3 || !(cfg.half_width > 0.0) {
            return Err(Error::Config("need at least 3 cells and a positive half-width".into()));
        }
        // spec-level checks (order range, monotone diffusion, horizon)
        cfg.spec()?.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn spec(&self) -> Result<ProblemSpec> {
        self.spec_with(&self.initial)
    }

    fn spec_with(&self, initial: &InitialProfile) -> Result<ProblemSpec> {
        Ok(ProblemSpec {
            alpha: FractionalOrder::new(self.alpha).map_err(|e| Error::Config(e.to_string()))?,
            flux: self.flux.clone(),
            diffusion: self.diffusion.clone(),
            u0: initial.on_grid(self.half_width, self.cells),
            horizon: self.horizon,
            r: self.r,
        })
    }

    fn options(&self, store_all: bool) -> SolveOptions {
        SolveOptions {
            store_all,
            padding: self.padding,
            ..SolveOptions::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub config: Option<PathBuf>,
    /// SHA-256 of the config file bytes.
    pub config_sha256: Option<String>,
    pub version: String,
    pub schemas: Vec<String>,
    pub wall_time_seconds: f64,
    pub verdict: String,
    pub error: Option<String>,
    pub artifacts: Vec<PathBuf>,
}

/// Outcome of a subcommand body.
struct Outcome {
    passed: bool,
    artifacts: Vec<PathBuf>,
    summary: String,
}

struct Run {
    out: PathBuf,
    verbose: u8,
    artifacts: Vec<PathBuf>,
}

impl Run {
    fn log(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbose >= level {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<PathBuf> {
        let path = self.out.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.push(path.clone());
        Ok(path)
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        self.write(name, serde_json::to_string_pretty(value)?)
    }

    fn finish(&mut self, passed: bool, summary: String) -> Outcome {
        Outcome {
            passed,
            artifacts: std::mem::take(&mut self.artifacts),
            summary,
        }
    }
}

/// Parse `argv` (including the program name) and run; returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    run(cli)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn run(cli: Cli) -> i32 {
    let start = Instant::now();
    let name = cli.command.name();
    let (config, out) = match &cli.command {
        Command::Report { out, .. } => (None, out.clone()),
        Command::Solve(p)
        | Command::VerifyInvariants(p)
        | Command::EntropyCheck(p)
        | Command::Sweep(p)
        | Command::OracleCompare(p) => (Some(p.config.clone()), p.out.clone()),
    };
    let config_bytes = match &config {
        Some(path) => match fs::read(path) {
            Ok(b) => Some(b),
            Err(e) => {
                eprintln!("error: cannot read config {}: {e}", path.display());
                return EXIT_USAGE;
            }
        },
        None => None,
    };
    let text = config_bytes.as_deref().map(String::from_utf8_lossy);
    // parse before doing any work: a bad config is a usage error and leaves no manifest
    let parsed = match (&cli.command, &text) {
        (Command::Sweep(_), Some(t)) => SweepConfig::from_json(t).map(Parsed::Sweep),
        (Command::Report { .. }, _) => Ok(Parsed::None),
        (_, Some(t)) => ProblemConfig::from_json(t).map(Parsed::Problem),
        (_, None) => Err(Error::Config("missing config".into())),
    };
    let parsed = match parsed {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = fs::create_dir_all(&out) {
        eprintln!("error: cannot create output directory {}: {e}", out.display());
        return EXIT_USAGE;
    }
    let mut ctx = Run {
        out: out.clone(),
        verbose: cli.verbose,
        artifacts: Vec::new(),
    };
    let result = match (&cli.command, parsed) {
        (Command::Solve(_), Parsed::Problem(p)) => solve_cmd(&mut ctx, &p),
        (Command::VerifyInvariants(_), Parsed::Problem(p)) => verify_cmd(&mut ctx, &p),
        (Command::EntropyCheck(_), Parsed::Problem(p)) => entropy_cmd(&mut ctx, &p),
        (Command::OracleCompare(_), Parsed::Problem(p)) => oracle_cmd(&mut ctx, &p),
        (Command::Sweep(_), Parsed::Sweep(s)) => sweep_cmd(&mut ctx, s),
        (Command::Report { inputs, .. }, Parsed::None) => report_cmd(&mut ctx, inputs),
        _ => unreachable!("config kind follows the subcommand"),
    };
    let (code, verdict, error, artifacts) = match result {
        Ok(o) => {
            ctx.log(1, &o.summary);
            let code = if o.passed { EXIT_PASS } else { EXIT_FAIL };
            (code, if o.passed { "PASS" } else { "FAIL" }, None, o.artifacts)
        }
        Err(e @ (Error::Config(_) | Error::Schema { .. } | Error::Unsupported(_))) => {
            // the config does not fit the subcommand
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            (EXIT_FAIL, "FAIL", Some(e.to_string()), std::mem::take(&mut ctx.artifacts))
        }
    };
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA.into(),
        command: name.into(),
        config,
        config_sha256: config_bytes.as_deref().map(sha256_hex),
        version: env!("CARGO_PKG_VERSION").into(),
        schemas: vec![
            PROBLEM_SCHEMA.into(),
            harness::CONFIG_SCHEMA.into(),
            harness::RESULT_SCHEMA.into(),
            MANIFEST_SCHEMA.into(),
        ],
        wall_time_seconds: start.elapsed().as_secs_f64(),
        verdict: verdict.into(),
        error,
        artifacts,
    };
    let written = serde_json::to_string_pretty(&manifest)
        .map_err(Error::from)
        .and_then(|s| fs::write(out.join("run-manifest.json"), s).map_err(Error::from));
    if let Err(e) = written {
        eprintln!("error: cannot write manifest: {e}");
        return EXIT_FAIL;
    }
    println!("{name}: {verdict}");
    code
}

enum Parsed {
    Problem(ProblemConfig),
    Sweep(SweepConfig),
    None,
}

fn solve_traj(ctx: &Run, p: &ProblemConfig, store_all: bool) -> Result<Trajectory> {
    let spec = p.spec()?;
    ctx.log(1, format!("solving α = {} on {} cells up to T = {}", p.alpha, p.cells, p.horizon));
    let traj = solve_with(&spec, &p.options(store_all))?;
    ctx.log(2, format!("dt = {:e}, CFL bound {:e}", traj.dt, traj.dt_cfl));
    Ok(traj)
}

fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "x", "u"])?;
    for (t, g) in traj.samples() {
        for (i, v) in g.values.iter().enumerate() {
            w.write_record([t.to_string(), g.center(i).to_string(), v.to_string()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn solve_cmd(ctx: &mut Run, p: &ProblemConfig) -> Result<Outcome> {
    let traj = solve_traj(ctx, p, false)?;
    let u0 = p.spec()?.u0;
    let report = apriori_report(&traj, &u0);
    ctx.write("trajectory.csv", trajectory_csv(&traj)?)?;
    ctx.write_json("apriori.json", &report)?;
    let passed = report.passed();
    Ok(ctx.finish(passed, format!("{} a priori violations", report.violations.len())))
}

#[derive(Serialize)]
struct InvariantsArtifact<'a> {
    report: &'a crate::entropy_solver::AprioriReport,
    contraction: Option<crate::entropy_solver::ContractionGap>,
}

fn verify_cmd(ctx: &mut Run, p: &ProblemConfig) -> Result<Outcome> {
    let traj = solve_traj(ctx, p, false)?;
    let spec = p.spec()?;
    let report = apriori_report(&traj, &spec.u0);
    let contraction = match &p.comparison {
        Some(c) => Some(contraction_gap(&spec, &p.spec_with(c)?)?),
        None => None,
    };
    ctx.write_json(
        "invariants.json",
        &InvariantsArtifact {
            report: &report,
            contraction: contraction.clone(),
        },
    )?;
    let contraction_ok = contraction.as_ref().is_none_or(|c| c.passed());
    let passed = report.passed() && contraction_ok;
    Ok(ctx.finish(
        passed,
        format!("{} a priori violations, contraction ok: {contraction_ok}", report.violations.len()),
    ))
}

#[derive(Serialize)]
struct EntropyRow {
    k: f64,
    center: f64,
    half_width: f64,
    residual: f64,
}

fn entropy_cmd(ctx: &mut Run, p: &ProblemConfig) -> Result<Outcome> {
    let Some(e) = &p.entropy else {
        return Err(Error::Config("entropy-check needs an `entropy` section".into()));
    };
    let traj = solve_traj(ctx, p, true)?;
    let r = traj.r_used.unwrap_or(traj.initial_state().dx);
    let mut rows = Vec::new();
    for &k in &e.ks {
        for t in &e.tests {
            let test = BumpTest {
                center: t.center,
                half_width: t.half_width,
                t_end: p.horizon,
            };
            let residual = entropy_residual(&traj, k, &test, r, None)?;
            ctx.log(2, format!("k = {k}, bump at {}: {residual:e}", t.center));
            rows.push(EntropyRow {
                k,
                center: t.center,
                half_width: t.half_width,
                residual,
            });
        }
    }
    let worst = rows.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min);
    ctx.write_json("entropy.json", &rows)?;
    Ok(ctx.finish(
        worst >= -e.tolerance,
        format!("smallest residual {worst:e}, tolerance {:e}", e.tolerance),
    ))
}

#[derive(Serialize)]
struct OracleArtifact {
    times: Vec<f64>,
    /// Over the whole line, counting the exact mass outside the grid.
    errors: Vec<f64>,
    window_errors: Vec<f64>,
    max_error: f64,
    tolerance: f64,
}

fn oracle_cmd(ctx: &mut Run, p: &ProblemConfig) -> Result<Outcome> {
    let (Nonlinearity::Zero, Nonlinearity::Linear { slope }, InitialProfile::Box { gamma }) = (&p.flux, &p.diffusion, &p.initial)
    else {
        return Err(Error::Unsupported(
            "oracle-compare needs zero flux, linear diffusion and box data".into(),
        ));
    };
    let tolerance = p.oracle.as_ref().map(|o| o.tolerance).unwrap_or(f64::INFINITY);
    let traj = solve_traj(ctx, p, false)?;
    let (mut times, mut errors, mut window_errors) = (Vec::new(), Vec::new(), Vec::new());
    for (t, g) in traj.samples() {
        let e = grid_l1_error(g, p.alpha, t * slope, *gamma)?;
        times.push(t);
        errors.push(e.total());
        window_errors.push(e.window);
    }
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    ctx.write_json(
        "oracle.json",
        &OracleArtifact {
            times,
            errors,
            window_errors,
            max_error,
            tolerance,
        },
    )?;
    Ok(ctx.finish(max_error <= tolerance, format!("max L1 error {max_error:e}")))
}

fn sweep_cmd(ctx: &mut Run, mut cfg: SweepConfig) -> Result<Outcome> {
    let path = ctx.out.join("sweep.json");
    if cfg.output.is_none() {
        cfg.output = Some(path.clone());
    }
    ctx.log(1, format!("running {:?} sweep over {} points", cfg.kind, cfg.ladder.points().len()));
    let result = harness::run_sweep(&cfg)?;
    harness::persist(&result, &path)?;
    ctx.artifacts.push(path.clone());
    ctx.artifacts.push(path.with_extension("csv"));
    for v in result.verdicts.iter().filter(|v| !v.passed) {
        eprintln!("FAIL {}: {}", v.name, v.detail);
    }
    let passed = result.passed();
    Ok(ctx.finish(passed, format!("{} rows, {} verdicts", result.rows.len(), result.verdicts.len())))
}

fn report_cmd(ctx: &mut Run, inputs: &[PathBuf]) -> Result<Outcome> {
    let results: Vec<(PathBuf, SweepResult)> = inputs
        .iter()
        .map(|p| harness::load(p).map(|r| (p.clone(), r)))
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["source", "kind", "engine", "rows", "min_ratio", "max_ratio", "slope", "residual", "verdict"])?;
    let mut md = String::from("| source | kind | rows | ratio range | slope | verdict |\n|---|---|---|---|---|---|\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_default();
    for (path, r) in &results {
        let verdict = if r.passed() { "PASS" } else { "FAIL" };
        let kind = serde_json::to_value(r.kind)?.as_str().unwrap_or_default().to_string();
        let engine = serde_json::to_value(r.engine)?.as_str().unwrap_or_default().to_string();
        let source = path.display().to_string();
        w.write_record([
            source.clone(),
            kind.clone(),
            engine,
            r.rows.len().to_string(),
            opt(r.ratio.min),
            opt(r.ratio.max),
            opt(r.fit.map(|f| f.slope)),
            opt(r.fit.map(|f| f.residual)),
            verdict.into(),
        ])?;
        md.push_str(&format!(
            "| {source} | {kind} | {} | {} .. {} | {} | {verdict} |\n",
            r.rows.len(),
            opt(r.ratio.min),
            opt(r.ratio.max),
            opt(r.fit.map(|f| f.slope)),
        ));
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    ctx.write("report.csv", bytes)?;
    ctx.write("report.md", md)?;
    let passed = results.iter().all(|(_, r)| r.passed());
    Ok(ctx.finish(passed, format!("{} results merged", results.len())))
}

/// Reads a config file and returns its SHA-256, as recorded in the manifest.
pub fn config_digest(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}
