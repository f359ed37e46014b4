//! Parameter sweeps: empirical distances from the solver or the spectral oracle, the matching
//! theoretical moduli, log-log fits and ratio verdicts, plus JSON/CSV persistence.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy_solver::{apriori_report, contraction_gap, solve_with, ProblemSpec, SolveOptions, Trajectory};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::levy::FractionalOrder;
use crate::moduli::{
    kuznetsov_modulus, lip_alpha_bound, nonlinearity_modulus, time_modulus, DiffusionNorms, ExampleScale,
    InitialDataStats, KuznetsovInput, NonlinearityGap, RadiusChoice, DEFAULT_SAMPLES,
};
use crate::nonlinearity::Nonlinearity;
use crate::spectral_oracle::{box_data_stats, l1_distance_linear, l1_time_increment, lip_alpha_estimate};

pub const CONFIG_SCHEMA: &str = "sweep-config/v1";
pub const RESULT_SCHEMA: &str = "sweep-result/v1";

/// Minimum number of ladder points.
pub const MIN_LADDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Nonlinearity,
    AlphaLipschitz,
    TimeModulus,
    Kuznetsov,
    LimitAlpha,
    Invariants,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Solver,
    Spectral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Ladder {
    /// `start · ratio^k`, `k = 0..points`
    Geometric { start: f64, ratio: f64, points: usize },
    Values { values: Vec<f64> },
}

impl Ladder {
    pub fn points(&self) -> Vec<f64> {
        match self {
            Self::Geometric { start, ratio, points } => (0..*points).map(|k| start * ratio.powi(k as i32)).collect(),
            Self::Values { values } => values.clone(),
        }
    }
}

/// Which quantity the ladder of an alpha-lipschitz sweep runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LadderOver {
    #[default]
    M,
    Gamma,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn half() -> f64 {
    0.5
}

fn default_delta() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    /// `α`, or `λ` for alpha-lipschitz; unused by limit-alpha and invariants.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub d: usize,
    /// Diffusion coefficient where the ladder does not set it.
    #[serde(default = "one")]
    pub a: f64,
    /// `b = pair_ratio · a` for nonlinearity sweeps, `s = pair_ratio · t` for time sweeps.
    #[serde(default = "half")]
    pub pair_ratio: f64,
    /// Half-step `δ` of the difference quotient in the order.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub ladder_over: LadderOver,
}

fn default_cells() -> usize {
    256
}

fn default_padding() -> f64 {
    0.25
}

fn default_diffusion() -> Nonlinearity {
    Nonlinearity::Linear { slope: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    #[serde(default = "default_cells")]
    pub cells: usize,
    /// Half-width of the window; `4γ` when absent.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default = "default_padding")]
    pub padding: f64,
    #[serde(default = "zero_flux")]
    pub flux: Nonlinearity,
    /// Base diffusion; the ladder scales it.
    #[serde(default = "default_diffusion")]
    pub diffusion: Nonlinearity,
}

fn zero_flux() -> Nonlinearity {
    Nonlinearity::Zero
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            half_width: None,
            padding: default_padding(),
            flux: zero_flux(),
            diffusion: default_diffusion(),
        }
    }
}

fn default_floor() -> f64 {
    0.01
}

fn default_ceiling() -> f64 {
    100.0
}

fn default_m0() -> f64 {
    0.25
}

fn default_gamma0() -> f64 {
    4.0
}

fn default_slack() -> f64 {
    0.1
}

fn default_stability() -> f64 {
    2.0
}

/// Verdict thresholds. `m0` and `gamma0` are empirical choices, not values from the theory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
    #[serde(default = "default_m0")]
    pub m0: f64,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    /// Relative slack for the monotone-distance verdict of limit sweeps.
    #[serde(default = "default_slack")]
    pub limit_slack: f64,
    /// Allowed drop of the ratio floor when the ladder grows by one point.
    #[serde(default = "default_stability")]
    pub stability: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            floor: default_floor(),
            ceiling: default_ceiling(),
            m0: default_m0(),
            gamma0: default_gamma0(),
            limit_slack: default_slack(),
            stability: default_stability(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeExpectation {
    pub value: f64,
    pub tolerance: f64,
}

fn default_cases() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema: String,
    pub kind: ExperimentKind,
    pub engine: Engine,
    pub ladder: Ladder,
    pub fixed: FixedParams,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub expect_slope: Option<SlopeExpectation>,
    /// Random cases per ladder point of an invariants sweep.
    #[serde(default = "default_cases")]
    pub cases: usize,
    #[serde(default)]
    pub seed: u64,
    /// Where a partial result is dumped if the sweep aborts.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn check_schema(value: &serde_json::Value, expected: &str) -> Result<()> {
    let found = value.get("schema").and_then(|s| s.as_str()).unwrap_or("<missing>");
    if found != expected {
        return Err(Error::Schema {
            found: found.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(())
}

impl SweepConfig {
    /// Parse and validate; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        check_schema(&value, CONFIG_SCHEMA)?;
        let cfg: Self = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    fn alpha(&self) -> Result<f64> {
        match self.fixed.alpha {
            Some(a) if (0.0..=2.0).contains(&a) && a > 0.0 => Ok(a),
            Some(a) => config_error(format!("fixed.alpha must lie in (0, 2], got {a}")),
            None => config_error(format!("{:?} sweeps need fixed.alpha", self.kind)),
        }
    }

    fn half_width(&self) -> f64 {
        self.solver.half_width.unwrap_or(4.0 * self.fixed.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Schema {
                found: self.schema.clone(),
                expected: CONFIG_SCHEMA.into(),
            });
        }
        let pts = self.ladder.points();
        if pts.len() < MIN_LADDER {
            return config_error(format!("ladders need at least {MIN_LADDER} points, got {}", pts.len()));
        }
        if pts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return config_error("ladder points must be finite and positive");
        }
        if self.fixed.d != 1 {
            return Err(Error::Unsupported(format!(
                "only d = 1 is implemented, got d = {}",
                self.fixed.d
            )));
        }
        let f = &self.fixed;
        if !(f.gamma > 0.0 && f.horizon > 0.0 && f.a > 0.0) {
            return config_error("γ, T and a must be positive");
        }
        if !(f.pair_ratio > 0.0 && f.pair_ratio <= 1.0) {
            return config_error(format!("pair_ratio must lie in (0, 1], got {}", f.pair_ratio));
        }
        let t = &self.thresholds;
        if !(t.floor >= 0.0 && t.ceiling > t.floor && t.m0 > 0.0 && t.gamma0 > 0.0) {
            return config_error("thresholds need 0 ≤ floor < ceiling and positive m0, gamma0");
        }
        if self.solver.cells < 8 || !(self.half_width() > f.gamma) {
            return config_error("the solver window needs at least 8 cells and must contain the box");
        }
        if self.engine == Engine::Spectral
            && (!self.solver.flux.is_zero()
                || !matches!(self.solver.diffusion, Nonlinearity::Linear { slope } if slope > 0.0))
        {
            return config_error("engine = spectral needs zero flux and a linear increasing diffusion");
        }
        match self.kind {
            ExperimentKind::Nonlinearity | ExperimentKind::Kuznetsov => {
                self.alpha()?;
            }
            ExperimentKind::TimeModulus => {
                self.alpha()?;
                if self.engine == Engine::Solver {
                    let j = f.pair_ratio * crate::entropy_solver::SAMPLE_INTERVALS as f64;
                    if (j - j.round()).abs() > 1e-9 {
                        return config_error("solver time sweeps need pair_ratio on the 1/16 sample grid");
                    }
                }
            }
            ExperimentKind::AlphaLipschitz => {
                let l = self.alpha()?;
                if !(f.delta > 0.0 && l - f.delta > 0.0 && l + f.delta < 2.0) {
                    return config_error(format!("λ ± δ must stay in (0, 2), got λ = {l}, δ = {}", f.delta));
                }
                match f.ladder_over {
                    LadderOver::M if f.gamma > t.gamma0 => {
                        return config_error(format!("M ladders need γ ≤ γ0 = {}, got {}", t.gamma0, f.gamma));
                    }
                    LadderOver::Gamma if f.horizon * f.a > t.m0 => {
                        return config_error(format!("γ ladders need M = T a ≤ M0 = {}", t.m0));
                    }
                    _ => {}
                }
            }
            ExperimentKind::LimitAlpha => {
                if self.engine != Engine::Solver {
                    return config_error("limit-alpha sweeps run on the solver engine");
                }
                limit_direction(&pts)?;
            }
            ExperimentKind::Invariants => {
                if self.engine != Engine::Solver {
                    return config_error("invariants sweeps run on the solver engine");
                }
                if self.cases == 0 || pts.iter().any(|p| p.fract() != 0.0 || *p < 8.0) {
                    return config_error("invariants ladders list cell counts (integers ≥ 8) and need cases > 0");
                }
            }
        }
        Ok(())
    }
}

/// One ladder point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub params: Vec<f64>,
    pub empirical: f64,
    pub theoretical: f64,
    /// `empirical / theoretical`, absent when the theoretical value is zero.
    pub ratio: Option<f64>,
}

impl Row {
    pub fn new(params: Vec<f64>, empirical: f64, theoretical: f64) -> Self {
        let ratio = (theoretical != 0.0 && theoretical.is_finite()).then(|| empirical / theoretical);
        Self {
            params,
            empirical,
            theoretical,
            ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the fit errors in log space.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioBounds {
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub excluded: usize,
    pub floor: f64,
    pub ceiling: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub schema: String,
    pub kind: ExperimentKind,
    pub engine: Engine,
    pub param_names: Vec<String>,
    /// Column of `params` used as the abscissa of the fit.
    pub abscissa: Option<usize>,
    pub rows: Vec<Row>,
    pub fit: Option<Fit>,
    pub ratio: RatioBounds,
    pub verdicts: Vec<Verdict>,
    pub seed: u64,
}

impl SweepResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    /// `(abscissa, empirical)` pairs of the fit.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        match self.abscissa {
            Some(c) => self.rows.iter().map(|r| (r.params[c], r.empirical)).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.rows.first().map(|r| r.params.len()).unwrap_or(self.param_names.len());
        let mut header: Vec<String> = (1..=n).map(|i| format!("param_{i}")).collect();
        header.extend(["empirical", "theoretical", "ratio"].map(String::from));
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.params.iter().map(|p| p.to_string()).collect();
            rec.push(r.empirical.to_string());
            rec.push(r.theoretical.to_string());
            rec.push(r.ratio.map(|v| v.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Ordinary least squares on `(ln h, ln value)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<Fit> {
    if points.len() < 3 {
        return Err(Error::Domain(format!("a fit needs at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(h, v)| !(*h > 0.0 && *v > 0.0 && h.is_finite() && v.is_finite())) {
        return Err(Error::Domain(format!("log-log fit needs positive values, got {p:?}")));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all abscissae coincide".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(Fit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
        points: points.len(),
    })
}

/// Min and max of the row ratios; rows without a ratio are excluded and counted.
pub fn ratio_bounds(rows: &[Row], floor: f64, ceiling: f64) -> RatioBounds {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let min = ratios.iter().copied().reduce(f64::min);
    let max = ratios.iter().copied().reduce(f64::max);
    let passed = match (min, max) {
        (Some(lo), Some(hi)) => lo > floor && hi < ceiling,
        _ => true,
    };
    RatioBounds {
        min,
        max,
        excluded: rows.len() - ratios.len(),
        floor,
        ceiling,
        passed,
    }
}

/// Floor of the last three ratios against the same floor one ladder point earlier.
pub fn floor_stability(rows: &[Row]) -> Option<(f64, f64)> {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    if ratios.len() < 4 {
        return None;
    }
    let n = ratios.len();
    let floor = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    Some((floor(&ratios[n - 4..n - 1]), floor(&ratios[n - 3..])))
}

fn box_datum(gamma: f64, half_width: f64, cells: usize) -> GridFunction {
    GridFunction::from_fn(-half_width, half_width, cells, |x| if x.abs() < gamma { gamma } else { 0.0 })
}

fn trajectory(
    alpha: f64,
    flux: &Nonlinearity,
    diffusion: &Nonlinearity,
    u0: &GridFunction,
    horizon: f64,
    padding: f64,
) -> Result<Trajectory> {
    let spec = ProblemSpec {
        alpha: FractionalOrder::new(alpha)?,
        flux: flux.clone(),
        diffusion: diffusion.clone(),
        u0: u0.clone(),
        horizon,
        r: None,
    };
    solve_with(
        &spec,
        &SolveOptions {
            store_all: false,
            padding,
            ..SolveOptions::default()
        },
    )
}

/// `max_j ∥u(t_j) − v(t_j)∥_{L¹}` over the stored samples, restricted to `range` of each level.
fn sample_distance(u: &Trajectory, v: &Trajectory, range: Option<std::ops::Range<usize>>) -> Result<f64> {
    let mut best: f64 = 0.0;
    for ((_, a), (_, b)) in u.samples().into_iter().zip(v.samples()) {
        let d = match &range {
            Some(r) => a.slice(r.clone()).l1_distance(&b.slice(r.clone()))?,
            None => a.l1_distance(b)?,
        };
        best = best.max(d);
    }
    Ok(best)
}

struct Context<'a> {
    cfg: &'a SweepConfig,
    u0: GridFunction,
}

impl Context<'_> {
    fn stats(&self, gamma: f64) -> Result<InitialDataStats> {
        match self.cfg.engine {
            Engine::Spectral => box_data_stats(1, gamma),
            Engine::Solver => Ok(InitialDataStats::from_grid(&self.u0)),
        }
    }

    /// Diffusion coefficient of the base function, as seen by the spectral oracle.
    fn base_slope(&self) -> f64 {
        match self.cfg.solver.diffusion {
            Nonlinearity::Linear { slope } => slope,
            _ => 1.0,
        }
    }

    fn solve(&self, alpha: f64, scale: f64, horizon: f64, u0: &GridFunction) -> Result<Trajectory> {
        let s = &self.cfg.solver;
        trajectory(alpha, &s.flux, &s.diffusion.scaled(scale), u0, horizon, s.padding)
    }

    fn nonlinearity_row(&self, h: f64) -> Result<Row> {
        let f = &self.cfg.fixed;
        let alpha = self.cfg.alpha()?;
        let (a, b) = (h, h * f.pair_ratio);
        let stats = self.stats(f.gamma)?;
        let (empirical, gap) = match self.cfg.engine {
            Engine::Spectral => {
                let k = self.base_slope();
                (
                    l1_distance_linear(k * a, k * b, alpha, f.gamma, f.horizon)?,
                    NonlinearityGap::constant(k * a, k * b, alpha),
                )
            }
            Engine::Solver => {
                let u = self.solve(alpha, a, f.horizon, &self.u0)?;
                let v = self.solve(alpha, b, f.horizon, &self.u0)?;
                let s = &self.cfg.solver;
                let gap = NonlinearityGap::sample(
                    &s.flux,
                    &s.flux,
                    &s.diffusion.scaled(a),
                    &s.diffusion.scaled(b),
                    alpha,
                    stats.lo.min(0.0),
                    stats.hi.max(0.0),
                    DEFAULT_SAMPLES,
                )?;
                (sample_distance(&u, &v, None)?, gap)
            }
        };
        let k = self.base_slope();
        let omega = ExampleScale::Omega {
            alpha,
            a: k * a,
            b: k * b,
        }
        .value()?;
        // transport gap is zero: both problems share the flux
        let theoretical = nonlinearity_modulus(f.horizon, alpha, &stats, &gap)?.value + f.horizon * stats.bv * gap.flux;
        Ok(Row::new(vec![h, a, b, omega], empirical, theoretical))
    }

    fn time_row(&self, t: f64) -> Result<Row> {
        let f = &self.cfg.fixed;
        let alpha = self.cfg.alpha()?;
        let s = t * f.pair_ratio;
        let stats = self.stats(f.gamma)?;
        let (empirical, norms) = match self.cfg.engine {
            Engine::Spectral => {
                let a = self.base_slope() * f.a;
                (l1_time_increment(a, alpha, f.gamma, t, s)?, DiffusionNorms::constant(a, alpha))
            }
            Engine::Solver => {
                let u = self.solve(alpha, f.a, t, &self.u0)?;
                let j = (f.pair_ratio * crate::entropy_solver::SAMPLE_INTERVALS as f64).round() as usize;
                let samples = u.samples();
                let d = samples[samples.len() - 1].1.l1_distance(samples[j].1)?;
                let sv = &self.cfg.solver;
                let norms = DiffusionNorms::sample(
                    &sv.flux,
                    &sv.diffusion.scaled(f.a),
                    alpha,
                    stats.lo.min(0.0),
                    stats.hi.max(0.0),
                    DEFAULT_SAMPLES,
                )?;
                (d, norms)
            }
        };
        let m = time_modulus(alpha, &stats, &norms, t, s)?;
        // the unit order adds a linear term to the logarithmic one
        let linear = if alpha == 1.0 { (t - s).abs() } else { 0.0 };
        let sigma = ExampleScale::Omega { alpha, a: t, b: s }.value()? + linear;
        Ok(Row::new(vec![t, s, sigma], empirical, m.diffusion.value + m.transport))
    }

    fn lipschitz_row(&self, h: f64) -> Result<Row> {
        let f = &self.cfg.fixed;
        let lambda = self.cfg.alpha()?;
        let (m, gamma) = match f.ladder_over {
            LadderOver::M => (h, f.gamma),
            LadderOver::Gamma => (f.horizon * f.a, h),
        };
        // M = T ∥φ′∥ fixes the coefficient for the given horizon
        let a = m / f.horizon;
        let k = self.base_slope();
        let empirical = match self.cfg.engine {
            Engine::Spectral => lip_alpha_estimate(lambda, f.delta, a, gamma, f.horizon)?,
            Engine::Solver => {
                let hw = self.cfg.solver.half_width.unwrap_or(4.0 * gamma);
                let u0 = box_datum(gamma, hw, self.cfg.solver.cells);
                let up = self.solve(lambda + f.delta, a / k, f.horizon, &u0)?;
                let dn = self.solve(lambda - f.delta, a / k, f.horizon, &u0)?;
                sample_distance(&up, &dn, None)? / (2.0 * f.delta)
            }
        };
        let stats = match self.cfg.engine {
            Engine::Spectral => box_data_stats(1, gamma)?,
            Engine::Solver => {
                let hw = self.cfg.solver.half_width.unwrap_or(4.0 * gamma);
                InitialDataStats::from_grid(&box_datum(gamma, hw, self.cfg.solver.cells))
            }
        };
        let theoretical = lip_alpha_bound(lambda, m, &stats)?.value;
        let scale = match f.ladder_over {
            LadderOver::M => ExampleScale::SigmaTildeM { lambda, m },
            LadderOver::Gamma => ExampleScale::SigmaTildeGamma { lambda, gamma, d: 1 },
        }
        .value()?;
        Ok(Row::new(vec![h, m, gamma, scale], empirical, theoretical))
    }

    fn kuznetsov_row(&self, h: f64) -> Result<Row> {
        let f = &self.cfg.fixed;
        let alpha = self.cfg.alpha()?;
        let a = self.base_slope() * f.a;
        let input = KuznetsovInput {
            horizon: f.horizon,
            alpha,
            beta: alpha,
            gamma: f.gamma,
            gap: h,
            m: f.horizon * a.max(a + h),
        };
        let k = kuznetsov_modulus(&input, RadiusChoice::Optimize)?;
        let stats = box_data_stats(1, f.gamma)?;
        let theoretical = nonlinearity_modulus(f.horizon, alpha, &stats, &NonlinearityGap::constant(a + h, a, alpha))?.value;
        Ok(Row::new(vec![h, k.r], k.value, theoretical))
    }

    fn invariants_row(&self, index: usize, cells: f64) -> Result<Row> {
        let cells = cells as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed.wrapping_add(index as u64));
        let mut violations = 0usize;
        for _ in 0..self.cfg.cases {
            let (u, v) = random_case(&mut rng, cells, self.cfg.half_width(), self.cfg.fixed.horizon)?;
            violations += invariant_violations(&u, &v, self.cfg.solver.padding)?;
        }
        Ok(Row::new(vec![cells as f64, self.cfg.cases as f64], violations as f64, 0.0))
    }
}

/// Violations of the max principle, L¹/BV non-increase and L¹ contraction for one pair.
pub fn invariant_violations(u: &ProblemSpec, v: &ProblemSpec, padding: f64) -> Result<usize> {
    let opts = SolveOptions {
        padding,
        ..SolveOptions::default()
    };
    let mut count = 0;
    for spec in [u, v] {
        let traj = solve_with(spec, &opts)?;
        count += apriori_report(&traj, &spec.u0).violations.len();
    }
    if !contraction_gap(u, v)?.passed() {
        count += 1;
    }
    Ok(count)
}

fn random_flux(rng: &mut ChaCha8Rng) -> Nonlinearity {
    match rng.random_range(0..3) {
        0 => Nonlinearity::Burgers {
            scale: rng.random_range(-1.0..1.0),
        },
        1 => Nonlinearity::Linear {
            slope: rng.random_range(-1.0..1.0),
        },
        _ => Nonlinearity::Cubic {
            a1: rng.random_range(-1.0..1.0),
            a2: rng.random_range(-1.0..1.0),
            a3: rng.random_range(-0.5..0.5),
        },
    }
}

fn random_diffusion(rng: &mut ChaCha8Rng) -> Nonlinearity {
    match rng.random_range(0..3) {
        0 => Nonlinearity::Linear {
            slope: rng.random_range(0.0..1.0),
        },
        1 => Nonlinearity::Porous {
            coef: rng.random_range(0.0..1.0),
            exponent: rng.random_range(1.0..3.0),
        },
        _ => Nonlinearity::DeadZone {
            slope: rng.random_range(0.0..1.0),
            threshold: rng.random_range(0.0..0.5),
        },
    }
}

fn random_steps(rng: &mut ChaCha8Rng, half_width: f64, cells: usize, amplitude: f64) -> GridFunction {
    let pieces: Vec<f64> = (0..8).map(|_| rng.random_range(-amplitude..amplitude)).collect();
    // supported in the central half so the zero extension is visible
    GridFunction::from_fn(-half_width, half_width, cells, |x| {
        let s = (x + 0.5 * half_width) / half_width;
        if (0.0..1.0).contains(&s) {
            pieces[(s * 8.0) as usize]
        } else {
            0.0
        }
    })
}

/// Two problems with a random order, flux, diffusion and piecewise-constant data that share
/// everything but the initial datum.
pub fn random_case(rng: &mut ChaCha8Rng, cells: usize, half_width: f64, horizon: f64) -> Result<(ProblemSpec, ProblemSpec)> {
    let alpha = FractionalOrder::new(rng.random_range(0.2..1.8))?;
    let flux = random_flux(rng);
    let diffusion = random_diffusion(rng);
    let u0 = random_steps(rng, half_width, cells, 1.0);
    let bump = random_steps(rng, half_width, cells, 0.3);
    let v0 = GridFunction::new(
        u0.x0,
        u0.dx,
        u0.values.iter().zip(&bump.values).map(|(a, b)| a + b).collect(),
    )?;
    let u = ProblemSpec {
        alpha,
        flux,
        diffusion,
        u0,
        horizon,
        r: None,
    };
    let v = ProblemSpec { u0: v0, ..u.clone() };
    Ok((u, v))
}

/// Which local problem an order ladder approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitTarget {
    /// `α → 0`: `∂_t u + f(u)_x + φ(u) = 0`
    Zero,
    /// `α → 2`: `∂_t u + f(u)_x − φ(u)_xx = 0`
    Two,
}

fn limit_direction(ladder: &[f64]) -> Result<LimitTarget> {
    if ladder.iter().all(|&a| a > 0.0 && a < 1.0) {
        Ok(LimitTarget::Zero)
    } else if ladder.iter().all(|&a| a > 1.0 && a < 2.0) {
        Ok(LimitTarget::Two)
    } else {
        config_error("an order ladder must lie entirely in (0, 1) or entirely in (1, 2)")
    }
}

/// Problem data shared by every point of a limit sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSpec {
    pub flux: Nonlinearity,
    pub diffusion: Nonlinearity,
    pub u0: GridFunction,
    pub horizon: f64,
    pub padding: f64,
    /// Allowed relative increase between consecutive distances.
    pub slack: f64,
}

/// Distance of each order's solution to the local limit on the central half of the window.
pub fn limit_experiment(ladder: &[f64], spec: &LimitSpec) -> Result<SweepResult> {
    let target = limit_direction(ladder)?;
    let order = match target {
        LimitTarget::Zero => 0.0,
        LimitTarget::Two => 2.0,
    };
    let run = |alpha: f64| trajectory(alpha, &spec.flux, &spec.diffusion, &spec.u0, spec.horizon, spec.padding);
    let local = run(order)?;
    let n = spec.u0.len();
    let start = local.core.0 + n / 4;
    let window = start..start + n / 2;
    let rows: Vec<Row> = ladder
        .par_iter()
        .map(|&alpha| {
            let traj = run(alpha)?;
            let d = sample_distance(&traj, &local, Some(window.clone()))?;
            Ok(Row::new(vec![alpha], d, 0.0))
        })
        .collect::<Result<_>>()?;
    let monotone = rows
        .windows(2)
        .all(|w| w[1].empirical <= (1.0 + spec.slack) * w[0].empirical);
    let detail = format!(
        "distances toward α = {order}: {:?}",
        rows.iter().map(|r| r.empirical).collect::<Vec<_>>()
    );
    Ok(SweepResult {
        schema: RESULT_SCHEMA.into(),
        kind: ExperimentKind::LimitAlpha,
        engine: Engine::Solver,
        param_names: vec!["alpha".into()],
        abscissa: None,
        ratio: ratio_bounds(&rows, 0.0, f64::INFINITY),
        rows,
        fit: None,
        verdicts: vec![Verdict {
            name: "nonincreasing-distance".into(),
            passed: monotone,
            detail,
        }],
        seed: 0,
    })
}

fn param_names(cfg: &SweepConfig) -> (Vec<&'static str>, Option<usize>) {
    match cfg.kind {
        ExperimentKind::Nonlinearity => (vec!["h", "a", "b", "omega"], Some(3)),
        ExperimentKind::TimeModulus => (vec!["t", "s", "sigma"], Some(2)),
        ExperimentKind::AlphaLipschitz => (vec!["h", "m", "gamma", "sigma_tilde"], Some(3)),
        ExperimentKind::Kuznetsov => (vec!["h", "r"], Some(0)),
        ExperimentKind::LimitAlpha => (vec!["alpha"], None),
        ExperimentKind::Invariants => (vec!["cells", "cases"], None),
    }
}

/// Run every ladder point (concurrently, merged in ladder order) and attach the verdicts.
///
/// On failure the rows finished before the first failing point are written next to
/// `cfg.output` as `<name>.partial.json` before the error is returned.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let pts = cfg.ladder.points();
    if cfg.kind == ExperimentKind::LimitAlpha {
        let spec = LimitSpec {
            flux: cfg.solver.flux.clone(),
            diffusion: cfg.solver.diffusion.scaled(cfg.fixed.a),
            u0: box_datum(cfg.fixed.gamma, cfg.half_width(), cfg.solver.cells),
            horizon: cfg.fixed.horizon,
            padding: cfg.solver.padding,
            slack: cfg.thresholds.limit_slack,
        };
        let mut r = limit_experiment(&pts, &spec)?;
        r.seed = cfg.seed;
        return Ok(r);
    }
    let ctx = Context {
        cfg,
        u0: box_datum(cfg.fixed.gamma, cfg.half_width(), cfg.solver.cells),
    };
    let results: Vec<Result<Row>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, &h)| match cfg.kind {
            ExperimentKind::Nonlinearity => ctx.nonlinearity_row(h),
            ExperimentKind::TimeModulus => ctx.time_row(h),
            ExperimentKind::AlphaLipschitz => ctx.lipschitz_row(h),
            ExperimentKind::Kuznetsov => ctx.kuznetsov_row(h),
            ExperimentKind::Invariants => ctx.invariants_row(i, h),
            ExperimentKind::LimitAlpha => unreachable!("handled above"),
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                if let Some(out) = &cfg.output {
                    let partial = assemble(cfg, rows);
                    let _ = persist(&partial, &partial_path(out));
                }
                return Err(e);
            }
        }
    }
    Ok(assemble(cfg, rows))
}

fn partial_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    out.with_file_name(format!("{stem}.partial.json"))
}

fn assemble(cfg: &SweepConfig, rows: Vec<Row>) -> SweepResult {
    let (names, abscissa) = param_names(cfg);
    let t = &cfg.thresholds;
    let ratio = ratio_bounds(&rows, t.floor, t.ceiling);
    let mut verdicts = Vec::new();
    let mut fit = None;
    if cfg.kind == ExperimentKind::Invariants {
        let total: f64 = rows.iter().map(|r| r.empirical).sum();
        verdicts.push(Verdict {
            name: "zero-violations".into(),
            passed: total == 0.0,
            detail: format!("{total} violations over {} ladder points", rows.len()),
        });
    } else {
        verdicts.push(Verdict {
            name: "ratio-window".into(),
            passed: ratio.passed,
            detail: format!(
                "ratios in [{:?}, {:?}], floor {}, ceiling {}, {} excluded",
                ratio.min, ratio.max, ratio.floor, ratio.ceiling, ratio.excluded
            ),
        });
        if let Some((before, after)) = floor_stability(&rows) {
            verdicts.push(Verdict {
                name: "floor-stability".into(),
                passed: after * t.stability >= before,
                detail: format!("floor of last three ratios {after:e}, one point earlier {before:e}"),
            });
        }
        if let Some(c) = abscissa {
            let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.params[c], r.empirical)).collect();
            fit = fit_scaling(&pts).ok();
        }
        if let Some(want) = cfg.expect_slope {
            let (passed, detail) = match fit {
                Some(f) => (
                    (f.slope - want.value).abs() <= want.tolerance,
                    format!("slope {:.4} (residual {:.2e}), expected {} ± {}", f.slope, f.residual, want.value, want.tolerance),
                ),
                None => (false, "no fit: fewer than 3 positive points".into()),
            };
            verdicts.push(Verdict {
                name: "slope".into(),
                passed,
                detail,
            });
        }
    }
    SweepResult {
        schema: RESULT_SCHEMA.into(),
        kind: cfg.kind,
        engine: cfg.engine,
        param_names: names.into_iter().map(String::from).collect(),
        abscissa,
        rows,
        fit,
        ratio,
        verdicts,
        seed: cfg.seed,
    }
}

/// Writes `path` as JSON and the same rows as CSV next to it.
pub fn persist(result: &SweepResult, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(result)?)?;
    result.write_csv(fs::File::create(path.with_extension("csv"))?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<SweepResult> {
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    check_schema(&value, RESULT_SCHEMA)?;
    Ok(serde_json::from_value(value)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(kind: &str, engine: &str, extra: &str) -> String {
        format!(
            r#"{{"schema": "sweep-config/v1", "kind": "{kind}", "engine": "{engine}",
                "ladder": {{"kind": "geometric", "start": 0.25, "ratio": 0.5, "points": 4}},
                "fixed": {{"alpha": 1.5}}{extra}}}"#
        )
    }

    #[test]
    fn fit_recovers_power_laws() {
        let pts: Vec<(f64, f64)> = (1..6).map(|k| (2f64.powi(-k), 2f64.powi(-k))).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-14 && f.residual < 1e-14);
        let pts: Vec<(f64, f64)> = (1..6).map(|k| {
            let h = 2f64.powi(-k);
            (h, 3.0 * h * h)
        }).collect();
        let f = fit_scaling(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-13);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.residual < 1e-13);
    }

    #[test]
    fn log_factor_biases_slope_below_one() {
        let pts: Vec<(f64, f64)> = (4..=10).map(|k| {
            let h = 2f64.powi(-k);
            (h, h * h.ln().abs())
        }).collect();
        let f = fit_scaling(&pts).unwrap();
        // local slope is 1 + 1/ln h ∈ (0.64, 0.86) here; reference from numpy.polyfit
        assert!((f.slope - 0.782_970_871_533_898_5).abs() < 1e-12, "{}", f.slope);
        // curvature of ln|ln h| leaves a systematic residual
        assert!((f.residual - 0.039_809_607_673_134_41).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_scaling(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
        assert!(fit_scaling(&[(1.0, 1.0), (-2.0, 1.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn ratio_bounds_cases() {
        let rows: Vec<Row> = (1..5).map(|k| Row::new(vec![k as f64], k as f64, k as f64)).collect();
        let b = ratio_bounds(&rows, 0.01, 100.0);
        assert_eq!((b.min, b.max, b.excluded, b.passed), (Some(1.0), Some(1.0), 0, true));
        let zero: Vec<Row> = (1..5).map(|k| Row::new(vec![k as f64], 0.0, 0.0)).collect();
        let b = ratio_bounds(&zero, 0.01, 100.0);
        assert_eq!((b.min, b.excluded), (None, 4));
        let low = vec![Row::new(vec![1.0], 1e-3, 1.0), Row::new(vec![2.0], 1.0, 1.0)];
        assert!(!ratio_bounds(&low, 0.01, 100.0).passed);
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::from_json(&config("nonlinearity", "spectral", "")).is_ok());
        // unknown key
        let e = SweepConfig::from_json(&config("nonlinearity", "spectral", r#", "bogus": 1"#)).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
        // short ladder
        let short = config("nonlinearity", "spectral", "").replace("\"points\": 4", "\"points\": 3");
        assert!(matches!(SweepConfig::from_json(&short), Err(Error::Config(_))));
        // spectral needs linear diffusion
        let porous = config(
            "nonlinearity",
            "spectral",
            r#", "solver": {"diffusion": {"kind": "porous", "coef": 1.0, "exponent": 2.0}}"#,
        );
        assert!(matches!(SweepConfig::from_json(&porous), Err(Error::Config(_))));
        let wrong = config("nonlinearity", "spectral", "").replace("sweep-config/v1", "sweep-config/v2");
        match SweepConfig::from_json(&wrong) {
            Err(Error::Schema { found, expected }) => {
                assert_eq!((found.as_str(), expected.as_str()), ("sweep-config/v2", "sweep-config/v1"))
            }
            other => panic!("{other:?}"),
        }
        // M ladder above the γ threshold
        let far = config("alpha-lipschitz", "spectral", "").replace(r#""alpha": 1.5"#, r#""alpha": 1.5, "gamma": 8.0"#);
        assert!(matches!(SweepConfig::from_json(&far), Err(Error::Config(_))));
        assert!(SweepConfig::from_json(&config("limit-alpha", "spectral", "")).is_err());
    }

    #[test]
    fn degenerate_pair_is_excluded_everywhere() {
        let text = config("nonlinearity", "solver", r#", "solver": {"cells": 64}"#)
            .replace(r#""alpha": 1.5"#, r#""alpha": 1.5, "pair_ratio": 1.0, "horizon": 0.1"#);
        let cfg = SweepConfig::from_json(&text).unwrap();
        let r = run_sweep(&cfg).unwrap();
        assert_eq!(r.ratio.excluded, r.rows.len());
        assert!(r.rows.iter().all(|row| row.empirical == 0.0));
        assert!(r.passed());
    }

    #[test]
    fn kuznetsov_sweep_is_deterministic_and_round_trips() {
        let cfg = SweepConfig::from_json(&config("kuznetsov", "spectral", r#", "seed": 7"#)).unwrap();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        persist(&a, &path).unwrap();
        assert_eq!(load(&path).unwrap(), a);
        let csv = fs::read_to_string(path.with_extension("csv")).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "param_1,param_2,empirical,theoretical,ratio");
        assert_eq!(lines.count(), a.rows.len());
        // bumped schema
        let text = fs::read_to_string(&path).unwrap().replace("sweep-result/v1", "sweep-result/v2");
        fs::write(&path, text).unwrap();
        let e = load(&path).unwrap_err().to_string();
        assert!(e.contains("sweep-result/v2") && e.contains("sweep-result/v1"), "{e}");
    }

    #[test]
    fn flat_limit_has_zero_distances() {
        let u0 = box_datum(1.0, 4.0, 64);
        let spec = LimitSpec {
            flux: Nonlinearity::Zero,
            diffusion: Nonlinearity::Zero,
            u0,
            horizon: 0.2,
            padding: 0.25,
            slack: 0.1,
        };
        let r = limit_experiment(&[1.2, 1.5, 1.8, 1.9], &spec).unwrap();
        assert!(r.rows.iter().all(|row| row.empirical == 0.0));
        assert!(r.passed());
        assert!(limit_experiment(&[0.5, 1.5, 1.8, 1.9], &spec).is_err());
    }

    #[test]
    fn random_cases_respect_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2 {
            let (u, v) = random_case(&mut rng, 48, 2.0, 0.05).unwrap();
            assert_eq!(invariant_violations(&u, &v, 0.25).unwrap(), 0);
        }
    }

    #[test]
    fn partial_dump_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep.json");
        // a decreasing diffusion passes the config check but every solve rejects it
        let text = config(
            "nonlinearity",
            "solver",
            r#", "solver": {"cells": 32, "diffusion": {"kind": "porous", "coef": -1.0, "exponent": 2.0}}"#,
        );
        let mut cfg = SweepConfig::from_json(&text).unwrap();
        cfg.output = Some(out);
        assert!(matches!(run_sweep(&cfg), Err(Error::Domain(_))));
        let partial = load(&dir.path().join("sweep.partial.json")).unwrap();
        assert!(partial.rows.is_empty());
    }
}
