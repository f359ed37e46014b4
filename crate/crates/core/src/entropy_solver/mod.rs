//! Explicit monotone scheme for `∂_t u + (f(u))_x + (−Δ)^{α/2} φ(u) = 0` on a
//! zero-extended 1-D window, with monitors for the a priori bounds, the entropy
//! inequality and the energy estimate.

mod energy;
mod entropy;
mod monitors;

pub use energy::{energy_check, h_alpha_seminorm_double, h_alpha_seminorm_fourier, EnergyBalance};
pub use entropy::{entropy_residual, BumpTest, ConvexEntropy, SeparableTest, SmoothKruzhkov};
pub use monitors::{apriori_report, contraction_gap, AprioriReport, ContractionGap, Violation, ViolationKind};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::levy::{FractionalOrder, LevyWeights};
use crate::nonlinearity::Nonlinearity;

/// Safety factor applied to the monotonicity limit of the time step.
pub const CFL_SAFETY: f64 = 0.9;

/// Number of equal intervals between stored time samples (17 samples including both ends).
pub const SAMPLE_INTERVALS: usize = 16;

/// The full Cauchy problem on a 1-D window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub alpha: FractionalOrder,
    pub flux: Nonlinearity,
    pub diffusion: Nonlinearity,
    pub u0: GridFunction,
    pub horizon: f64,
    /// Split radius for the nonlocal term; one cell width when absent.
    #[serde(default)]
    pub r: Option<f64>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.u0.len() < 3 {
            return domain("initial datum needs at least 3 cells");
        }
        self.flux.validate()?;
        self.diffusion.validate()?;
        if self.flux.value(0.0) != 0.0 || self.diffusion.value(0.0) != 0.0 {
            return domain("flux and diffusion must vanish at 0");
        }
        let (lo, hi) = self.range();
        if !self.diffusion.is_nondecreasing_on(lo, hi, 10_000) {
            return domain("diffusion must be nondecreasing on the range of the initial datum");
        }
        Ok(())
    }

    /// `I(u0)` widened to contain 0 (the zero extension lives in it as well).
    pub fn range(&self) -> (f64, f64) {
        (self.u0.min().min(0.0), self.u0.max().max(0.0))
    }

    pub fn same_equation(&self, other: &ProblemSpec) -> bool {
        self.alpha == other.alpha
            && self.flux == other.flux
            && self.diffusion == other.diffusion
            && self.horizon == other.horizon
            && self.r == other.r
    }
}

/// How the diffusion term is discretized.
#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    /// Split fractional Laplacian, 0 < α < 2.
    Nonlocal(LevyWeights),
    /// α = 0 limit: `−φ(u)` reaction.
    Reaction,
    /// α = 2 limit: centered second difference of `φ(u)`.
    Heat { dx: f64 },
}

impl Operator {
    /// Coefficient multiplying `Lip(φ)` in the time-step bound.
    pub fn diagonal(&self) -> f64 {
        match self {
            Operator::Nonlocal(w) => w.diagonal(),
            Operator::Reaction => 1.0,
            Operator::Heat { dx } => 2.0 / (dx * dx),
        }
    }

    /// Adds `scale · L[g]` to `out`, where `L` approximates `−(−Δ)^{α/2}`.
    pub fn add_apply(&self, g: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        match self {
            Operator::Nonlocal(w) => {
                w.add_inner(g, scale, out);
                w.add_outer(g, scale, out)?;
            }
            Operator::Reaction => {
                for (o, v) in out.iter_mut().zip(g) {
                    *o -= scale * v;
                }
            }
            Operator::Heat { dx } => {
                let c = scale / (dx * dx);
                let n = g.len();
                for i in 0..n {
                    let l = if i > 0 { g[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { g[i + 1] } else { 0.0 };
                    out[i] += c * (l - 2.0 * g[i] + r);
                }
            }
        }
        Ok(())
    }

    /// Per-cell bound on the rate at which `L` moves mass out of the window, per unit `|g_i|`.
    fn escape_rates(&self, n: usize) -> Vec<f64> {
        match self {
            Operator::Nonlocal(w) => {
                let mut esc = w.escaping_mass(n);
                let c = 0.5 * w.inner_weight;
                esc[0] += c;
                esc[n - 1] += c;
                esc
            }
            Operator::Reaction => vec![1.0; n],
            Operator::Heat { dx } => {
                let mut esc = vec![0.0; n];
                esc[0] += 1.0 / (dx * dx);
                esc[n - 1] += 1.0 / (dx * dx);
                esc
            }
        }
    }
}

/// Weights realizing the split operator on `n` cells of width `dx`.
pub fn build_weights(dx: f64, n: usize, alpha: f64, r: Option<f64>) -> Result<LevyWeights> {
    if n < 2 {
        return domain("grid needs at least 2 cells");
    }
    LevyWeights::new(dx, alpha, r.unwrap_or(dx), n - 1)
}

/// Geometry check used by callers that build weights from a grid description.
pub fn build_weights_for(x: &[f64], alpha: f64, r: Option<f64>) -> Result<LevyWeights> {
    if x.len() < 2 {
        return domain("grid needs at least 2 nodes");
    }
    let dx = x[1] - x[0];
    for w in x.windows(2) {
        if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs() {
            return Err(Error::Unsupported("non-uniform grids are not supported".into()));
        }
    }
    build_weights(dx, x.len(), alpha, r)
}

fn operator_for(spec: &ProblemSpec, dx: f64, n: usize) -> Result<Operator> {
    Ok(match spec.alpha {
        FractionalOrder::Zero => Operator::Reaction,
        FractionalOrder::Two => Operator::Heat { dx },
        FractionalOrder::Open(a) => Operator::Nonlocal(build_weights(dx, n, a, spec.r)?),
    })
}

/// Largest monotone time step, `T` when nothing evolves.
pub fn cfl_timestep(spec: &ProblemSpec, dx: f64, op: &Operator) -> f64 {
    let (lo, hi) = spec.range();
    cfl_bound(&spec.flux, &spec.diffusion, lo, hi, dx, op).unwrap_or(spec.horizon)
}

fn cfl_bound(f: &Nonlinearity, phi: &Nonlinearity, lo: f64, hi: f64, dx: f64, op: &Operator) -> Option<f64> {
    let rate = f.lipschitz_on(lo, hi) / dx + phi.lipschitz_on(lo, hi) * op.diagonal();
    if rate > 0.0 {
        Some(CFL_SAFETY / rate)
    } else {
        None
    }
}

/// Workspace for the explicit update.
struct Kernel<'a> {
    flux: &'a Nonlinearity,
    diffusion: &'a Nonlinearity,
    op: &'a Operator,
    escape: Vec<f64>,
    fplus: Vec<f64>,
    fminus: Vec<f64>,
    phi: Vec<f64>,
    lphi: Vec<f64>,
}

/// Quantities produced by one update besides the new state.
#[derive(Debug, Clone, Copy)]
struct StepSideInfo {
    /// Upper bound on the mass that left the window during the step.
    leak: f64,
    /// `−Δx ⟨φ(u), L φ(u)⟩` for the state before the step.
    seminorm: f64,
}

impl<'a> Kernel<'a> {
    fn new(flux: &'a Nonlinearity, diffusion: &'a Nonlinearity, op: &'a Operator, n: usize) -> Self {
        Self {
            flux,
            diffusion,
            op,
            escape: op.escape_rates(n),
            fplus: vec![0.0; n],
            fminus: vec![0.0; n],
            phi: vec![0.0; n],
            lphi: vec![0.0; n],
        }
    }

    fn apply(&mut self, u: &[f64], dx: f64, dt: f64, out: &mut [f64]) -> Result<StepSideInfo> {
        let n = u.len();
        for (i, &ui) in u.iter().enumerate() {
            let (p, m) = self.flux.split_increasing(ui);
            self.fplus[i] = p;
            self.fminus[i] = m;
            self.phi[i] = self.diffusion.value(ui);
        }
        self.lphi.iter_mut().for_each(|v| *v = 0.0);
        if !self.diffusion.is_zero() {
            self.op.add_apply(&self.phi, 1.0, &mut self.lphi)?;
        }
        let lam = dt / dx;
        // F_{i+1/2} = f+(u_i) + f-(u_{i+1}), zero outside
        let mut f_left = self.fminus[0];
        for i in 0..n {
            let f_right = self.fplus[i] + if i + 1 < n { self.fminus[i + 1] } else { 0.0 };
            out[i] = u[i] - lam * (f_right - f_left) + dt * self.lphi[i];
            f_left = f_right;
        }
        let boundary_flux = self.fminus[0].abs() + self.fplus[n - 1].abs();
        let diffusive: f64 = self.phi.iter().zip(&self.escape).map(|(p, e)| p.abs() * e).sum();
        let seminorm = -dx * self.phi.iter().zip(&self.lphi).map(|(p, l)| p * l).sum::<f64>();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::Instability(format!("non-finite value at cell {i}")));
        }
        Ok(StepSideInfo {
            leak: dt * (boundary_flux + dx * diffusive),
            seminorm,
        })
    }
}

/// One explicit step on the grid of `state` (zero extension outside it).
///
/// Refuses steps above the monotonicity limit for the range of `state`.
pub fn step(state: &GridFunction, spec: &ProblemSpec, op: &Operator, dt: f64) -> Result<GridFunction> {
    let lo = state.min().min(0.0);
    let hi = state.max().max(0.0);
    if let Some(bound) = cfl_bound(&spec.flux, &spec.diffusion, lo, hi, state.dx, op) {
        if dt > bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { requested: dt, bound });
        }
    }
    let mut kernel = Kernel::new(&spec.flux, &spec.diffusion, op, state.len());
    let mut out = GridFunction::zeros(state.x0, state.dx, state.len());
    kernel.apply(&state.values, state.dx, dt, &mut out.values)?;
    Ok(out)
}

/// Options for [`solve_with`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Time step to use instead of the CFL choice (rounded down so samples are hit exactly).
    pub dt: Option<f64>,
    /// Refuse time steps above the monotonicity limit.
    pub enforce_cfl: bool,
    /// Keep every time level, not only the 17 samples.
    pub store_all: bool,
    /// Zero padding per side as a fraction of the window (rounded up to whole cells).
    pub padding: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            dt: None,
            enforce_cfl: true,
            store_all: true,
            padding: 0.25,
        }
    }
}

/// Per-step monitor statistics on the padded grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub time: f64,
    pub min: f64,
    pub max: f64,
    pub l1: f64,
    pub bv: f64,
    pub mass: f64,
    /// Cumulative bound on mass lost through the window edges.
    pub leak: f64,
    /// `|φ(u)|²` in the discrete `H^{α/2}` semi-norm.
    pub seminorm: f64,
}

impl StepStats {
    fn of(time: f64, g: &GridFunction, leak: f64, seminorm: f64) -> Self {
        Self {
            time,
            min: g.min(),
            max: g.max(),
            l1: g.l1(),
            bv: g.bv(),
            mass: g.mass(),
            leak,
            seminorm,
        }
    }
}

/// Computed solution on the padded grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub spec: ProblemSpec,
    pub dt: f64,
    pub dt_cfl: f64,
    /// Cells of the padded grid that belong to the original window.
    pub core: (usize, usize),
    pub r_used: Option<f64>,
    pub r_clamped: bool,
    /// Stored time levels (all steps, or only the samples).
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    /// Step index of every stored level.
    pub step_index: Vec<usize>,
    pub steps_per_sample: usize,
    pub stats: Vec<StepStats>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn initial_state(&self) -> &GridFunction {
        &self.states[0]
    }

    pub fn stores_all(&self) -> bool {
        self.states.len() == self.stats.len()
    }

    /// The 17 evenly spaced samples `(t_j, u(t_j))`, `t_j = jT/16`.
    pub fn samples(&self) -> Vec<(f64, &GridFunction)> {
        (0..=SAMPLE_INTERVALS)
            .map(|j| {
                let step = j * self.steps_per_sample;
                let k = self.step_index.binary_search(&step).expect("sample levels are stored");
                (self.times[k], &self.states[k])
            })
            .collect()
    }

    pub fn core_of(&self, g: &GridFunction) -> GridFunction {
        g.slice(self.core.0..self.core.1)
    }

    /// Truncation budget accumulated over the whole run.
    pub fn truncation_budget(&self) -> f64 {
        self.stats.last().map(|s| s.leak).unwrap_or(0.0)
    }
}

/// Explicit time stepper that can be advanced one level at a time.
pub struct Stepper {
    pub spec: ProblemSpec,
    pub op: Operator,
    pub state: GridFunction,
    pub dt: f64,
    pub dt_cfl: f64,
    pub steps_per_sample: usize,
    pub total_steps: usize,
    pub core: (usize, usize),
    step: usize,
    leak: f64,
    scratch: Vec<f64>,
    enforce_cfl: bool,
}

impl Stepper {
    pub fn new(spec: &ProblemSpec, opts: &SolveOptions) -> Result<Self> {
        spec.validate()?;
        let n = spec.u0.len();
        let pad = (opts.padding.max(0.0) * n as f64).ceil() as usize;
        let state = spec.u0.padded(pad, pad);
        let op = operator_for(spec, state.dx, state.len())?;
        let dt_cfl = cfl_timestep(spec, state.dx, &op);
        let interval = spec.horizon / SAMPLE_INTERVALS as f64;
        let target = opts.dt.unwrap_or(dt_cfl).min(interval);
        if !(target > 0.0) {
            return domain(format!("time step must be positive, got {target}"));
        }
        let steps_per_sample = (interval / target * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let dt = interval / steps_per_sample as f64;
        if opts.enforce_cfl && dt > dt_cfl * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                requested: dt,
                bound: dt_cfl,
            });
        }
        Ok(Self {
            spec: spec.clone(),
            op,
            scratch: vec![0.0; state.len()],
            state,
            dt,
            dt_cfl,
            steps_per_sample,
            total_steps: steps_per_sample * SAMPLE_INTERVALS,
            core: (pad, pad + n),
            step: 0,
            leak: 0.0,
            enforce_cfl: opts.enforce_cfl,
        })
    }

    pub fn time(&self) -> f64 {
        if self.step == self.total_steps {
            self.spec.horizon
        } else {
            self.step as f64 * self.dt
        }
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn finished(&self) -> bool {
        self.step >= self.total_steps
    }

    /// Advance one level; returns the semi-norm of `φ` at the old level.
    pub fn advance(&mut self) -> Result<f64> {
        if self.enforce_cfl && self.dt > self.dt_cfl * (1.0 + 1e-12) {
            return Err(Error::Cfl {
                requested: self.dt,
                bound: self.dt_cfl,
            });
        }
        let mut kernel = Kernel::new(&self.spec.flux, &self.spec.diffusion, &self.op, self.state.len());
        let info = kernel.apply(&self.state.values, self.state.dx, self.dt, &mut self.scratch)?;
        std::mem::swap(&mut self.state.values, &mut self.scratch);
        self.step += 1;
        self.leak += info.leak;
        Ok(info.seminorm)
    }

    /// Semi-norm of `φ` at the current level.
    pub fn current_seminorm(&self) -> Result<f64> {
        let phi: Vec<f64> = self.state.values.iter().map(|&v| self.spec.diffusion.value(v)).collect();
        if self.spec.diffusion.is_zero() {
            return Ok(0.0);
        }
        let mut lphi = vec![0.0; phi.len()];
        self.op.add_apply(&phi, 1.0, &mut lphi)?;
        Ok(-self.state.dx * phi.iter().zip(&lphi).map(|(p, l)| p * l).sum::<f64>())
    }

    pub fn leak(&self) -> f64 {
        self.leak
    }
}

/// Solve with default options (CFL enforced, all levels stored).
pub fn solve(spec: &ProblemSpec) -> Result<Trajectory> {
    solve_with(spec, &SolveOptions::default())
}

pub fn solve_with(spec: &ProblemSpec, opts: &SolveOptions) -> Result<Trajectory> {
    let mut st = Stepper::new(spec, opts)?;
    let (r_used, r_clamped) = match &st.op {
        Operator::Nonlocal(w) => (Some(w.r), w.clamped),
        _ => (None, false),
    };
    let mut times = vec![0.0];
    let mut states = vec![st.state.clone()];
    let mut step_index = vec![0];
    let mut stats = Vec::with_capacity(st.total_steps + 1);
    let mut pending = StepStats::of(0.0, &st.state, 0.0, 0.0);
    while !st.finished() {
        pending.seminorm = st.advance()?;
        stats.push(pending);
        let t = st.time();
        pending = StepStats::of(t, &st.state, st.leak(), 0.0);
        if opts.store_all || st.step_index() % st.steps_per_sample == 0 {
            times.push(t);
            states.push(st.state.clone());
            step_index.push(st.step_index());
        }
    }
    pending.seminorm = st.current_seminorm()?;
    stats.push(pending);
    Ok(Trajectory {
        spec: spec.clone(),
        dt: st.dt,
        dt_cfl: st.dt_cfl,
        core: st.core,
        r_used,
        r_clamped,
        times,
        states,
        step_index,
        steps_per_sample: st.steps_per_sample,
        stats,
    })
}
