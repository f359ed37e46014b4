//! Closed-form continuous-dependence moduli and the elementary inequalities behind them.
//!
//! Every function here is pure. Unknown multiplicative constants are never folded into a
//! value; what is known about them is reported separately by [`constant_bound`].

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::levy::{levy_coefficient, surface_measure};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{adaptive, adaptive_to_infinity, Tolerance};

/// Default number of uniform samples used for sup-norms over `I(u0)`.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Norms of the initial datum that enter the moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialDataStats {
    pub l1: f64,
    pub bv: f64,
    /// `I(u0) = (ess inf u0, ess sup u0)`.
    pub lo: f64,
    pub hi: f64,
    pub ent1: f64,
    pub ent2: f64,
}

fn ent_formula(l1: f64, bv: f64, i: i32) -> f64 {
    if bv == 0.0 || l1 / bv <= 1.0 {
        return 0.0;
    }
    bv * (1.0 + (l1 / bv).ln().powi(i))
}

impl InitialDataStats {
    pub fn new(l1: f64, bv: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(l1 >= 0.0 && bv >= 0.0 && l1.is_finite() && bv.is_finite()) {
            return domain(format!("L1 norm and BV seminorm must be finite and nonnegative, got {l1}, {bv}"));
        }
        if !(lo <= hi) {
            return domain(format!("empty range interval ({lo}, {hi})"));
        }
        Ok(Self {
            l1,
            bv,
            lo,
            hi,
            ent1: ent_formula(l1, bv, 1),
            ent2: ent_formula(l1, bv, 2),
        })
    }

    pub fn from_grid(u0: &GridFunction) -> Self {
        Self::new(u0.l1(), u0.bv(), u0.min(), u0.max()).expect("grid norms are finite")
    }
}

/// `Ent_i(u0) = |u0|_BV (1 + ln(∥u0∥_1/|u0|_BV)^i)` when the ratio exceeds one, else 0.
pub fn ent(stats: &InitialDataStats, i: u8) -> Result<f64> {
    match i {
        1 => Ok(stats.ent1),
        2 => Ok(stats.ent2),
        _ => domain(format!("entropy index must be 1 or 2, got {i}")),
    }
}

/// Which of the three regimes a modulus was evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `α < 1`
    Supercritical,
    /// `α = 1`
    Critical,
    /// `α > 1`
    Subcritical,
    /// `α ∈ {0, 2}`
    Boundary,
}

fn branch_of(alpha: f64) -> Branch {
    if alpha == 0.0 || alpha == 2.0 {
        Branch::Boundary
    } else if alpha < 1.0 {
        Branch::Supercritical
    } else if alpha == 1.0 {
        Branch::Critical
    } else {
        Branch::Subcritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusValue {
    pub value: f64,
    pub branch: Branch,
}

/// Sup-norm gaps between two pairs of nonlinearities on `I(u0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityGap {
    /// `∥f′ − g′∥`
    pub flux: f64,
    /// `∥φ′ − ψ′∥`
    pub diffusion: f64,
    /// `∥(φ′)^{1/α} − (ψ′)^{1/α}∥` for `root_order`.
    pub root: f64,
    pub root_order: f64,
    /// `∥φ′ ln φ′ − ψ′ ln ψ′∥`
    pub log: f64,
    pub samples: usize,
}

/// Sup-norms of a single diffusion function on `I(u0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionNorms {
    /// `∥f′∥`
    pub flux: f64,
    /// `∥φ′∥`
    pub diffusion: f64,
    /// `∥(φ′)^{1/α}∥` for `root_order`.
    pub root: f64,
    pub root_order: f64,
    /// `∥ln φ′∥`, infinite when `φ′` vanishes somewhere.
    pub log: f64,
    pub samples: usize,
}

fn sample_points(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

fn xlogx(v: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v * v.ln()
    }
}

fn root(v: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        // (φ′)^{1/α} has no meaning at α = 0; the α < 1 formulas never read it
        return f64::NAN;
    }
    v.max(0.0).powf(1.0 / alpha)
}

impl NonlinearityGap {
    /// Dense uniform sampling of every gap over `[lo, hi]`.
    #[allow(clippy::too_many_arguments)]
    pub fn sample(
        f: &Nonlinearity,
        g: &Nonlinearity,
        phi: &Nonlinearity,
        psi: &Nonlinearity,
        alpha: f64,
        lo: f64,
        hi: f64,
        samples: usize,
    ) -> Result<Self> {
        if !(lo <= hi) {
            return domain(format!("empty sampling interval ({lo}, {hi})"));
        }
        let mut out = Self {
            flux: 0.0,
            diffusion: 0.0,
            root: 0.0,
            root_order: alpha,
            log: 0.0,
            samples: samples.max(2),
        };
        for u in sample_points(lo, hi, samples) {
            let (a, b) = (phi.derivative(u), psi.derivative(u));
            out.flux = out.flux.max((f.derivative(u) - g.derivative(u)).abs());
            out.diffusion = out.diffusion.max((a - b).abs());
            if alpha > 0.0 {
                out.root = out.root.max((root(a, alpha) - root(b, alpha)).abs());
            }
            out.log = out.log.max((xlogx(a) - xlogx(b)).abs());
        }
        Ok(out)
    }

    /// Gaps of constant-slope diffusions `φ′ ≡ a`, `ψ′ ≡ b` with identical fluxes.
    pub fn constant(a: f64, b: f64, alpha: f64) -> Self {
        Self {
            flux: 0.0,
            diffusion: (a - b).abs(),
            root: if alpha > 0.0 {
                (root(a, alpha) - root(b, alpha)).abs()
            } else {
                0.0
            },
            root_order: alpha,
            log: (xlogx(a) - xlogx(b)).abs(),
            samples: 1,
        }
    }
}

impl DiffusionNorms {
    pub fn sample(f: &Nonlinearity, phi: &Nonlinearity, alpha: f64, lo: f64, hi: f64, samples: usize) -> Result<Self> {
        if !(lo <= hi) {
            return domain(format!("empty sampling interval ({lo}, {hi})"));
        }
        let mut out = Self {
            flux: 0.0,
            diffusion: 0.0,
            root: 0.0,
            root_order: alpha,
            log: 0.0,
            samples: samples.max(2),
        };
        for u in sample_points(lo, hi, samples) {
            let a = phi.derivative(u);
            out.flux = out.flux.max(f.derivative(u).abs());
            out.diffusion = out.diffusion.max(a);
            if alpha > 0.0 {
                out.root = out.root.max(root(a, alpha));
            }
            out.log = out.log.max(if a > 0.0 { a.ln().abs() } else { f64::INFINITY });
        }
        Ok(out)
    }

    /// `φ′ ≡ a` and `f′ ≡ 0`.
    pub fn constant(a: f64, alpha: f64) -> Self {
        Self {
            flux: 0.0,
            diffusion: a,
            root: if alpha > 0.0 { root(a, alpha) } else { 0.0 },
            root_order: alpha,
            log: if a > 0.0 { a.ln().abs() } else { f64::INFINITY },
            samples: 1,
        }
    }
}

fn check_order(alpha: f64) -> Result<()> {
    if !(0.0..=2.0).contains(&alpha) {
        return domain(format!("order must lie in [0, 2], got {alpha}"));
    }
    Ok(())
}

fn check_root(order: f64, alpha: f64) -> Result<()> {
    if alpha > 1.0 && (order - alpha).abs() > 1e-12 {
        return domain(format!("root norms were sampled for order {order}, modulus asked at {alpha}"));
    }
    Ok(())
}

/// `t |ln t|`-type factor `T (1 + |ln T|)` with the value 0 at `T = 0`.
fn one_plus_abs_log(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * (1.0 + t.ln().abs())
    }
}

fn xlnx(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * t.ln()
    }
}

/// The three-branch modulus in the diffusion functions for `α ∈ [0, 2]`.
pub fn nonlinearity_modulus(t: f64, alpha: f64, stats: &InitialDataStats, gap: &NonlinearityGap) -> Result<ModulusValue> {
    check_order(alpha)?;
    if !(t >= 0.0) {
        return domain(format!("horizon must be nonnegative, got {t}"));
    }
    check_root(gap.root_order, alpha)?;
    let branch = branch_of(alpha);
    let value = if alpha > 1.0 {
        t.powf(1.0 / alpha) * stats.bv * gap.root
    } else if alpha == 1.0 {
        t * stats.ent1 * gap.diffusion + one_plus_abs_log(t) * stats.bv * gap.diffusion + t * stats.bv * gap.log
    } else {
        t * pow0(stats.l1, 1.0 - alpha) * pow0(stats.bv, alpha) * gap.diffusion
    };
    Ok(ModulusValue { value, branch })
}

/// `x^p` with `0^0 = 1`.
fn pow0(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        x.powf(p)
    }
}

/// Modulus in time: the diffusive part and, separately, the transport part `|u0|_BV ∥f′∥ |t − s|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeModulus {
    pub diffusion: ModulusValue,
    pub transport: f64,
}

pub fn time_modulus(alpha: f64, stats: &InitialDataStats, norms: &DiffusionNorms, t: f64, s: f64) -> Result<TimeModulus> {
    check_order(alpha)?;
    if !(t >= 0.0 && s >= 0.0) {
        return domain(format!("times must be nonnegative, got {t}, {s}"));
    }
    check_root(norms.root_order, alpha)?;
    let dt = (t - s).abs();
    let value = if dt == 0.0 {
        0.0
    } else if alpha > 1.0 {
        stats.bv * norms.root * (t.powf(1.0 / alpha) - s.powf(1.0 / alpha)).abs()
    } else if alpha == 1.0 {
        stats.ent1 * norms.diffusion * dt
            + stats.bv * norms.diffusion * (1.0 + norms.log) * dt
            + stats.bv * norms.diffusion * (xlnx(t) - xlnx(s)).abs()
    } else {
        pow0(stats.l1, 1.0 - alpha) * pow0(stats.bv, alpha) * norms.diffusion * dt
    };
    Ok(TimeModulus {
        diffusion: ModulusValue {
            value,
            branch: branch_of(alpha),
        },
        transport: stats.bv * norms.flux * dt,
    })
}

/// Bracketed part of the Lipschitz bound in the order at `λ`, with `M = T ∥φ′∥`.
pub fn lip_alpha_bound(lambda: f64, m: f64, stats: &InitialDataStats) -> Result<ModulusValue> {
    if !(lambda > 0.0 && lambda < 2.0) {
        return domain(format!("λ must lie in (0, 2), got {lambda}"));
    }
    if !(m >= 0.0) {
        return domain(format!("M must be nonnegative, got {m}"));
    }
    let branch = branch_of(lambda);
    if m == 0.0 {
        return Ok(ModulusValue { value: 0.0, branch });
    }
    let lm = m.ln();
    let value = if lambda > 1.0 {
        m.powf(1.0 / lambda) * (1.0 + lm.abs()) * stats.bv
    } else if lambda == 1.0 {
        m * stats.ent2 + m * (1.0 + lm * lm) * stats.bv
    } else if stats.bv == 0.0 {
        0.0
    } else {
        m * stats.l1.powf(1.0 - lambda) * stats.bv.powf(lambda) * (1.0 + (stats.l1 / stats.bv).ln().abs())
    };
    Ok(ModulusValue { value, branch })
}

/// What is known about the constant `C(d, α)` multiplying a modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConstantBound {
    /// `C ≤ S_d (2G_d(α)/α + G_d(α)/(1 − α))` for `α < 1`.
    Explicit { value: f64 },
    /// `C ≤ C(d) (1 + G_d(α)/(α − 1) + G_d(α)/(2 − α))` with `C(d)` unknown, `α > 1`.
    UpToDimensionalFactor { factor: f64 },
    /// No explicit information.
    Unknown,
}

pub fn constant_bound(d: usize, alpha: f64) -> Result<ConstantBound> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Ok(ConstantBound::Unknown);
    }
    let g = levy_coefficient(d, alpha)?;
    Ok(if alpha < 1.0 {
        ConstantBound::Explicit {
            value: surface_measure(d)? * (2.0 * g / alpha + g / (1.0 - alpha)),
        }
    } else if alpha > 1.0 {
        ConstantBound::UpToDimensionalFactor {
            factor: 1.0 + g / (alpha - 1.0) + g / (2.0 - alpha),
        }
    } else {
        ConstantBound::Unknown
    })
}

/// `c_d = √(4d²/(d + 1))`.
pub fn kuznetsov_constant(d: usize) -> f64 {
    let d = d as f64;
    (4.0 * d * d / (d + 1.0)).sqrt()
}

/// Split radius for [`kuznetsov_modulus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RadiusChoice {
    Fixed(f64),
    Optimize,
}

/// Parameters of the r-dependent modulus for box data `γ 1_{[−γ, γ]}` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KuznetsovInput {
    pub horizon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `∥φ′ − ψ′∥`
    pub gap: f64,
    /// `M = T ∥φ′∥`
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KuznetsovValue {
    pub value: f64,
    /// Radius at which the value is attained; 0 for the limit `r ↓ 0`.
    pub r: f64,
}

/// `∫_{|z|>r} ∥u0(·+z) − u0∥ dμ_α` for the γ-box, `∥u0(·+z) − u0∥ = 2γ min(|z|, 2γ)`.
fn box_tail_integral(alpha: f64, gamma: f64, r: f64) -> Result<f64> {
    let g = levy_coefficient(1, alpha)?;
    let w = 2.0 * gamma;
    let c = 2.0 * g * w;
    if r >= w {
        return Ok(c * w * r.powf(-alpha) / alpha);
    }
    let near = if alpha == 1.0 {
        (w / r).ln()
    } else if r == 0.0 {
        w.powf(1.0 - alpha) / (1.0 - alpha)
    } else {
        (w.powf(1.0 - alpha) - r.powf(1.0 - alpha)) / (1.0 - alpha)
    };
    Ok(c * (near + w.powf(1.0 - alpha) / alpha))
}

fn small_ball(alpha: f64, r: f64) -> Result<f64> {
    Ok(2.0 * levy_coefficient(1, alpha)? * r.powf(2.0 - alpha) / (2.0 - alpha))
}

/// `|G(α) z^{−1−α} − G(β) z^{−1−β}|` on `z > 0`.
fn density_gap(ga: f64, alpha: f64, gb: f64, beta: f64, z: f64) -> f64 {
    (ga * z.powf(-1.0 - alpha) - gb * z.powf(-1.0 - beta)).abs()
}

fn measure_gap_integrals(alpha: f64, beta: f64, gamma: f64, r: f64) -> Result<(f64, f64)> {
    let (ga, gb) = (levy_coefficient(1, alpha)?, levy_coefficient(1, beta)?);
    let w = 2.0 * gamma;
    // the two densities cross where G(α) z^{−α} = G(β) z^{−β}
    let cross = (ga / gb).ln() / (alpha - beta);
    let cross = cross.exp();
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-10,
        max_intervals: 4000,
    };
    let tail_f = |z: f64| 2.0 * w * z.min(w) * density_gap(ga, alpha, gb, beta, z);
    let near_f = |z: f64| 2.0 * z * z * density_gap(ga, alpha, gb, beta, z);
    let mut pts = vec![r];
    for p in [cross, w] {
        if p > r {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    let mut tail = 0.0;
    for win in pts.windows(2) {
        tail += adaptive(tail_f, win[0], win[1], tol)?.value;
    }
    tail += adaptive_to_infinity(tail_f, *pts.last().expect("non-empty"), tol)?.value;
    let mut near_pts = vec![0.0];
    if cross < r {
        near_pts.push(cross);
    }
    near_pts.push(r);
    let mut near = 0.0;
    for win in near_pts.windows(2) {
        near += adaptive(near_f, win[0], win[1], tol)?.value;
    }
    Ok((tail, near))
}

fn kuznetsov_at(input: &KuznetsovInput, bv: f64, r: f64) -> Result<f64> {
    let cd = kuznetsov_constant(1);
    if input.alpha == input.beta {
        let h = input.gap;
        let t = input.horizon;
        Ok(t * box_tail_integral(input.alpha, input.gamma, r)? * h
            + cd * t.sqrt() * bv * (small_ball(input.alpha, r)? * h).sqrt())
    } else {
        let (tail, near) = measure_gap_integrals(input.alpha, input.beta, input.gamma, r)?;
        Ok(input.m * tail + cd * input.m.sqrt() * bv * near.sqrt())
    }
}

/// The r-dependent continuous-dependence modulus of the Kuznetsov argument for box data.
///
/// With `α = β` it measures the diffusion gap `∥φ′ − ψ′∥` over horizon `T`; with `α ≠ β`
/// the diffusions must coincide (`gap = 0`) and `M = T∥φ′∥` multiplies `|μ_α − μ_β|`.
/// [`RadiusChoice::Optimize`] returns the infimum over `r > 0`.
pub fn kuznetsov_modulus(input: &KuznetsovInput, radius: RadiusChoice) -> Result<KuznetsovValue> {
    let KuznetsovInput {
        horizon,
        alpha,
        beta,
        gamma,
        gap,
        m,
    } = *input;
    for (name, v) in [("α", alpha), ("β", beta)] {
        if !(v > 0.0 && v < 2.0) {
            return domain(format!("{name} must lie in (0, 2), got {v}"));
        }
    }
    if !(horizon >= 0.0 && gamma > 0.0 && gap >= 0.0 && m >= 0.0) {
        return domain("horizon, gap and M must be nonnegative and γ positive");
    }
    if alpha != beta && gap != 0.0 {
        return Err(Error::Unsupported(
            "the modulus covers either equal orders or equal diffusions, not both differing".into(),
        ));
    }
    let bv = 4.0 * gamma;
    let trivial = if alpha == beta { gap == 0.0 || horizon == 0.0 } else { m == 0.0 };
    match radius {
        RadiusChoice::Fixed(r) => {
            if !(r > 0.0) {
                return domain(format!("radius must be positive, got {r}"));
            }
            if trivial {
                return Ok(KuznetsovValue { value: 0.0, r });
            }
            Ok(KuznetsovValue {
                value: kuznetsov_at(input, bv, r)?,
                r,
            })
        }
        RadiusChoice::Optimize => {
            if trivial {
                return Ok(KuznetsovValue { value: 0.0, r: 0.0 });
            }
            optimize_radius(input, bv)
        }
    }
}

fn optimize_radius(input: &KuznetsovInput, bv: f64) -> Result<KuznetsovValue> {
    let gamma = input.gamma;
    let f = |lr: f64| kuznetsov_at(input, bv, lr.exp());
    // coarse scan on log r, then golden section in the best cell
    let (lo, hi) = ((gamma * 1e-16).ln(), (gamma * 1e8).ln());
    let n = 120;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals = grid.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Bracket(format!("modulus is not finite at r = {:e}", grid[i].exp())));
    }
    let (best, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty scan");
    if best == 0 {
        // decreasing all the way down: only possible when the r ↓ 0 limit is finite
        let limit = if input.alpha == input.beta && input.alpha < 1.0 {
            input.horizon * box_tail_integral(input.alpha, gamma, 0.0)? * input.gap
        } else {
            return Err(Error::Bracket(format!(
                "no interior minimum above r = {:e}: values {:e} at the lower end and {:e} next",
                grid[0].exp(),
                vals[0],
                vals[1]
            )));
        };
        return Ok(KuznetsovValue {
            value: limit.min(vals[0]),
            r: 0.0,
        });
    }
    if best == n {
        return Err(Error::Bracket(format!(
            "modulus still decreasing at r = {:e} ({:e})",
            grid[n].exp(),
            vals[n]
        )));
    }
    let (mut a, mut b) = (grid[best - 1], grid[best + 1]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..100 {
        if (b - a).abs() < 1e-10 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d)?;
        }
    }
    let (x, v) = if fc < fd { (c, fc) } else { (d, fd) };
    let (x, v) = if vals[best] < v { (grid[best], vals[best]) } else { (x, v) };
    Ok(KuznetsovValue { value: v, r: x.exp() })
}

/// The scale functions of the box example, by regime of `α` (or `λ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExampleScale {
    /// `ω_{a−b}`: `|a^{1/α} − b^{1/α}|`, `|a ln a − b ln b|`, `|a − b|`.
    Omega { alpha: f64, a: f64, b: f64 },
    /// `σ_T`: `T^{1/α}`, `T |ln T|`, `T`.
    SigmaT { alpha: f64, t: f64 },
    /// `σ_γ`: `γ^d`, `γ^d ln γ`, `γ^{d+1−α}`.
    SigmaGamma { alpha: f64, gamma: f64, d: usize },
    /// `σ̃_M`: `M^{1/λ} |ln M|`, `M ln² M`, `M`.
    SigmaTildeM { lambda: f64, m: f64 },
    /// `σ̃_γ`: `γ^d`, `γ^d ln² γ`, `γ^{d+1−λ} ln γ`.
    SigmaTildeGamma { lambda: f64, gamma: f64, d: usize },
}

impl ExampleScale {
    pub fn value(&self) -> Result<f64> {
        let order = match *self {
            Self::Omega { alpha, .. } | Self::SigmaT { alpha, .. } | Self::SigmaGamma { alpha, .. } => alpha,
            Self::SigmaTildeM { lambda, .. } | Self::SigmaTildeGamma { lambda, .. } => lambda,
        };
        check_order(order)?;
        let above = order > 1.0;
        let at_one = order == 1.0;
        Ok(match *self {
            Self::Omega { a, b, .. } => {
                if above {
                    (a.powf(1.0 / order) - b.powf(1.0 / order)).abs()
                } else if at_one {
                    (xlnx(a) - xlnx(b)).abs()
                } else {
                    (a - b).abs()
                }
            }
            Self::SigmaT { t, .. } => {
                if above {
                    t.powf(1.0 / order)
                } else if at_one {
                    xlnx(t).abs()
                } else {
                    t
                }
            }
            Self::SigmaGamma { gamma, d, .. } => {
                let gd = gamma.powi(d as i32);
                if above {
                    gd
                } else if at_one {
                    gd * gamma.ln()
                } else {
                    gamma.powf(d as f64 + 1.0 - order)
                }
            }
            Self::SigmaTildeM { m, .. } => {
                if m == 0.0 {
                    0.0
                } else if above {
                    m.powf(1.0 / order) * m.ln().abs()
                } else if at_one {
                    m * m.ln().powi(2)
                } else {
                    m
                }
            }
            Self::SigmaTildeGamma { gamma, d, .. } => {
                let gd = gamma.powi(d as i32);
                if above {
                    gd
                } else if at_one {
                    gd * gamma.ln().powi(2)
                } else {
                    gamma.powf(d as f64 + 1.0 - order) * gamma.ln()
                }
            }
        })
    }
}

/// Elementary inequalities used to compare the power and logarithmic moduli.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum LogInequality {
    /// `|a − b| (−ln(a ∨ b))⁺ ≤ |a − b| + |a ln a − b ln b|`, `a, b > 0`.
    LogGap { a: f64, b: f64 },
    /// `|(x^a − 1)/a − (x^b − 1)/b| ≤ |a − b| (1 ∨ x^a ∨ x^b) ln² x`, `x > 0`, `a, b ≠ 0`.
    PowerGap { x: f64, a: f64, b: f64 },
    /// `|x^{2a}/(2a) + x^{2b}/(2b) − 2x^{a+b}/(a+b)| / (a − b)² ≤ C (x^a ∨ x^b)² (1 + ln² x)`
    /// at finite `a, b > 0`, `a ≠ b`, with the constant of [`power_gap_constant`].
    PowerGapSquared { x: f64, a: f64, b: f64 },
}

/// Both sides of an inequality; the contract is `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Sides {
    /// `lhs ≤ rhs` up to a relative rounding allowance.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12 * self.rhs.abs().max(self.lhs.abs()) + 1e-300
    }
}

/// `max(1/(2(a+b)) + (a+b)/(4ab), 1/(ab(a+b)))`, which tends to `max(3/(4c), 1/(2c³))` as `a, b → c`.
pub fn power_gap_constant(a: f64, b: f64) -> f64 {
    let s = a + b;
    (1.0 / (2.0 * s) + s / (4.0 * a * b)).max(1.0 / (a * b * s))
}

impl LogInequality {
    pub fn sides(&self) -> Result<Sides> {
        match *self {
            Self::LogGap { a, b } => {
                if !(a > 0.0 && b > 0.0) {
                    return domain("a and b must be positive");
                }
                let d = (a - b).abs();
                Ok(Sides {
                    lhs: d * (-(a.max(b)).ln()).max(0.0),
                    rhs: d + (xlnx(a) - xlnx(b)).abs(),
                })
            }
            Self::PowerGap { x, a, b } => {
                if !(x > 0.0 && a != 0.0 && b != 0.0) {
                    return domain("x must be positive and a, b nonzero");
                }
                let l = x.ln();
                // (x^a − 1)/a = expm1(a ln x)/a keeps precision for small a ln x
                let fa = (a * l).exp_m1() / a;
                let fb = (b * l).exp_m1() / b;
                Ok(Sides {
                    lhs: (fa - fb).abs(),
                    rhs: (a - b).abs() * 1f64.max(x.powf(a)).max(x.powf(b)) * l * l,
                })
            }
            Self::PowerGapSquared { x, a, b } => {
                if !(x > 0.0 && a > 0.0 && b > 0.0 && a != b) {
                    return domain("x, a, b must be positive and a ≠ b");
                }
                let l = x.ln();
                // sum of squares form avoids cancellation
                let (xa, xb) = (x.powf(a), x.powf(b));
                let s = a + b;
                let num = (xa - xb).powi(2) / (2.0 * s) + (b * xa - a * xb).powi(2) / (2.0 * a * b * s);
                Ok(Sides {
                    lhs: num / (a - b).powi(2),
                    rhs: power_gap_constant(a, b) * xa.max(xb).powi(2) * (1.0 + l * l),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stats(l1: f64, bv: f64) -> InitialDataStats {
        InitialDataStats::new(l1, bv, 0.0, 1.0).unwrap()
    }

    #[test]
    fn ent_examples() {
        assert_eq!(ent(&stats(3.0, 0.0), 1).unwrap(), 0.0);
        assert_eq!(ent(&stats(2.0, 2.0), 2).unwrap(), 0.0);
        let e = ent(&stats(8.0, 4.0), 1).unwrap();
        assert!((e - 4.0 * (1.0 + 2f64.ln())).abs() < 1e-14);
        assert!(ent(&stats(1.0, 1.0), 3).is_err());
    }

    #[test]
    fn ent_never_exceeds_l1() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let bv: f64 = rng.random_range(0.0..10.0);
            let l1: f64 = rng.random_range(0.0..100.0);
            let s = stats(l1, bv);
            assert!(s.ent1 <= l1 * (1.0 + 1e-14), "{l1} {bv}");
            assert!(s.ent2 <= l1 * (1.0 + 1e-14), "{l1} {bv}");
        }
    }

    #[test]
    fn nonlinearity_modulus_examples() {
        let s = stats(2.0, 2.0);
        let same = NonlinearityGap::constant(0.7, 0.7, 1.5);
        for a in [0.5, 1.0, 1.5] {
            let g = NonlinearityGap { root_order: a, ..same };
            assert_eq!(nonlinearity_modulus(1.0, a, &s, &g).unwrap().value, 0.0);
        }
        let g = NonlinearityGap::constant(0.9, 0.4, 2.0);
        let v = nonlinearity_modulus(1.0, 2.0, &s, &g).unwrap();
        assert!((v.value - 2.0 * (0.9f64.sqrt() - 0.4f64.sqrt())).abs() < 1e-14);
        assert_eq!(v.branch, Branch::Boundary);
        let g = NonlinearityGap {
            diffusion: 0.3,
            ..NonlinearityGap::constant(0.0, 0.0, 0.5)
        };
        let v = nonlinearity_modulus(1.0, 0.5, &s, &g).unwrap();
        assert!((v.value - 0.6).abs() < 1e-14);
        assert_eq!(v.branch, Branch::Supercritical);
        assert_eq!(nonlinearity_modulus(0.0, 1.0, &s, &g).unwrap().value, 0.0);
    }

    #[test]
    fn root_order_mismatch_is_rejected() {
        let g = NonlinearityGap::constant(0.9, 0.4, 1.2);
        assert!(nonlinearity_modulus(1.0, 1.5, &stats(2.0, 2.0), &g).is_err());
    }

    #[test]
    fn finite_near_critical_order() {
        let s = stats(8.0, 4.0);
        for a in [1.0 - 1e-6, 1.0 + 1e-6] {
            let g = NonlinearityGap::constant(0.9, 0.4, a);
            let v = nonlinearity_modulus(0.5, a, &s, &g).unwrap();
            assert!(v.value.is_finite() && v.value > 0.0);
        }
    }

    #[test]
    fn moduli_grow_with_gap_and_horizon() {
        let s = stats(8.0, 4.0);
        for a in [0.3, 1.0, 1.7] {
            let small = NonlinearityGap::constant(0.5, 0.4, a);
            let big = NonlinearityGap::constant(0.5, 0.2, a);
            let mut prev = 0.0;
            for t in [0.1, 0.2, 0.5, 1.0] {
                let vs = nonlinearity_modulus(t, a, &s, &small).unwrap().value;
                let vb = nonlinearity_modulus(t, a, &s, &big).unwrap().value;
                assert!(vb >= vs && vs >= prev);
                prev = vs;
            }
        }
    }

    #[test]
    fn sampled_gap_of_constant_slopes() {
        let phi = Nonlinearity::Linear { slope: 0.9 };
        let psi = Nonlinearity::Linear { slope: 0.4 };
        let z = Nonlinearity::Zero;
        let g = NonlinearityGap::sample(&z, &z, &phi, &psi, 1.5, 0.0, 1.0, DEFAULT_SAMPLES).unwrap();
        let c = NonlinearityGap::constant(0.9, 0.4, 1.5);
        assert!((g.diffusion - c.diffusion).abs() < 1e-15);
        assert!((g.root - c.root).abs() < 1e-15);
        assert!((g.log - c.log).abs() < 1e-15);
        assert_eq!(g.samples, DEFAULT_SAMPLES);
    }

    #[test]
    fn time_modulus_examples() {
        let s = stats(2.0, 2.0);
        let n = DiffusionNorms::constant(1.0, 2.0);
        let v = time_modulus(2.0, &s, &n, 1.0, 0.0).unwrap();
        assert!((v.diffusion.value - 2.0).abs() < 1e-15);
        assert_eq!(time_modulus(1.0, &s, &n, 0.3, 0.3).unwrap().diffusion.value, 0.0);
        let n = DiffusionNorms::constant(0.7, 0.5);
        let one = time_modulus(0.5, &s, &n, 0.2, 0.0).unwrap().diffusion.value;
        let two = time_modulus(0.5, &s, &n, 0.4, 0.0).unwrap().diffusion.value;
        assert!((two - 2.0 * one).abs() < 1e-15);
        let phi = Nonlinearity::Burgers { scale: 1.0 };
        let n = DiffusionNorms::sample(&phi, &Nonlinearity::Linear { slope: 1.0 }, 1.0, 0.0, 2.0, 100).unwrap();
        let v = time_modulus(1.0, &s, &n, 0.5, 0.25).unwrap();
        assert!((v.transport - 2.0 * 2.0 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn lip_alpha_bound_examples() {
        let s = stats(2.0, 2.0);
        for l in [0.5, 1.0, 1.5] {
            assert_eq!(lip_alpha_bound(l, 0.0, &s).unwrap().value, 0.0);
        }
        let v = lip_alpha_bound(1.5, (-1f64).exp(), &s).unwrap().value;
        assert!((v - (-2.0f64 / 3.0).exp() * 4.0).abs() < 1e-12);
        let v = lip_alpha_bound(0.5, 0.3, &s).unwrap().value;
        assert!((v - 0.3 * 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_bounds() {
        match constant_bound(1, 0.5).unwrap() {
            ConstantBound::Explicit { value } => {
                let g = 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt());
                assert!((value - 2.0 * (4.0 * g + 2.0 * g)).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(constant_bound(1, 1.0).unwrap(), ConstantBound::Unknown));
        assert!(matches!(
            constant_bound(2, 1.5).unwrap(),
            ConstantBound::UpToDimensionalFactor { .. }
        ));
    }

    fn kin(alpha: f64, gap: f64) -> KuznetsovInput {
        KuznetsovInput {
            horizon: 1.0,
            alpha,
            beta: alpha,
            gamma: 1.0,
            gap,
            m: 1.0,
        }
    }

    #[test]
    fn kuznetsov_trivial_and_infimum() {
        assert_eq!(kuznetsov_modulus(&kin(1.2, 0.0), RadiusChoice::Optimize).unwrap().value, 0.0);
        let inp = KuznetsovInput {
            beta: 1.1,
            gap: 0.0,
            m: 0.0,
            ..kin(1.2, 0.0)
        };
        assert_eq!(kuznetsov_modulus(&inp, RadiusChoice::Optimize).unwrap().value, 0.0);
        for (a, h) in [(0.5, 0.01), (1.0, 0.01), (1.5, 0.01)] {
            let opt = kuznetsov_modulus(&kin(a, h), RadiusChoice::Optimize).unwrap().value;
            for k in -12..4 {
                let r = 2f64.powi(k);
                let v = kuznetsov_modulus(&kin(a, h), RadiusChoice::Fixed(r)).unwrap().value;
                assert!(opt <= v * (1.0 + 1e-12), "alpha={a} r={r}: {opt} > {v}");
            }
        }
    }

    #[test]
    fn kuznetsov_tail_integral_matches_quadrature() {
        for &(a, r) in &[(0.5, 0.3), (1.0, 0.1), (1.5, 0.7), (1.5, 3.0)] {
            let g = levy_coefficient(1, a).unwrap();
            let f = |z: f64| 2.0 * 2.0 * z.min(2.0) * g * z.powf(-1.0 - a);
            let mut q = 0.0;
            if r < 2.0 {
                q += adaptive(f, r, 2.0, Tolerance::default()).unwrap().value;
            }
            q += adaptive_to_infinity(f, r.max(2.0), Tolerance::default()).unwrap().value;
            let c = box_tail_integral(a, 1.0, r).unwrap();
            assert!((c / q - 1.0).abs() < 1e-8, "{a} {r}: {c} vs {q}");
        }
    }

    #[test]
    fn kuznetsov_subcritical_matches_nonlinearity_modulus_with_its_constant() {
        let h = 0.01;
        let k = kuznetsov_modulus(&kin(0.5, h), RadiusChoice::Optimize).unwrap().value;
        let g = NonlinearityGap {
            diffusion: h,
            ..NonlinearityGap::constant(0.0, 0.0, 0.5)
        };
        let e = nonlinearity_modulus(1.0, 0.5, &stats(2.0, 2.0), &g).unwrap().value;
        let ConstantBound::Explicit { value: c } = constant_bound(1, 0.5).unwrap() else {
            unreachable!()
        };
        let ratio = k / (c * e);
        assert!((0.5..=2.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn kuznetsov_order_gap_branch_is_finite() {
        let inp = KuznetsovInput {
            alpha: 1.2,
            beta: 1.25,
            gap: 0.0,
            m: 0.5,
            ..kin(1.2, 0.0)
        };
        let v = kuznetsov_modulus(&inp, RadiusChoice::Optimize).unwrap();
        assert!(v.value.is_finite() && v.value > 0.0 && v.r > 0.0);
        let both = KuznetsovInput { gap: 0.1, ..inp };
        assert!(matches!(
            kuznetsov_modulus(&both, RadiusChoice::Optimize),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn example_scale_values() {
        assert_eq!(ExampleScale::Omega { alpha: 1.5, a: 0.3, b: 0.3 }.value().unwrap(), 0.0);
        let w = ExampleScale::Omega { alpha: 1.0, a: 0.2, b: 0.1 }.value().unwrap();
        assert!((w - 0.091_629_073_187_415_5).abs() < 1e-12, "{w}");
        let e = std::f64::consts::E;
        let s = ExampleScale::SigmaTildeGamma {
            lambda: 1.0,
            gamma: e,
            d: 2,
        }
        .value()
        .unwrap();
        assert!((s - e * e).abs() < 1e-12);
        let t = ExampleScale::SigmaT { alpha: 1.5, t: 8.0 }.value().unwrap();
        assert!((t - 4.0).abs() < 1e-12);
    }

    #[test]
    fn log_inequalities_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let a = 10f64.powf(rng.random_range(-8.0..1.0));
            let b = 10f64.powf(rng.random_range(-8.0..1.0));
            assert!(LogInequality::LogGap { a, b }.sides().unwrap().holds());
            let x = 10f64.powf(rng.random_range(-4.0..4.0));
            let pa: f64 = rng.random_range(-3.0..3.0);
            let pb: f64 = rng.random_range(-3.0..3.0);
            if pa != 0.0 && pb != 0.0 {
                let s = LogInequality::PowerGap { x, a: pa, b: pb }.sides().unwrap();
                assert!(s.holds(), "{x} {pa} {pb}: {s:?}");
            }
            let c: f64 = rng.random_range(0.05..3.0);
            let eps: f64 = rng.random_range(1e-4..1e-2) * c;
            let s = LogInequality::PowerGapSquared { x, a: c + eps, b: c - eps }.sides().unwrap();
            assert!(s.holds(), "{x} {c}: {s:?}");
        }
    }

    #[test]
    fn log_inequality_trivial_cases() {
        let s = LogInequality::LogGap { a: 0.3, b: 0.3 }.sides().unwrap();
        assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        let s = LogInequality::PowerGap { x: 1.0, a: 0.4, b: -1.2 }.sides().unwrap();
        assert_eq!((s.lhs, s.rhs), (0.0, 0.0));
        let e2 = (-2f64).exp();
        let e3 = (-3f64).exp();
        assert!(LogInequality::LogGap { a: e2, b: e3 }.sides().unwrap().holds());
    }
}
