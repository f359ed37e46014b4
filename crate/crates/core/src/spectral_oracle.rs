//! Reference solutions of `∂_t u + a(−Δ)^{α/2} u = 0` with box data `γ 1_{[−γ, γ]}`.
//!
//! Point values come from Fourier quadrature. L¹ distances between two such solutions
//! use the equivalent stable-law representation `u = γ (P(X > x − γ) − P(X > x + γ))`,
//! which stays accurate when the two solutions are very close.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::levy::FractionalOrder;
use crate::moduli::InitialDataStats;
use crate::quadrature::{adaptive, adaptive_to_infinity, GaussLegendre, Tolerance};
use crate::stable::{survival_difference, StableLaw};

/// Number of intervals in the time sampling of `C([0, T]; L¹)`; 17 samples with both ends.
pub const TIME_INTERVALS: usize = 16;

/// Box example in `d` dimensions; fields beyond the statistics are one-dimensional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxExampleSpec {
    pub d: usize,
    pub gamma: f64,
    pub a: f64,
    pub alpha: FractionalOrder,
    pub horizon: f64,
}

impl BoxExampleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return domain("dimension must be at least 1");
        }
        if !(self.gamma > 0.0 && self.a >= 0.0 && self.horizon > 0.0) {
            return domain(format!(
                "need γ > 0, a ≥ 0, T > 0; got γ = {}, a = {}, T = {}",
                self.gamma, self.a, self.horizon
            ));
        }
        if self.alpha == FractionalOrder::Zero {
            return domain("the box example needs α in (0, 2]");
        }
        Ok(())
    }

    fn one_dimensional(&self) -> Result<()> {
        self.validate()?;
        if self.d != 1 {
            return Err(Error::Unsupported(format!(
                "field evaluation is one-dimensional, got d = {}",
                self.d
            )));
        }
        Ok(())
    }
}

/// Truncation and panel budget of the Fourier quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Absolute bound on the discarded tail beyond the cutoff.
    pub tail_tolerance: f64,
    /// Largest number of half-period panels allowed before giving up.
    pub max_panels: usize,
    /// Gauss–Legendre order on each panel.
    pub order: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-12,
            max_panels: 2_000_000,
            order: 10,
        }
    }
}

/// `∥u0∥_1 = 2^d γ^{d+1}`, `|u0|_BV = d 2^d γ^d`, `Ent_i = d 2^d γ^d (1 + ln(γ/d)^i) 1_{γ>d}`.
pub fn box_data_stats(d: usize, gamma: f64) -> Result<InitialDataStats> {
    if d == 0 || !(gamma > 0.0) {
        return domain(format!("need d ≥ 1 and γ > 0, got d = {d}, γ = {gamma}"));
    }
    let df = d as f64;
    let l1 = 2f64.powi(d as i32) * gamma.powi(d as i32 + 1);
    let bv = df * 2f64.powi(d as i32) * gamma.powi(d as i32);
    let mut s = InitialDataStats::new(l1, bv, 0.0, gamma)?;
    let ent = |i: i32| {
        if gamma > df {
            bv * (1.0 + (gamma / df).ln().powi(i))
        } else {
            0.0
        }
    };
    s.ent1 = ent(1);
    s.ent2 = ent(2);
    Ok(s)
}

fn box_value(gamma: f64, x: f64) -> f64 {
    let ax = x.abs();
    if ax < gamma {
        gamma
    } else if ax == gamma {
        0.5 * gamma
    } else {
        0.0
    }
}

/// `u(x, t)` by quadrature of `∫ e^{−t a |2πξ|^α} sin(2πγξ)/(πξ) e^{2πixξ} dξ`, times `γ`.
pub fn linear_solution(spec: &BoxExampleSpec, t: f64, x: f64) -> Result<f64> {
    linear_solution_with(spec, t, x, &QuadratureConfig::default())
}

pub fn linear_solution_with(spec: &BoxExampleSpec, t: f64, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    spec.one_dimensional()?;
    if !(t >= 0.0) {
        return domain(format!("time must be nonnegative, got {t}"));
    }
    let alpha = spec.alpha.value();
    let gamma = spec.gamma;
    let c = t * spec.a * (2.0 * PI).powf(alpha);
    if c == 0.0 {
        return Ok(box_value(gamma, x));
    }
    // tail: 2γ/π ∫_Ξ^∞ e^{−cξ^α}/ξ dξ = (2γ/(πα)) E₁(cΞ^α) ≤ (2γ/(πα)) e^{−W}/W, W = cΞ^α
    let scale = 2.0 * gamma / (PI * alpha);
    let mut w: f64 = 1.0;
    while scale * (-w).exp() / w > cfg.tail_tolerance {
        w += 1.0;
    }
    let cutoff = (w / c).powf(1.0 / alpha);
    // integrand on ξ > 0: (γ/(2πξ)) e^{−cξ^α} (sin 2π(γ+x)ξ + sin 2π(γ−x)ξ)
    let k1 = gamma + x;
    let k2 = gamma - x;
    let freq = k1.abs().max(k2.abs());
    let width = 0.5 / freq;
    let panels = (cutoff / width).ceil();
    if panels > cfg.max_panels as f64 {
        return Err(Error::Quadrature(format!(
            "cutoff {cutoff:e} needs {panels:e} panels (budget {}) at t = {t}, x = {x}; the damping e^(-t a |2πξ|^α) is too weak",
            cfg.max_panels
        )));
    }
    let rule = GaussLegendre::get(cfg.order);
    let f = |xi: f64| {
        let damp = (-c * xi.powf(alpha)).exp();
        let s = sinc_times(k1, xi) + sinc_times(k2, xi);
        0.5 * gamma / PI * damp * s
    };
    // ξ^α is not smooth at 0: geometric sub-panels inside the first panel
    let mut total = 0.0;
    let mut hi = width;
    for _ in 0..60 {
        total += rule.integrate(0.5 * hi, hi, f);
        hi *= 0.5;
    }
    total += rule.integrate(0.0, hi, f);
    let n = panels as usize;
    for p in 1..n {
        let a = p as f64 * width;
        total += rule.integrate(a, a + width, f);
    }
    Ok(2.0 * total)
}

/// `sin(2πkξ)/ξ` with its limit `2πk` at `ξ = 0`.
fn sinc_times(k: f64, xi: f64) -> f64 {
    if xi == 0.0 {
        2.0 * PI * k
    } else {
        (2.0 * PI * k * xi).sin() / xi
    }
}

/// `E_Q = ∫_{[−γ,γ]} (u_a − u_b)(x, T) dx = γ² (2/π) ∫ (e^{−A|ξ|^α} − e^{−B|ξ|^α}) sinc²ξ dξ`
/// with `A = Tγ^{−α}a`, `B = Tγ^{−α}b`.
pub fn error_functional_eq(a: f64, b: f64, alpha: f64, gamma: f64, horizon: f64) -> Result<f64> {
    error_functional_eq_with(a, b, alpha, gamma, horizon, &QuadratureConfig::default())
}

pub fn error_functional_eq_with(
    a: f64,
    b: f64,
    alpha: f64,
    gamma: f64,
    horizon: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return domain(format!("α must lie in (0, 2], got {alpha}"));
    }
    if !(a >= 0.0 && b >= 0.0 && gamma > 0.0 && horizon >= 0.0) {
        return domain("need a, b, T ≥ 0 and γ > 0");
    }
    if a == b {
        return Ok(0.0);
    }
    let s = horizon * gamma.powf(-alpha);
    let (ca, cb) = (s * a, s * b);
    let diff = |xi: f64| {
        let w = xi.powf(alpha);
        // e^{−ca w} − e^{−cb w} = ±e^{−min w} (1 − e^{−|ca − cb| w}), finite as w → ∞
        let sign = if ca < cb { 1.0 } else { -1.0 };
        -sign * (-ca.min(cb) * w).exp() * (-(ca - cb).abs() * w).exp_m1()
    };
    // |D| ≤ |A − B| w e^{−min(A,B) w} ≤ |A − B|/(e min(A, B)), and at most 1
    let lo = ca.min(cb);
    let sup = if lo > 0.0 {
        ((ca - cb).abs() / (std::f64::consts::E * lo)).min(1.0)
    } else {
        1.0
    };
    // the oscillating part of the tail, ∫_Ξ^∞ D cos 2ξ / ξ², is bounded by 2 sup|D| / Ξ²
    let cutoff = (2.0 * sup / cfg.tail_tolerance).sqrt().max(10.0);
    let width = 0.5 * PI;
    let panels = (cutoff / width).ceil();
    if panels > cfg.max_panels as f64 {
        return Err(Error::Quadrature(format!(
            "cutoff {cutoff:e} needs {panels:e} panels (budget {})",
            cfg.max_panels
        )));
    }
    let rule = GaussLegendre::get(cfg.order);
    let sinc2 = |xi: f64| {
        if xi == 0.0 {
            1.0
        } else {
            let s = xi.sin() / xi;
            s * s
        }
    };
    let g = |xi: f64| diff(xi) * sinc2(xi);
    let mut body = 0.0;
    let mut hi = width;
    for _ in 0..60 {
        body += rule.integrate(0.5 * hi, hi, g);
        hi *= 0.5;
    }
    body += rule.integrate(0.0, hi, g);
    let n = panels as usize;
    for p in 1..n {
        let lo = p as f64 * width;
        body += rule.integrate(lo, lo + width, g);
    }
    let end = n as f64 * width;
    // sin² = (1 − cos 2ξ)/2: the smooth half is integrated, the oscillating half is the bounded remainder
    let smooth = adaptive_to_infinity(
        |xi| 0.5 * diff(xi) / (xi * xi),
        end,
        Tolerance {
            abs: 1e-16,
            rel: 1e-10,
            max_intervals: 2000,
        },
    )?;
    let total = body + smooth.value;
    Ok(gamma * gamma * 4.0 / PI * total)
}

/// `∥u_p − u_q∥_{L¹(ℝ)}` for the box `γ 1_{[−γ,γ]}` convolved with two stable laws.
pub fn box_l1_distance(p: &StableLaw, q: &StableLaw, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return domain(format!("γ must be positive, got {gamma}"));
    }
    if p == q {
        return Ok(0.0);
    }
    // Δu(x) = γ (ΔS(x − γ) − ΔS(x + γ)), even in x
    let du = |x: f64| -> f64 {
        let a = survival_difference(p, q, x - gamma).unwrap_or(f64::NAN);
        let b = survival_difference(p, q, x + gamma).unwrap_or(f64::NAN);
        (gamma * (a - b)).abs()
    };
    let positive: Vec<f64> = [p.scale, q.scale].into_iter().filter(|&s| s > 0.0).collect();
    let s = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let h0 = if s.is_finite() { s.min(gamma) * 1e-5 } else { gamma * 1e-5 };
    // geometric panels clustered at the edge x = γ on both sides
    let mut pts = vec![0.0, gamma, 2.0 * gamma];
    let mut h = h0;
    while h < gamma {
        pts.push(gamma - h);
        pts.push(gamma + h);
        h *= 2.0;
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    // Δu is bounded by γ, so an absolute floor relative to γ² is a tiny fraction of any distance of interest
    let tol = Tolerance {
        abs: 1e-12 * gamma * gamma,
        rel: 1e-9,
        max_intervals: 200,
    };
    let mut total = 0.0;
    for w in pts.windows(2) {
        let est = adaptive(du, w[0], w[1], tol)?;
        total += est.value;
    }
    // doubling panels out to a point well beyond both scales, where Δu keeps one sign
    let s_max = [p.scale, q.scale].into_iter().fold(0.0, f64::max);
    let far = (4.0 * gamma).max(1e4 * s_max);
    let mut x = 2.0 * gamma;
    while x < far {
        let hi = (2.0 * x).min(far);
        total += adaptive(du, x, hi, tol)?.value;
        x = hi;
    }
    // ∫_X^∞ Δu = γ ∫_{X−γ}^{X+γ} ΔS telescopes, so no cancellation at large x
    let window = adaptive(
        |y| survival_difference(p, q, y).unwrap_or(f64::NAN),
        far - gamma,
        far + gamma,
        Tolerance {
            abs: 1e-300,
            rel: 1e-9,
            max_intervals: 200,
        },
    )?;
    total += (gamma * window.value).abs();
    if !total.is_finite() {
        return Err(Error::Quadrature("L1 distance integrand is not finite".into()));
    }
    Ok(2.0 * total)
}

/// L¹ error of a grid function split at the edges of its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridError {
    /// Against exact cell averages on the window.
    pub window: f64,
    /// Mass of the exact solution outside the window, where `g` is zero.
    pub outside: f64,
}

impl GridError {
    /// `∥g − u(t)∥_{L¹(ℝ)}`.
    pub fn total(&self) -> f64 {
        self.window + self.outside
    }
}

/// Error of a grid function `g` (zero outside its window) against the box solution with
/// `t·a = ta`: exact cell averages on the window plus the exact mass outside.
pub fn grid_l1_error(g: &GridFunction, alpha: f64, ta: f64, gamma: f64) -> Result<GridError> {
    if !(gamma > 0.0) {
        return domain(format!("γ must be positive, got {gamma}"));
    }
    let law = StableLaw::heat_kernel(alpha, ta)?;
    let u = |x: f64| -> f64 {
        let a = law.survival(x - gamma).unwrap_or(f64::NAN);
        let b = law.survival(x + gamma).unwrap_or(f64::NAN);
        gamma * (a - b)
    };
    let rule = GaussLegendre::get(4);
    let mut err = 0.0;
    for (i, v) in g.values.iter().enumerate() {
        let lo = g.x0 + i as f64 * g.dx;
        // cells containing an edge of the box are split there
        let mut pts = vec![lo, lo + g.dx];
        for e in [-gamma, gamma] {
            if e > lo && e < lo + g.dx {
                pts.insert(1, e);
            }
        }
        pts.sort_by(f64::total_cmp);
        let avg: f64 = pts.windows(2).map(|w| rule.integrate(w[0], w[1], u)).sum::<f64>() / g.dx;
        err += (v - avg).abs() * g.dx;
    }
    // ∫_X^∞ u = γ ∫_{X−γ}^{X+γ} S, and u ≥ 0 outside the box
    let tail = |x: f64| -> Result<f64> {
        if x <= gamma {
            return domain("grid window must contain the box");
        }
        let est = adaptive(
            |y| law.survival(y).unwrap_or(f64::NAN),
            x - gamma,
            x + gamma,
            Tolerance {
                abs: 1e-15,
                rel: 1e-10,
                max_intervals: 200,
            },
        )?;
        Ok(gamma * est.value)
    };
    let outside = tail(-g.x0)? + tail(g.right())?;
    if !(err + outside).is_finite() {
        return Err(Error::Quadrature("grid error is not finite".into()));
    }
    Ok(GridError { window: err, outside })
}

fn time_samples(horizon: f64) -> impl Iterator<Item = f64> {
    (0..=TIME_INTERVALS).map(move |j| horizon * j as f64 / TIME_INTERVALS as f64)
}

/// `max_t ∥u_a(t) − u_b(t)∥_{L¹}` over 17 equally spaced samples of `[0, T]`.
pub fn l1_distance_linear(a: f64, b: f64, alpha: f64, gamma: f64, horizon: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0 && horizon >= 0.0) {
        return domain("need a, b, T ≥ 0");
    }
    let mut best: f64 = 0.0;
    for t in time_samples(horizon) {
        let p = StableLaw::heat_kernel(alpha, t * a)?;
        let q = StableLaw::heat_kernel(alpha, t * b)?;
        best = best.max(box_l1_distance(&p, &q, gamma)?);
    }
    Ok(best)
}

/// `∥u(t) − u(s)∥_{L¹}` for one diffusion coefficient.
pub fn l1_time_increment(a: f64, alpha: f64, gamma: f64, t: f64, s: f64) -> Result<f64> {
    let p = StableLaw::heat_kernel(alpha, t * a)?;
    let q = StableLaw::heat_kernel(alpha, s * a)?;
    box_l1_distance(&p, &q, gamma)
}

/// `max_t ∥u^{λ+δ}(t) − u^{λ−δ}(t)∥_{L¹} / (2δ)`.
pub fn lip_alpha_estimate(lambda: f64, delta: f64, a: f64, gamma: f64, horizon: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return domain(format!("δ must be positive, got {delta}; identical orders give 0/0"));
    }
    if !(lambda - delta > 0.0 && lambda + delta < 2.0) {
        return domain(format!("λ ± δ must stay in (0, 2), got λ = {lambda}, δ = {delta}"));
    }
    let mut best: f64 = 0.0;
    for t in time_samples(horizon) {
        let p = StableLaw::heat_kernel(lambda + delta, t * a)?;
        let q = StableLaw::heat_kernel(lambda - delta, t * a)?;
        best = best.max(box_l1_distance(&p, &q, gamma)?);
    }
    Ok(best / (2.0 * delta))
}
