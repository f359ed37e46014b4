//! Symmetric α-stable laws with characteristic function `exp(−|s θ|^α)`.
//!
//! The fundamental solution of `∂_t u + a(−Δ)^{α/2} u = 0` at time `t` is the density of
//! such a law with scale `s = (t a)^{1/α}`, so the solution with box data is a difference of
//! two distribution functions. Survival functions for `α ∉ {1, 2}` use Nolan's single
//! integral over `θ ∈ (0, π/2)`, evaluated in log space.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{domain, Result};
use crate::quadrature::{adaptive, Tolerance};

const THETA_TOL: Tolerance = Tolerance {
    abs: 1e-16,
    rel: 1e-11,
    max_intervals: 4000,
};

/// `X = scale · Z` with `E exp(iθZ) = exp(−|θ|^α)`, `α ∈ (0, 2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableLaw {
    pub alpha: f64,
    pub scale: f64,
}

impl StableLaw {
    pub fn new(alpha: f64, scale: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return domain(format!("stability index must lie in (0, 2], got {alpha}"));
        }
        if !(scale >= 0.0 && scale.is_finite()) {
            return domain(format!("scale must be finite and nonnegative, got {scale}"));
        }
        Ok(Self { alpha, scale })
    }

    /// Law of the kernel of `exp(−t a (−Δ)^{α/2})`: scale `(t a)^{1/α}`.
    pub fn heat_kernel(alpha: f64, ta: f64) -> Result<Self> {
        if !(ta >= 0.0) {
            return domain(format!("t·a must be nonnegative, got {ta}"));
        }
        Self::new(alpha, ta.powf(1.0 / alpha))
    }

    /// `P(X > x)`.
    pub fn survival(&self, x: f64) -> Result<f64> {
        if self.scale == 0.0 {
            return Ok(if x < 0.0 {
                1.0
            } else if x > 0.0 {
                0.0
            } else {
                0.5
            });
        }
        let y = x / self.scale;
        if y < 0.0 {
            return Ok(1.0 - standard_survival(self.alpha, -y)?);
        }
        standard_survival(self.alpha, y)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.survival(x)?)
    }
}

enum Branch {
    Below,
    Above,
    Cauchy,
    Gauss,
}

fn branch(alpha: f64) -> Branch {
    if alpha == 2.0 {
        Branch::Gauss
    } else if alpha == 1.0 {
        Branch::Cauchy
    } else if alpha < 1.0 {
        Branch::Below
    } else {
        Branch::Above
    }
}

/// `ln(y^{α/(α−1)} V(θ))` for Nolan's `V` with `β = 0`.
fn log_exponent(alpha: f64, y: f64, theta: f64) -> f64 {
    let c = theta.cos();
    alpha / (alpha - 1.0) * (y.ln() + c.ln() - (alpha * theta).sin().ln()) + ((alpha - 1.0) * theta).cos().ln()
        - c.ln()
}

/// Integrand of `π · P(Z > y)`, `y > 0`.
fn nolan_integrand(alpha: f64, y: f64, theta: f64) -> f64 {
    if theta <= 0.0 || theta >= FRAC_PI_2 {
        // limits at the end points: 0 at θ = 0, 1 at θ = π/2 for both branches
        return if theta <= 0.0 { 0.0 } else { 1.0 };
    }
    let e = log_exponent(alpha, y, theta).exp();
    if alpha < 1.0 {
        -(-e).exp_m1()
    } else {
        (-e).exp()
    }
}

/// Point in `(0, π/2)` where the exponent crosses 1; the integrand is steepest nearby.
fn crossing(alpha: f64, y: f64) -> Option<f64> {
    let f = |t: f64| log_exponent(alpha, y, t);
    let (mut lo, mut hi) = (1e-12, FRAC_PI_2 - 1e-12);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return None;
    }
    // a breakpoint only has to be close; 50 halvings reach ~1e-15 of π/2
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn integrate_theta(alpha: f64, y: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut total = 0.0;
    let mut points = vec![0.0];
    if let Some(c) = crossing(alpha, y) {
        points.push(c);
    }
    points.push(FRAC_PI_2);
    for w in points.windows(2) {
        total += adaptive(&f, w[0], w[1], THETA_TOL)?.value;
    }
    Ok(total / PI)
}

/// `P(Z > y)` for the standard law, `y ≥ 0`.
fn standard_survival(alpha: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Ok(0.5);
    }
    match branch(alpha) {
        Branch::Gauss => Ok(0.5 * libm::erfc(0.5 * y)),
        Branch::Cauchy => Ok((1.0 / y).atan() / PI),
        _ => integrate_theta(alpha, y, |t| nolan_integrand(alpha, y, t)),
    }
}

/// `P(X_a > x) − P(X_b > x)`, evaluated as one integral when both laws share a branch
/// so that close laws do not cancel catastrophically.
pub fn survival_difference(a: &StableLaw, b: &StableLaw, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Ok(-survival_difference(a, b, -x)?);
    }
    if x == 0.0 || a == b {
        return Ok(0.0);
    }
    if a.scale == 0.0 || b.scale == 0.0 {
        return Ok(a.survival(x)? - b.survival(x)?);
    }
    let (ya, yb) = (x / a.scale, x / b.scale);
    match (branch(a.alpha), branch(b.alpha)) {
        (Branch::Gauss, Branch::Gauss) => {
            // erfc difference is accurate enough; both tails are tiny where it matters
            Ok(0.5 * (libm::erfc(0.5 * ya) - libm::erfc(0.5 * yb)))
        }
        (Branch::Cauchy, Branch::Cauchy) => {
            // atan(1/ya) − atan(1/yb) = atan((yb − ya)/(ya yb + 1))
            Ok(((yb - ya) / (ya * yb + 1.0)).atan() / PI)
        }
        (Branch::Below, Branch::Below) | (Branch::Above, Branch::Above) => {
            let below = a.alpha < 1.0;
            // same index: the exponents differ by a constant in θ
            let shift = (a.alpha == b.alpha).then(|| a.alpha / (a.alpha - 1.0) * (b.scale / a.scale).ln());
            let f = |t: f64| {
                if t <= 0.0 || t >= FRAC_PI_2 {
                    return 0.0;
                }
                let ea = log_exponent(a.alpha, ya, t);
                let eb = match shift {
                    Some(c) => ea - c,
                    None => log_exponent(b.alpha, yb, t),
                };
                // exp(−A) − exp(−B) with A = e^{ea}, B = e^{eb}
                let big_a = ea.exp();
                let diff_ab = if (ea - eb).abs() < 0.5 {
                    eb.exp() * (ea - eb).exp_m1()
                } else {
                    big_a - eb.exp()
                };
                let d = -(-big_a).exp() * diff_ab.exp_m1();
                let d = if d.is_finite() { d } else { 0.0 };
                // survival integrand is 1 − exp(−A) below one, exp(−A) above
                if below {
                    -d
                } else {
                    d
                }
            };
            let mut points = vec![0.0];
            points.extend(crossing(a.alpha, ya));
            points.extend(crossing(b.alpha, yb));
            points.push(FRAC_PI_2);
            points.sort_by(f64::total_cmp);
            let mut total = 0.0;
            for w in points.windows(2) {
                total += adaptive(f, w[0], w[1], THETA_TOL)?.value;
            }
            Ok(total / PI)
        }
        _ => Ok(a.survival(x)? - b.survival(x)?),
    }
}
