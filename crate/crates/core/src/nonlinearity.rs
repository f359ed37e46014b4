//! Scalar nonlinearities used as flux `f` or diffusion `φ`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A scalar function `g` with `g(0) = 0`, its derivative and primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    /// `slope · u`
    Linear { slope: f64 },
    /// `scale · u² / 2`
    Burgers { scale: f64 },
    /// `a1 u + a2 u² + a3 u³`
    Cubic { a1: f64, a2: f64, a3: f64 },
    /// `coef · sgn(u) |u|^exponent`, exponent ≥ 1
    Porous { coef: f64, exponent: f64 },
    /// `slope · sgn(u) (|u| − threshold)⁺`: flat on `[−threshold, threshold]`
    DeadZone { slope: f64, threshold: f64 },
}

impl Nonlinearity {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                domain(format!("{name} must be finite"))
            }
        };
        match *self {
            Self::Zero => Ok(()),
            Self::Linear { slope } => finite(slope, "slope"),
            Self::Burgers { scale } => finite(scale, "scale"),
            Self::Cubic { a1, a2, a3 } => {
                finite(a1, "a1")?;
                finite(a2, "a2")?;
                finite(a3, "a3")
            }
            Self::Porous { coef, exponent } => {
                finite(coef, "coef")?;
                if !(exponent >= 1.0 && exponent.is_finite()) {
                    return domain(format!("porous exponent must be >= 1, got {exponent}"));
                }
                Ok(())
            }
            Self::DeadZone { slope, threshold } => {
                finite(slope, "slope")?;
                if !(threshold >= 0.0 && threshold.is_finite()) {
                    return domain(format!("dead-zone threshold must be >= 0, got {threshold}"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Linear { slope } => slope * u,
            Self::Burgers { scale } => 0.5 * scale * u * u,
            Self::Cubic { a1, a2, a3 } => u * (a1 + u * (a2 + u * a3)),
            Self::Porous { coef, exponent } => coef * u.signum() * u.abs().powf(exponent),
            Self::DeadZone { slope, threshold } => slope * u.signum() * (u.abs() - threshold).max(0.0),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Linear { slope } => slope,
            Self::Burgers { scale } => scale * u,
            Self::Cubic { a1, a2, a3 } => a1 + u * (2.0 * a2 + 3.0 * a3 * u),
            Self::Porous { coef, exponent } => {
                if exponent == 1.0 {
                    coef
                } else {
                    coef * exponent * u.abs().powf(exponent - 1.0)
                }
            }
            Self::DeadZone { slope, threshold } => {
                if u.abs() > threshold {
                    slope
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫_0^u g(τ) dτ`.
    pub fn primitive(&self, u: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Linear { slope } => 0.5 * slope * u * u,
            Self::Burgers { scale } => scale * u * u * u / 6.0,
            Self::Cubic { a1, a2, a3 } => u * u * (a1 / 2.0 + u * (a2 / 3.0 + u * a3 / 4.0)),
            Self::Porous { coef, exponent } => coef * u.abs().powf(exponent + 1.0) / (exponent + 1.0),
            Self::DeadZone { slope, threshold } => {
                let e = (u.abs() - threshold).max(0.0);
                0.5 * slope * e * e
            }
        }
    }

    /// Points in the open interval `(a, b)` where `g'` may change sign.
    pub fn critical_points(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts = match *self {
            Self::Burgers { .. } => vec![0.0],
            Self::Cubic { a1, a2, a3 } => {
                if a3 == 0.0 {
                    if a2 == 0.0 {
                        vec![]
                    } else {
                        vec![-a1 / (2.0 * a2)]
                    }
                } else {
                    let (qa, qb, qc) = (3.0 * a3, 2.0 * a2, a1);
                    let disc = qb * qb - 4.0 * qa * qc;
                    if disc < 0.0 {
                        vec![]
                    } else {
                        let s = disc.sqrt();
                        // stable quadratic roots
                        let q = -0.5 * (qb + qb.signum() * s);
                        if q == 0.0 {
                            vec![0.0]
                        } else {
                            vec![q / qa, qc / q]
                        }
                    }
                }
            }
            _ => vec![],
        };
        pts.retain(|&p| p > a && p < b);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// `sup |g'|` over `[a, b]`.
    pub fn lipschitz_on(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        match *self {
            Self::Zero => 0.0,
            Self::Linear { slope } => slope.abs(),
            Self::Burgers { scale } => scale.abs() * a.abs().max(b.abs()),
            Self::Cubic { a2, a3, .. } => {
                let mut m = self.derivative(a).abs().max(self.derivative(b).abs());
                if a3 != 0.0 {
                    let v = -a2 / (3.0 * a3);
                    if v > a && v < b {
                        m = m.max(self.derivative(v).abs());
                    }
                }
                m
            }
            Self::Porous { .. } => self.derivative(a).abs().max(self.derivative(b).abs()),
            Self::DeadZone { slope, threshold } => {
                if a.abs().max(b.abs()) > threshold {
                    slope.abs()
                } else {
                    0.0
                }
            }
        }
    }

    /// Nondecreasing on `[a, b]`, checked on the derivative at `samples` points
    /// plus every critical point.
    pub fn is_nondecreasing_on(&self, a: f64, b: f64, samples: usize) -> bool {
        let n = samples.max(2);
        (0..n).all(|k| self.derivative(a + (b - a) * k as f64 / (n - 1) as f64) >= 0.0)
            && self.critical_points(a, b).iter().all(|&p| {
                self.derivative(p) >= -1e-14 && self.value(p.next_up()) >= self.value(p.next_down())
            })
    }

    /// `(g⁺(u), g⁻(u))` with `g⁺ = ∫_0^u max(g', 0)`, `g⁻ = ∫_0^u min(g', 0)`.
    pub fn split_increasing(&self, u: f64) -> (f64, f64) {
        let (lo, hi) = if u >= 0.0 { (0.0, u) } else { (u, 0.0) };
        let mut pts = vec![lo];
        pts.extend(self.critical_points(lo, hi));
        pts.push(hi);
        let mut plus = 0.0;
        for w in pts.windows(2) {
            let inc = self.value(w[1]) - self.value(w[0]);
            if inc > 0.0 {
                plus += inc;
            }
        }
        if u < 0.0 {
            plus = -plus;
        }
        (plus, self.value(u) - plus)
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Self::Zero => true,
            Self::Linear { slope } => slope == 0.0,
            Self::Burgers { scale } => scale == 0.0,
            Self::Cubic { a1, a2, a3 } => a1 == 0.0 && a2 == 0.0 && a3 == 0.0,
            Self::Porous { coef, .. } => coef == 0.0,
            Self::DeadZone { slope, .. } => slope == 0.0,
        }
    }

    /// Same function with every coefficient multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Nonlinearity {
        match *self {
            Self::Zero => Self::Zero,
            Self::Linear { slope } => Self::Linear { slope: slope * s },
            Self::Burgers { scale } => Self::Burgers { scale: scale * s },
            Self::Cubic { a1, a2, a3 } => Self::Cubic {
                a1: a1 * s,
                a2: a2 * s,
                a3: a3 * s,
            },
            Self::Porous { coef, exponent } => Self::Porous { coef: coef * s, exponent },
            Self::DeadZone { slope, threshold } => Self::DeadZone { slope: slope * s, threshold },
        }
    }
}

/// Engquist–Osher numerical flux `g⁺(ul) + g⁻(ur)`.
pub fn engquist_osher(f: &Nonlinearity, ul: f64, ur: f64) -> f64 {
    f.split_increasing(ul).0 + f.split_increasing(ur).1
}
