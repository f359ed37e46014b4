//! The α-stable Lévy measure `G_d(α)|z|^{-d-α} dz`, its closed-form integrals,
//! and a 1-D discretization of the split fractional Laplacian.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::grid::GridFunction;
use crate::special::gamma;

/// Order of the fractional Laplacian.
///
/// `Open(α)` holds 0 < α < 2. The tags `Zero` and `Two` stand for the local limits
/// and are only meaningful for moduli and limit experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum FractionalOrder {
    Zero,
    Open(f64),
    Two,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == 0.0 {
            Ok(Self::Zero)
        } else if alpha == 2.0 {
            Ok(Self::Two)
        } else if alpha > 0.0 && alpha < 2.0 {
            Ok(Self::Open(alpha))
        } else {
            domain(format!("fractional order {alpha} outside [0, 2]"))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Open(a) => a,
            Self::Two => 2.0,
        }
    }

    pub fn is_boundary(self) -> bool {
        !matches!(self, Self::Open(_))
    }

    /// The order as an exponent for an actual operator application.
    pub fn operator_order(self) -> Result<f64> {
        match self {
            Self::Open(a) => Ok(a),
            tag => domain(format!(
                "boundary order {} cannot be applied as a nonlocal operator",
                tag.value()
            )),
        }
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(a: FractionalOrder) -> f64 {
        a.value()
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "0 (local limit)"),
            Self::Two => write!(f, "2 (local limit)"),
            Self::Open(a) => write!(f, "{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyMeasureSpec {
    pub d: usize,
    pub alpha: FractionalOrder,
}

impl LevyMeasureSpec {
    pub fn new(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return domain("dimension must be at least 1");
        }
        let alpha = FractionalOrder::new(alpha)?;
        alpha.operator_order()?;
        Ok(Self { d, alpha })
    }

    fn scale(&self) -> Result<(f64, f64)> {
        let a = self.alpha.operator_order()?;
        Ok((surface_measure(self.d)? * levy_coefficient(self.d, a)?, a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SplitRadius(f64);

impl SplitRadius {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r.is_finite() {
            Ok(Self(r))
        } else {
            domain(format!("split radius must be positive and finite, got {r}"))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Surface measure of the unit sphere in `R^d`; equals 2 for `d = 1`.
pub fn surface_measure(d: usize) -> Result<f64> {
    if d == 0 {
        return domain("surface measure requires d >= 1");
    }
    let h = d as f64 / 2.0;
    Ok(2.0 * PI.powf(h) / gamma(h))
}

/// Normalizing constant `G_d(α)` of the α-stable Lévy measure.
pub fn levy_coefficient(d: usize, alpha: f64) -> Result<f64> {
    if d == 0 {
        return domain("levy coefficient requires d >= 1");
    }
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("levy coefficient requires 0 < alpha < 2, got {alpha}"));
    }
    let df = d as f64;
    Ok(2f64.powf(alpha - 1.0) * alpha * gamma((df + alpha) / 2.0)
        / (PI.powf(df / 2.0) * gamma((2.0 - alpha) / 2.0)))
}

/// `μ_α({|z| > r})`.
pub fn tail_mass(spec: &LevyMeasureSpec, r: SplitRadius) -> Result<f64> {
    let (sg, a) = spec.scale()?;
    Ok(sg * r.get().powf(-a) / a)
}

/// `∫_{|z|<r} |z|² dμ_α(z)`.
pub fn small_ball_second_moment(spec: &LevyMeasureSpec, r: SplitRadius) -> Result<f64> {
    let (sg, a) = spec.scale()?;
    Ok(sg * r.get().powf(2.0 - a) / (2.0 - a))
}

/// Boundary handling for [`apply_split_operator_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// The field vanishes outside the window.
    Zero,
    /// The window is one period of a periodic field.
    Periodic,
}

/// Discrete weights for the split operator on a uniform 1-D grid.
///
/// `weights[j - 1]` is the measure `μ_α` of the cell at offset `±j` (one side),
/// restricted to `|z| > r`. The inner part is a second difference scaled by the
/// exact small-ball second moment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyWeights {
    pub alpha: f64,
    pub dx: f64,
    /// Radius actually used.
    pub r: f64,
    /// Radius requested before clamping to one cell.
    pub r_requested: f64,
    pub clamped: bool,
    pub coefficient: f64,
    /// `∫_{|z|<r} |z|² dμ_α / Δx²`; the second difference is scaled by half of it.
    pub inner_weight: f64,
    pub weights: Vec<f64>,
    /// `μ_α` beyond the last offset, both sides.
    pub residual: f64,
    pub tail_mass: f64,
}

impl LevyWeights {
    /// Weights for offsets `1..=max_offset`.
    pub fn new(dx: f64, alpha: f64, r: f64, max_offset: usize) -> Result<Self> {
        if !(dx > 0.0) {
            return domain(format!("cell width must be positive, got {dx}"));
        }
        let spec = LevyMeasureSpec::new(1, alpha)?;
        let r_requested = SplitRadius::new(r)?.get();
        let clamped = r_requested < dx;
        let r = r_requested.max(dx);
        let g = levy_coefficient(1, alpha)?;
        let radius = SplitRadius::new(r)?;
        let inner_weight = small_ball_second_moment(&spec, radius)? / (dx * dx);
        let tail = tail_mass(&spec, radius)?;
        let weights = (1..=max_offset).map(|j| cell_weight(g, alpha, r, dx, j as f64)).collect();
        let reach = (max_offset as f64 + 0.5) * dx;
        let residual = 2.0 * g / alpha * reach.max(r).powf(-alpha);
        Ok(Self {
            alpha,
            dx,
            r,
            r_requested,
            clamped,
            coefficient: g,
            inner_weight,
            weights,
            residual,
            tail_mass: tail,
        })
    }

    /// Both-sided sum of the tabulated weights.
    pub fn weight_sum(&self) -> f64 {
        2.0 * self.weights.iter().sum::<f64>()
    }

    /// Diagonal magnitude of the full operator: `inner_weight + tail_mass`.
    pub fn diagonal(&self) -> f64 {
        self.inner_weight + self.tail_mass
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if self.weights.len() + 1 < n {
            return Err(Error::GridMismatch(format!(
                "weights cover {} offsets, field has {} cells",
                self.weights.len(),
                n
            )));
        }
        Ok(())
    }

    /// Inner part (radius `< r`) applied to `g` with zero extension; accumulates into `out`.
    pub fn add_inner(&self, g: &[f64], scale: f64, out: &mut [f64]) {
        let n = g.len();
        let c = 0.5 * self.inner_weight * scale;
        for i in 0..n {
            let left = if i > 0 { g[i - 1] } else { 0.0 };
            let right = if i + 1 < n { g[i + 1] } else { 0.0 };
            out[i] += c * (left - 2.0 * g[i] + right);
        }
    }

    /// Outer part (radius `> r`) applied to `g` with zero extension; accumulates into `out`.
    pub fn add_outer(&self, g: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        let n = g.len();
        self.check_len(n)?;
        for i in 0..n {
            let mut acc = 0.0;
            let left = &g[..i];
            for (w, v) in self.weights.iter().zip(left.iter().rev()) {
                acc += w * v;
            }
            let right = &g[i + 1..];
            for (w, v) in self.weights.iter().zip(right.iter()) {
                acc += w * v;
            }
            out[i] += scale * (acc - self.tail_mass * g[i]);
        }
        Ok(())
    }

    /// Measure of `{|z| > r}` that falls outside the window when seen from each cell.
    pub fn escaping_mass(&self, n: usize) -> Vec<f64> {
        let mut prefix = vec![0.0; n];
        for j in 1..n {
            prefix[j] = prefix[j - 1] + self.weights.get(j - 1).copied().unwrap_or(0.0);
        }
        (0..n)
            .map(|i| (self.tail_mass - prefix[i] - prefix[n - 1 - i]).max(0.0))
            .collect()
    }
}

/// `G ∫ z^{-1-α} dz` over the part of the cell `[(j-½)Δx, (j+½)Δx]` lying beyond `r`.
fn cell_weight(g: f64, alpha: f64, r: f64, dx: f64, j: f64) -> f64 {
    let hi = (j + 0.5) * dx;
    if hi <= r {
        return 0.0;
    }
    let lo = ((j - 0.5) * dx).max(r);
    g / alpha * (lo.powf(-alpha) - hi.powf(-alpha))
}

/// The two pieces of the split operator on a grid, with the radius actually used.
#[derive(Debug, Clone)]
pub struct SplitOperatorOutput {
    pub inner: GridFunction,
    pub outer: GridFunction,
    pub r_used: f64,
    /// Set when the requested radius was below one cell width.
    pub clamped: bool,
}

/// Split operator with zero extension outside the window.
pub fn apply_split_operator(g: &GridFunction, alpha: f64, r: SplitRadius) -> Result<SplitOperatorOutput> {
    apply_split_operator_with(g, alpha, r, Boundary::Zero)
}

/// Number of periods wrapped explicitly in periodic mode; the rest is folded into the mean.
const PERIODIC_WRAPS: usize = 2000;

pub fn apply_split_operator_with(
    g: &GridFunction,
    alpha: f64,
    r: SplitRadius,
    boundary: Boundary,
) -> Result<SplitOperatorOutput> {
    let n = g.len();
    if n < 3 {
        return domain("split operator needs at least 3 cells");
    }
    let mut inner = GridFunction::zeros(g.x0, g.dx, n);
    let mut outer = GridFunction::zeros(g.x0, g.dx, n);
    let lw = match boundary {
        Boundary::Zero => {
            let lw = LevyWeights::new(g.dx, alpha, r.get(), n - 1)?;
            lw.add_inner(&g.values, 1.0, &mut inner.values);
            lw.add_outer(&g.values, 1.0, &mut outer.values)?;
            lw
        }
        Boundary::Periodic => {
            let lw = LevyWeights::new(g.dx, alpha, r.get(), 0)?;
            let c = 0.5 * lw.inner_weight;
            for i in 0..n {
                let left = g.values[(i + n - 1) % n];
                let right = g.values[(i + 1) % n];
                inner.values[i] = c * (left - 2.0 * g.values[i] + right);
            }
            let reach = PERIODIC_WRAPS * n;
            let mut wrapped = vec![0.0; n];
            for o in 1..=reach {
                let w = cell_weight(lw.coefficient, alpha, lw.r, g.dx, o as f64);
                wrapped[o % n] += w;
                wrapped[(n - o % n) % n] += w;
            }
            let far = 2.0 * lw.coefficient / alpha * ((reach as f64 + 0.5) * g.dx).max(lw.r).powf(-alpha);
            let mean = g.values.iter().sum::<f64>() / n as f64;
            for i in 0..n {
                let mut acc = 0.0;
                for (m, w) in wrapped.iter().enumerate() {
                    acc += w * g.values[(i + m) % n];
                }
                outer.values[i] = acc + far * mean - lw.tail_mass * g.values[i];
            }
            lw
        }
    };
    Ok(SplitOperatorOutput {
        inner,
        outer,
        r_used: lw.r,
        clamped: lw.clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Stirling series for ln Γ with upward recurrence; independent of the Lanczos code.
    fn ln_gamma_stirling(mut x: f64) -> f64 {
        let mut shift = 0.0;
        while x < 20.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
        shift + (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series
    }

    fn g_oracle(d: usize, a: f64) -> f64 {
        let df = d as f64;
        ((a - 1.0) * 2f64.ln() + a.ln() + ln_gamma_stirling((df + a) / 2.0)
            - df / 2.0 * PI.ln()
            - ln_gamma_stirling((2.0 - a) / 2.0))
        .exp()
    }

    #[test]
    fn surface_measure_values() {
        assert_eq!(surface_measure(1).unwrap(), 2.0);
        assert!((surface_measure(2).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!((surface_measure(3).unwrap() - 4.0 * PI).abs() < 1e-13);
        assert!(surface_measure(0).is_err());
    }

    #[test]
    fn coefficient_examples() {
        assert!((levy_coefficient(1, 1.0).unwrap() - 1.0 / PI).abs() < 1e-14);
        let expected = 1.0 / (2.0 * (2.0 * PI).sqrt());
        assert!((levy_coefficient(1, 0.5).unwrap() - expected).abs() < 1e-14);
        for &(d, a) in &[(1, 0.3), (2, 1.7), (3, 0.9), (3, 1.99)] {
            let rel = (levy_coefficient(d, a).unwrap() / g_oracle(d, a) - 1.0).abs();
            assert!(rel < 1e-12, "d={d} a={a} rel={rel}");
        }
        assert!(levy_coefficient(1, 2.0).is_err());
        assert!(levy_coefficient(1, 0.0).is_err());
    }

    #[test]
    fn coefficient_limits() {
        let a = 1e-6;
        let lim0 = surface_measure(1).unwrap() * levy_coefficient(1, a).unwrap() / a;
        assert!((lim0 - 1.0).abs() < 1e-5);
        // at the upper end the normalized coefficient tends to 2 in every dimension
        for d in 1..=3 {
            let a = 2.0 - 1e-7;
            let v = surface_measure(d).unwrap() * levy_coefficient(d, a).unwrap() / (d as f64 * (2.0 - a));
            assert!((v - 2.0).abs() < 1e-5, "d={d} v={v}");
        }
    }

    #[test]
    fn tail_and_moment_against_quadrature() {
        use crate::quadrature::{adaptive, Tolerance};
        for &(a, r) in &[(1.0, 1.0), (0.5, 4.0), (1.5, 2.0), (0.2, 0.3)] {
            let spec = LevyMeasureSpec::new(1, a).unwrap();
            let g = levy_coefficient(1, a).unwrap();
            let rr = SplitRadius::new(r).unwrap();
            // z = r / u maps the tail onto (0, 1]
            let tail = 2.0
                * adaptive(|u| g * (r / u).powf(-1.0 - a) * r / (u * u), 0.0, 1.0, Tolerance::default())
                    .unwrap()
                    .value;
            assert!((tail_mass(&spec, rr).unwrap() / tail - 1.0).abs() < 1e-8);
            let m2 = 2.0 * adaptive(|z| g * z.powf(1.0 - a), 0.0, r, Tolerance::default()).unwrap().value;
            assert!((small_ball_second_moment(&spec, rr).unwrap() / m2 - 1.0).abs() < 1e-8);
        }
        let spec = LevyMeasureSpec::new(1, 1.0).unwrap();
        let one = SplitRadius::new(1.0).unwrap();
        assert!((tail_mass(&spec, one).unwrap() - 2.0 / PI).abs() < 1e-14);
        assert!((small_ball_second_moment(&spec, one).unwrap() - 2.0 / PI).abs() < 1e-14);
        let spec = LevyMeasureSpec::new(1, 0.5).unwrap();
        let v = tail_mass(&spec, SplitRadius::new(4.0).unwrap()).unwrap();
        assert!((v - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn weights_reproduce_tail_mass() {
        for &a in &[0.3, 1.0, 1.7] {
            let lw = LevyWeights::new(0.1, a, 0.1, 15).unwrap();
            let total = lw.weight_sum() + lw.residual;
            assert!((total / lw.tail_mass - 1.0).abs() < 1e-12);
            assert!(lw.weights.iter().all(|&w| w >= 0.0));
        }
        let lw = LevyWeights::new(0.1, 1.0, 0.01, 4).unwrap();
        assert!(lw.clamped);
        assert_eq!(lw.r, 0.1);
    }

    #[test]
    fn operator_annihilates_constants_in_the_interior() {
        let a = 0.8;
        let n = 600;
        let g = GridFunction::new(0.0, 0.01, vec![1.0; n]).unwrap();
        let out = apply_split_operator(&g, a, SplitRadius::new(0.01).unwrap()).unwrap();
        let i = n / 2;
        let lw = LevyWeights::new(0.01, a, 0.01, n - 1).unwrap();
        // only the mass escaping the window remains at the centre cell
        let bound = lw.escaping_mass(n)[i];
        let total = out.inner.values[i] + out.outer.values[i];
        assert!(total.abs() <= bound * (1.0 + 1e-10), "{total} vs {bound}");
        assert!(out.inner.values[i].abs() < 1e-12);
    }

    #[test]
    fn operator_is_linear() {
        let g1 = GridFunction::from_fn(-1.0, 1.0, 50, |x| (-(x * x) * 8.0).exp());
        let g2 = GridFunction::from_fn(-1.0, 1.0, 50, |x| x.sin());
        let sum = GridFunction::new(
            g1.x0,
            g1.dx,
            g1.values.iter().zip(&g2.values).map(|(a, b)| 2.0 * a - b).collect(),
        )
        .unwrap();
        let r = SplitRadius::new(0.1).unwrap();
        let o1 = apply_split_operator(&g1, 1.3, r).unwrap();
        let o2 = apply_split_operator(&g2, 1.3, r).unwrap();
        let os = apply_split_operator(&sum, 1.3, r).unwrap();
        for i in 0..50 {
            let lin = 2.0 * (o1.inner.values[i] + o1.outer.values[i]) - (o2.inner.values[i] + o2.outer.values[i]);
            let direct = os.inner.values[i] + os.outer.values[i];
            assert!((lin - direct).abs() < 1e-10 * (1.0 + lin.abs()));
        }
    }

    #[test]
    fn periodic_symbol_is_close() {
        let n = 256;
        for &a in &[0.5, 1.0, 1.5] {
            let g = GridFunction::from_fn(0.0, 1.0, n, |x| (2.0 * PI * 3.0 * x).cos());
            let out = apply_split_operator_with(&g, a, SplitRadius::new(1.0 / n as f64).unwrap(), Boundary::Periodic)
                .unwrap();
            let sym = (2.0 * PI * 3.0f64).powf(a);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                let lg = out.inner.values[i] + out.outer.values[i];
                worst = worst.max((lg + sym * g.values[i]).abs());
            }
            assert!(worst / sym < 0.05, "alpha={a} err={}", worst / sym);
        }
    }

    #[test]
    fn near_two_matches_second_difference() {
        let n = 200;
        let g = GridFunction::from_fn(-3.0, 3.0, n, |x| (-x * x).exp());
        let mut errs = Vec::new();
        for &a in &[1.9, 1.99, 1.999] {
            let out = apply_split_operator(&g, a, SplitRadius::new(g.dx).unwrap()).unwrap();
            let mut err: f64 = 0.0;
            for i in 1..n - 1 {
                let lap = (g.values[i + 1] - 2.0 * g.values[i] + g.values[i - 1]) / (g.dx * g.dx);
                err = err.max((out.inner.values[i] + out.outer.values[i] - lap).abs());
            }
            errs.push(err);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    }

    #[test]
    fn fractional_order_tags() {
        assert_eq!(FractionalOrder::new(0.0).unwrap(), FractionalOrder::Zero);
        assert_eq!(FractionalOrder::new(2.0).unwrap(), FractionalOrder::Two);
        assert!(FractionalOrder::new(2.1).is_err());
        assert!(FractionalOrder::Two.operator_order().is_err());
        assert_eq!(FractionalOrder::new(1.2).unwrap().operator_order().unwrap(), 1.2);
        let json = serde_json::to_string(&FractionalOrder::Open(0.5)).unwrap();
        assert_eq!(json, "0.5");
        let back: FractionalOrder = serde_json::from_str("2.0").unwrap();
        assert_eq!(back, FractionalOrder::Two);
    }
}
