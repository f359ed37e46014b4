use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::Trajectory;
use crate::error::{domain, Result};
use crate::grid::GridFunction;
use crate::levy::{FractionalOrder, LevyWeights};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::GaussLegendre;

/// Both sides of the energy inequality `∫Φ(u(T)) + ∫_0^T |φ(u)|²_{H^{α/2}} ≤ ∫Φ(u0)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyBalance {
    pub left: f64,
    pub right: f64,
    pub final_energy: f64,
    pub dissipation: f64,
}

impl EnergyBalance {
    pub fn holds(&self, slack: f64) -> bool {
        self.left <= self.right + slack
    }
}

/// Energy balance of a trajectory; the dissipation uses the right end point of each step.
pub fn energy_check(traj: &Trajectory, diffusion: &Nonlinearity, alpha: FractionalOrder) -> Result<EnergyBalance> {
    if *diffusion != traj.spec.diffusion || alpha != traj.spec.alpha {
        return domain("energy check must use the diffusion and order of the trajectory");
    }
    let primitive = |g: &GridFunction| g.values.iter().map(|&u| diffusion.primitive(u)).sum::<f64>() * g.dx;
    let right = primitive(traj.initial_state());
    let final_energy = primitive(traj.final_state());
    let dissipation: f64 = traj.stats.iter().skip(1).map(|s| s.seminorm).sum::<f64>() * traj.dt;
    Ok(EnergyBalance {
        left: final_energy + dissipation,
        right,
        final_energy,
        dissipation,
    })
}

/// `|g|²_{H^{α/2}}` as the discrete double integral `(G/2) ΣΣ (g_i − g_k)² w_{|i−k|} Δx`
/// plus the small-radius second-difference part, with `g = 0` outside the window.
///
/// The pair weights match the second moment of each cell, `w_j (jΔx)² = G ∫_cell z^{1−α} dz`,
/// so a locally linear `g` is integrated exactly.
pub fn h_alpha_seminorm_double(g: &GridFunction, alpha: f64) -> Result<f64> {
    let n = g.len();
    let w = LevyWeights::new(g.dx, alpha, g.dx, n.saturating_sub(1).max(1))?;
    let dx = g.dx;
    let moment: Vec<f64> = (1..n)
        .map(|j| {
            let lo = ((j as f64 - 0.5) * dx).max(dx);
            let hi = (j as f64 + 0.5) * dx;
            let z = j as f64 * dx;
            w.coefficient * (hi.powf(2.0 - alpha) - lo.powf(2.0 - alpha)) / ((2.0 - alpha) * z * z)
        })
        .collect();
    let v = &g.values;
    let mut inner = 0.0;
    for i in 0..=n {
        let a = if i > 0 { v[i - 1] } else { 0.0 };
        let b = if i < n { v[i] } else { 0.0 };
        inner += (b - a) * (b - a);
    }
    inner *= 0.5 * w.inner_weight;
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 1..n - i {
            let d = v[i] - v[i + j];
            pairs += moment[j - 1] * d * d;
        }
    }
    let esc = w.escaping_mass(n);
    let outside: f64 = v.iter().zip(&esc).map(|(x, e)| x * x * e).sum();
    Ok((inner + pairs + outside) * dx)
}

/// `∫ |2πξ|^α |ĝ(ξ)|² dξ` over the Nyquist band, `ĝ` the discrete-time Fourier
/// transform of the cell values placed at cell centres.
pub fn h_alpha_seminorm_fourier(g: &GridFunction, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return domain(format!("order must lie in (0, 2), got {alpha}"));
    }
    let n = g.len();
    let band = 0.5 / g.dx;
    let length = n as f64 * g.dx;
    let xs: Vec<f64> = (0..n).map(|i| g.center(i)).collect();
    let power = |xi: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (x, v) in xs.iter().zip(&g.values) {
            let (s, c) = (2.0 * PI * xi * x).sin_cos();
            re += v * c;
            im -= v * s;
        }
        (re * re + im * im) * g.dx * g.dx * (2.0 * PI * xi).powf(alpha)
    };
    let rule = GaussLegendre::get(12);
    // panels resolve oscillations on the window length; geometric refinement near 0
    let width = 0.25 / length;
    let mut total = 0.0;
    let mut lo = width * 1e-6;
    let mut hi = lo * 2.0;
    while hi < width {
        total += rule.integrate(lo, hi, power);
        lo = hi;
        hi *= 2.0;
    }
    total += rule.integrate(lo, width, power);
    let panels = ((band - width) / width).ceil() as usize;
    let step = (band - width) / panels as f64;
    for p in 0..panels {
        let a = width + p as f64 * step;
        total += rule.integrate(a, a + step, power);
    }
    Ok(2.0 * total)
}
