use super::Trajectory;
use crate::error::{domain, Error, Result};
use crate::levy::{levy_coefficient, LevyWeights};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature::{adaptive, GaussLegendre, Tolerance};

/// A convex `C¹` entropy.
pub trait ConvexEntropy: Sync {
    fn eta(&self, u: f64) -> f64;
    fn eta_prime(&self, u: f64) -> f64;
}

/// `√((u−k)² + ε²) − ε`, a smooth approximation of `|u − k|`.
#[derive(Debug, Clone, Copy)]
pub struct SmoothKruzhkov {
    pub k: f64,
    pub eps: f64,
}

impl ConvexEntropy for SmoothKruzhkov {
    fn eta(&self, u: f64) -> f64 {
        let d = u - self.k;
        (d * d + self.eps * self.eps).sqrt() - self.eps
    }

    fn eta_prime(&self, u: f64) -> f64 {
        let d = u - self.k;
        d / (d * d + self.eps * self.eps).sqrt()
    }
}

/// Nonnegative test function `ψ(x, t) = X(x) χ(t)`.
pub trait SeparableTest: Sync {
    fn space(&self, x: f64) -> f64;
    fn space_dx(&self, x: f64) -> f64;
    fn space_dxx(&self, x: f64) -> f64;
    fn time(&self, t: f64) -> f64;
    /// Closed interval outside which `X` vanishes.
    fn support(&self) -> (f64, f64);
}

/// `X(x) = b((x − c)/w)`, `χ(t) = b(t / t_end)` with `b(s) = exp(1 − 1/(1 − s²))` on `|s| < 1`.
#[derive(Debug, Clone, Copy)]
pub struct BumpTest {
    pub center: f64,
    pub half_width: f64,
    pub t_end: f64,
}

fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

impl SeparableTest for BumpTest {
    fn space(&self, x: f64) -> f64 {
        bump((x - self.center) / self.half_width)
    }

    fn space_dx(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        bump(s) * (-2.0 * s / (q * q)) / self.half_width
    }

    fn space_dxx(&self, x: f64) -> f64 {
        let s = (x - self.center) / self.half_width;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let q = 1.0 - s * s;
        let g1 = -2.0 * s / (q * q);
        let g2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
        bump(s) * (g1 * g1 + g2) / (self.half_width * self.half_width)
    }

    fn time(&self, t: f64) -> f64 {
        if t < 0.0 {
            0.0
        } else {
            bump(t / self.t_end)
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }
}

/// `L^α_r[X](x) = G ∫_0^r (X(x+z) + X(x−z) − 2X(x)) z^{−1−α} dz`.
fn inner_levy_on_test(test: &dyn SeparableTest, x: f64, alpha: f64, r: f64, g: f64) -> Result<f64> {
    let (a, b) = test.support();
    if x + r <= a || x - r >= b {
        return Ok(0.0);
    }
    // Taylor piece near the singularity
    let zs = (1e-3 * (b - a)).min(r);
    let small = test.space_dxx(x) * zs.powf(2.0 - alpha) / (2.0 - alpha);
    let x0 = test.space(x);
    let mut breaks = vec![zs];
    for p in [a - x, x - a, b - x, x - b] {
        if p > zs && p < r {
            breaks.push(p);
        }
    }
    breaks.push(r);
    breaks.sort_by(f64::total_cmp);
    let mut total = small;
    for w in breaks.windows(2) {
        let est = adaptive(
            |z| (test.space(x + z) + test.space(x - z) - 2.0 * x0) * z.powf(-1.0 - alpha),
            w[0],
            w[1],
            Tolerance {
                abs: 1e-14,
                rel: 1e-10,
                max_intervals: 4000,
            },
        )?;
        total += est.value;
    }
    Ok(g * total)
}

/// Primitive `q(u) = ∫_0^u η'(τ) g'(τ) dτ`, tabulated for fast repeated evaluation.
struct EntropyFluxTable<'a> {
    eta: &'a dyn ConvexEntropy,
    g: &'a Nonlinearity,
    lo: f64,
    h: f64,
    cumulative: Vec<f64>,
}

impl<'a> EntropyFluxTable<'a> {
    fn new(eta: &'a dyn ConvexEntropy, g: &'a Nonlinearity, lo: f64, hi: f64) -> Self {
        let lo = lo.min(0.0);
        let hi = hi.max(0.0);
        let n = 2048usize;
        let h = ((hi - lo) / n as f64).max(f64::MIN_POSITIVE);
        let rule = GaussLegendre::get(8);
        let mut cumulative = vec![0.0; n + 1];
        for i in 0..n {
            let a = lo + i as f64 * h;
            cumulative[i + 1] = cumulative[i] + rule.integrate(a, a + h, |t| eta.eta_prime(t) * g.derivative(t));
        }
        let mut table = Self { eta, g, lo, h, cumulative };
        // shift so that q(0) = 0
        let zero = table.raw(0.0);
        table.cumulative.iter_mut().for_each(|c| *c -= zero);
        table
    }

    fn raw(&self, u: f64) -> f64 {
        let n = self.cumulative.len() - 1;
        let idx = (((u - self.lo) / self.h).floor().max(0.0) as usize).min(n);
        let a = self.lo + idx as f64 * self.h;
        let rule = GaussLegendre::get(8);
        self.cumulative[idx] + rule.integrate(a, u, |t| self.eta.eta_prime(t) * self.g.derivative(t))
    }
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Discrete left side of the entropy inequality for `traj` and the test function.
///
/// With `eta = None` the Kruzhkov entropy `|u − k|` is used with the closed-form fluxes
/// and the sign convention `sgn(0) = 0`; otherwise `k` is ignored and the entropy
/// fluxes are `∫_0^u η' g'`. The inner Lévy part acts on the test function by
/// quadrature, the outer part (radius `r`) on `φ(u)` through the grid weights.
pub fn entropy_residual(
    traj: &Trajectory,
    k: f64,
    test: &dyn SeparableTest,
    r: f64,
    eta: Option<&dyn ConvexEntropy>,
) -> Result<f64> {
    if !traj.stores_all() {
        return domain("entropy residual needs every time level of the trajectory");
    }
    let spec = &traj.spec;
    let alpha = spec.alpha.operator_order()?;
    let grid = traj.initial_state();
    let (n, dx) = (grid.len(), grid.dx);
    let xs: Vec<f64> = (0..n).map(|i| grid.center(i)).collect();
    let space: Vec<f64> = xs.iter().map(|&x| test.space(x)).collect();
    if let Some(i) = space.iter().position(|&v| v < 0.0) {
        return domain(format!("test function is negative at x = {}", xs[i]));
    }
    for (j, &t) in traj.times.iter().enumerate() {
        if test.time(t) < 0.0 {
            return domain(format!("test function is negative at time level {j}"));
        }
    }
    let space_dx: Vec<f64> = xs.iter().map(|&x| test.space_dx(x)).collect();
    let weights = LevyWeights::new(dx, alpha, r, n - 1)?;
    let g = levy_coefficient(1, alpha)?;
    let inner = xs
        .iter()
        .map(|&x| inner_levy_on_test(test, x, alpha, weights.r, g))
        .collect::<Result<Vec<f64>>>()?;
    let flux = &spec.flux;
    let phi = &spec.diffusion;
    let (lo, hi) = traj
        .states
        .iter()
        .fold((0.0f64, 0.0f64), |(l, h), s| (l.min(s.min()), h.max(s.max())));
    let tables = eta.map(|e| (EntropyFluxTable::new(e, flux, lo, hi), EntropyFluxTable::new(e, phi, lo, hi)));
    let (fk, phik) = (flux.value(k), phi.value(k));
    let entropy = |u: f64| match eta {
        None => (u - k).abs(),
        Some(e) => e.eta(u),
    };
    let entropy_prime = |u: f64| match eta {
        None => sgn(u - k),
        Some(e) => e.eta_prime(u),
    };
    let fluxes = |u: f64| match &tables {
        None => (sgn(u - k) * (flux.value(u) - fk), (phi.value(u) - phik).abs()),
        Some((tf, tp)) => (tf.raw(u), tp.raw(u)),
    };

    let chi = |t: f64| test.time(t);
    let u0 = &traj.states[0].values;
    let mut total: f64 = (0..n).map(|i| entropy(u0[i]) * space[i] * chi(0.0)).sum();
    let mut phis = vec![0.0; n];
    let mut outer = vec![0.0; n];
    for step in 0..traj.states.len() - 1 {
        let (t0, t1) = (traj.times[step], traj.times[step + 1]);
        let dt = t1 - t0;
        let (c0, c1) = (chi(t0), chi(t1));
        if c0 == 0.0 && c1 == 0.0 {
            continue;
        }
        let un = &traj.states[step].values;
        let un1 = &traj.states[step + 1].values;
        for (p, &u) in phis.iter_mut().zip(un) {
            *p = phi.value(u);
        }
        outer.iter_mut().for_each(|v| *v = 0.0);
        if !phi.is_zero() {
            weights.add_outer(&phis, 1.0, &mut outer)?;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let (qf, qphi) = fluxes(un[i]);
            acc += entropy(un[i]) * space[i] * (c1 - c0)
                + dt * c1 * (qf * space_dx[i] + qphi * inner[i])
                + dt * entropy_prime(un1[i]) * outer[i] * space[i] * c1;
        }
        total += acc;
    }
    let value = total * dx;
    if !value.is_finite() {
        return Err(Error::Quadrature("entropy residual is not finite".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy_solver::{solve, ProblemSpec, SolveOptions, Trajectory};
    use crate::grid::GridFunction;
    use crate::levy::FractionalOrder;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        let b = BumpTest {
            center: 0.3,
            half_width: 0.7,
            t_end: 1.0,
        };
        for &x in &[-0.2, 0.1, 0.3, 0.55, 0.9] {
            let h = 1e-5;
            let d1 = (b.space(x + h) - b.space(x - h)) / (2.0 * h);
            let d2 = (b.space(x + h) - 2.0 * b.space(x) + b.space(x - h)) / (h * h);
            assert!((d1 - b.space_dx(x)).abs() < 1e-7);
            assert!((d2 - b.space_dxx(x)).abs() < 1e-4);
        }
    }

    #[test]
    fn inner_levy_of_bump_matches_brute_force() {
        let b = BumpTest {
            center: 0.0,
            half_width: 1.0,
            t_end: 1.0,
        };
        let (alpha, r) = (1.3, 0.4);
        let g = levy_coefficient(1, alpha).unwrap();
        let v = inner_levy_on_test(&b, 0.2, alpha, r, g).unwrap();
        // reference value from a 40-digit quadrature with the same Taylor start
        let reference = -0.571_687_821_106_218_3;
        assert!((v / reference - 1.0).abs() < 1e-7, "{v} vs {reference}");
    }

    #[test]
    fn constant_state_gives_zero() {
        let n = 60;
        let u0 = GridFunction::new(-1.5, 3.0 / n as f64, vec![0.4; n]).unwrap();
        let spec = ProblemSpec {
            alpha: FractionalOrder::new(1.0).unwrap(),
            flux: Nonlinearity::Burgers { scale: 1.0 },
            diffusion: Nonlinearity::Linear { slope: 1.0 },
            u0: u0.clone(),
            horizon: 0.2,
            r: None,
        };
        // a hand-built constant field
        let mut traj = solve(&spec).unwrap();
        for s in traj.states.iter_mut() {
            s.values.iter_mut().for_each(|v| *v = 0.4);
        }
        let test = BumpTest {
            center: 0.0,
            half_width: 0.8,
            t_end: 0.2,
        };
        let v = entropy_residual(&traj, 0.4, &test, traj.initial_state().dx, None).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn negative_test_function_is_rejected() {
        struct Neg;
        impl SeparableTest for Neg {
            fn space(&self, x: f64) -> f64 {
                -x.abs()
            }
            fn space_dx(&self, _: f64) -> f64 {
                0.0
            }
            fn space_dxx(&self, _: f64) -> f64 {
                0.0
            }
            fn time(&self, _: f64) -> f64 {
                1.0
            }
            fn support(&self) -> (f64, f64) {
                (-1.0, 1.0)
            }
        }
        let u0 = GridFunction::from_fn(-1.0, 1.0, 40, |x| x.max(0.0));
        let spec = ProblemSpec {
            alpha: FractionalOrder::new(1.0).unwrap(),
            flux: Nonlinearity::Zero,
            diffusion: Nonlinearity::Zero,
            u0,
            horizon: 0.1,
            r: None,
        };
        let traj = solve(&spec).unwrap();
        assert!(entropy_residual(&traj, 0.0, &Neg, 0.05, None).is_err());
    }

    /// Non-entropic Burgers shock `0 | 1` moving at speed 1/2, built by hand.
    fn expansion_shock(n: usize) -> Trajectory {
        let u0 = GridFunction::from_fn(-1.0, 1.0, n, |x| if x < 0.0 { 0.0 } else { 1.0 });
        let spec = ProblemSpec {
            alpha: FractionalOrder::new(1.0).unwrap(),
            flux: Nonlinearity::Burgers { scale: 1.0 },
            diffusion: Nonlinearity::Zero,
            u0,
            horizon: 0.4,
            r: None,
        };
        let mut traj = crate::entropy_solver::solve_with(&spec, &SolveOptions::default()).unwrap();
        for (t, s) in traj.times.clone().iter().zip(traj.states.iter_mut()) {
            let x0 = s.x0;
            let dx = s.dx;
            *s = GridFunction::from_fn(x0, x0 + dx * s.len() as f64, s.len(), |x| {
                if x < 0.5 * t || x > 1.0 {
                    0.0
                } else {
                    1.0
                }
            });
        }
        traj
    }

    #[test]
    fn expansion_shock_is_detected() {
        let traj = expansion_shock(200);
        let test = BumpTest {
            center: 0.1,
            half_width: 0.3,
            t_end: 0.4,
        };
        let v = entropy_residual(&traj, 0.5, &test, traj.initial_state().dx, None).unwrap();
        assert!(v < -1e-3, "{v}");
    }

    #[test]
    fn smooth_entropy_close_to_kruzhkov() {
        let u0 = GridFunction::from_fn(-1.0, 1.0, 100, |x| if x.abs() < 0.4 { 1.0 } else { 0.0 });
        let spec = ProblemSpec {
            alpha: FractionalOrder::new(0.7).unwrap(),
            flux: Nonlinearity::Burgers { scale: 1.0 },
            diffusion: Nonlinearity::Linear { slope: 0.5 },
            u0,
            horizon: 0.2,
            r: None,
        };
        let traj = solve(&spec).unwrap();
        let test = BumpTest {
            center: 0.2,
            half_width: 0.5,
            t_end: 0.2,
        };
        let dx = traj.initial_state().dx;
        let kr = entropy_residual(&traj, 0.3, &test, dx, None).unwrap();
        let sm = entropy_residual(&traj, 0.3, &test, dx, Some(&SmoothKruzhkov { k: 0.3, eps: 1e-6 })).unwrap();
        assert!((kr - sm).abs() < 1e-3 * (1.0 + kr.abs()), "{kr} vs {sm}");
    }
}
