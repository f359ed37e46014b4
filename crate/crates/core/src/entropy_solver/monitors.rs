use serde::{Deserialize, Serialize};

use super::{ProblemSpec, SolveOptions, StepStats, Stepper, Trajectory};
use crate::error::{Error, Result};
use crate::grid::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    MaxPrinciple,
    L1Increase,
    BvIncrease,
    Conservation,
    Contraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub step: usize,
    pub time: f64,
    /// Excess over the allowed value, tolerance already subtracted.
    pub excess: f64,
}

/// Per-sample bounds plus every flagged violation over all steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AprioriReport {
    pub samples: Vec<StepStats>,
    pub tolerance: f64,
    pub truncation_budget: f64,
    pub initial: StepStats,
    pub violations: Vec<Violation>,
}

impl AprioriReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }
}

/// Rounding tolerance `10 · eps · N · ∥u0∥_∞`.
pub(crate) fn rounding_tolerance(n: usize, linf: f64) -> f64 {
    10.0 * f64::EPSILON * n as f64 * linf
}

/// Checks the max principle, L¹ and BV non-increase and mass balance at every step.
///
/// `u0` is the initial datum on the unpadded window; its range `I(u0)` (widened to
/// contain 0, the value of the zero extension) is the admissible interval.
pub fn apriori_report(traj: &Trajectory, u0: &GridFunction) -> AprioriReport {
    let n = traj.initial_state().len();
    let base = rounding_tolerance(n, u0.linf());
    let lo = u0.min().min(0.0);
    let hi = u0.max().max(0.0);
    let (l1_0, bv_0, mass_0) = (u0.l1(), u0.bv(), u0.mass());
    let mut violations = Vec::new();
    let mut flag = |kind, step, time, excess: f64| {
        if excess > 0.0 {
            violations.push(Violation { kind, step, time, excess });
        }
    };
    for (k, s) in traj.stats.iter().enumerate() {
        let tol = base + s.leak;
        flag(ViolationKind::MaxPrinciple, k, s.time, (lo - s.min).max(s.max - hi) - tol);
        flag(ViolationKind::L1Increase, k, s.time, s.l1 - l1_0 - tol);
        flag(ViolationKind::BvIncrease, k, s.time, s.bv - bv_0 - tol);
        flag(ViolationKind::Conservation, k, s.time, (s.mass - mass_0).abs() - tol);
    }
    let samples = (0..=super::SAMPLE_INTERVALS)
        .map(|j| traj.stats[j * traj.steps_per_sample])
        .collect();
    AprioriReport {
        samples,
        tolerance: base,
        truncation_budget: traj.truncation_budget(),
        initial: traj.stats[0],
        violations,
    }
}

/// Result of running two data side by side with a common time step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionGap {
    /// `max_t ∥u(t) − v(t)∥_{L¹} − ∥u0 − v0∥_{L¹}` over every step.
    pub gap: f64,
    pub tolerance: f64,
    pub initial_distance: f64,
    pub max_distance: f64,
}

impl ContractionGap {
    pub fn passed(&self) -> bool {
        self.gap <= self.tolerance
    }
}

/// Runs both problems in lockstep and reports the worst growth of their L¹ distance.
pub fn contraction_gap(a: &ProblemSpec, b: &ProblemSpec) -> Result<ContractionGap> {
    a.u0.check_geometry(&b.u0)?;
    if !a.same_equation(b) {
        return Err(Error::GridMismatch(
            "contraction check needs identical order, nonlinearities, horizon and radius".into(),
        ));
    }
    let base = SolveOptions {
        store_all: false,
        ..SolveOptions::default()
    };
    let probe_a = Stepper::new(a, &base)?;
    let probe_b = Stepper::new(b, &base)?;
    let dt = probe_a.dt.min(probe_b.dt);
    let opts = SolveOptions { dt: Some(dt), ..base };
    let mut sa = Stepper::new(a, &opts)?;
    let mut sb = Stepper::new(b, &opts)?;
    let initial = sa.state.l1_distance(&sb.state)?;
    let mut max_distance = initial;
    while !sa.finished() {
        sa.advance()?;
        sb.advance()?;
        max_distance = max_distance.max(sa.state.l1_distance(&sb.state)?);
    }
    let n = sa.state.len();
    let tolerance = rounding_tolerance(n, a.u0.linf().max(b.u0.linf()));
    Ok(ContractionGap {
        gap: max_distance - initial,
        tolerance,
        initial_distance: initial,
        max_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy_solver::solve_with;
    use crate::levy::FractionalOrder;
    use crate::nonlinearity::Nonlinearity;

    fn problem(u0: GridFunction) -> ProblemSpec {
        ProblemSpec {
            alpha: FractionalOrder::new(0.8).unwrap(),
            flux: Nonlinearity::Burgers { scale: 1.0 },
            diffusion: Nonlinearity::DeadZone { slope: 1.0, threshold: 0.2 },
            u0,
            horizon: 0.5,
            r: None,
        }
    }

    fn box_data(n: usize) -> GridFunction {
        GridFunction::from_fn(-2.0, 2.0, n, |x| if x.abs() <= 1.0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn monotone_run_has_no_violations() {
        let u0 = box_data(200);
        let traj = solve_with(&problem(u0.clone()), &SolveOptions::default()).unwrap();
        let rep = apriori_report(&traj, &u0);
        assert!(rep.passed(), "{:?}", rep.violations.first());
        for s in &rep.samples {
            assert!(s.bv <= 2.0 + rep.tolerance + s.leak);
        }
    }

    #[test]
    fn doubled_time_step_is_flagged() {
        let u0 = box_data(200);
        let spec = ProblemSpec {
            flux: Nonlinearity::Linear { slope: 1.0 },
            diffusion: Nonlinearity::Linear { slope: 1.0 },
            ..problem(u0.clone())
        };
        let probe = solve_with(&spec, &SolveOptions::default()).unwrap();
        let opts = SolveOptions {
            dt: Some(2.0 * probe.dt),
            enforce_cfl: false,
            store_all: false,
            ..Default::default()
        };
        match solve_with(&spec, &opts) {
            Ok(traj) => {
                let rep = apriori_report(&traj, &u0);
                assert!(!rep.passed());
            }
            Err(e) => assert!(matches!(e, Error::Instability(_))),
        }
    }

    #[test]
    fn contraction_examples() {
        let u0 = box_data(160);
        let same = contraction_gap(&problem(u0.clone()), &problem(u0.clone())).unwrap();
        assert_eq!(same.max_distance, 0.0);
        let mut shifted = u0.values.clone();
        shifted.rotate_right(1);
        let v0 = GridFunction::new(u0.x0, u0.dx, shifted).unwrap();
        let g = contraction_gap(&problem(u0.clone()), &problem(v0)).unwrap();
        assert!(g.passed(), "{g:?}");
        let bumped = GridFunction::new(
            u0.x0,
            u0.dx,
            u0.values
                .iter()
                .enumerate()
                .map(|(i, v)| v + if (u0.center(i)).abs() <= 1.0 { 0.3 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let g = contraction_gap(&problem(u0.clone()), &problem(bumped)).unwrap();
        assert!(g.passed(), "{g:?}");
    }

    #[test]
    fn mismatched_grids_error() {
        let a = problem(box_data(100));
        let b = problem(box_data(120));
        assert!(matches!(contraction_gap(&a, &b), Err(Error::GridMismatch(_))));
    }
}
