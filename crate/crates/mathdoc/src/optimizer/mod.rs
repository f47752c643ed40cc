//! Derivative-free geometry optimization from single-point energies.
//!
//! Compass pattern search over the flat coordinate vector: probe +step and
//! -step along each axis in index order, accept the first strict improvement
//! and restart the sweep from axis 0, shrink the step when a full sweep
//! finds nothing. First-improvement acceptance keeps evaluation counts low;
//! the fixed probe order makes every run bit-for-bit reproducible.
//!
//! The energy callback signals an invalid geometry by returning a non-finite
//! number; such probes are rejected like any uphill move and the search goes
//! on. Only the starting point must be finite.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    /// Initial probe distance in angstrom.
    pub initial_step: f64,
    /// Step multiplier after a failed sweep; in (0, 1).
    pub step_shrink: f64,
    /// Search stops once the step falls below this, in angstrom.
    pub min_step: f64,
    /// Hard budget of energy evaluations, counting the initial point.
    pub max_evaluations: u64,
    /// Accepted improvements smaller than this (kcal/mol) stop the search.
    pub convergence: f64,
}

impl Default for OptConfig {
    fn default() -> OptConfig {
        OptConfig {
            initial_step: 0.1,
            step_shrink: 0.5,
            min_step: 1e-5,
            max_evaluations: 100_000,
            convergence: 1e-10,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<(), OptError> {
        let bad = |msg: &str| Err(OptError::BadConfig(msg.to_string()));
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad("initialStep must be positive and finite");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("stepShrink must lie strictly between 0 and 1");
        }
        if !(self.min_step > 0.0 && self.min_step.is_finite()) {
            return bad("minStep must be positive and finite");
        }
        if self.min_step >= self.initial_step {
            return bad("minStep must be smaller than initialStep");
        }
        if self.max_evaluations == 0 {
            return bad("maxEvaluations must be at least 1");
        }
        if !(self.convergence > 0.0 && self.convergence.is_finite()) {
            return bad("convergence must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OptError {
    #[error("invalid optimizer configuration: {0}")]
    BadConfig(String),
    #[error("energy is not finite at the starting geometry: {0:?}")]
    NonFiniteStart(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Step shrank below `min_step`.
    StepLimit,
    /// Evaluation budget exhausted.
    Budget,
    /// An accepted move improved the energy by less than `convergence`.
    SmallImprovement,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::StepLimit => "step size reached the minimum",
            StopReason::Budget => "evaluation budget exhausted",
            StopReason::SmallImprovement => "energy improvement below threshold",
        })
    }
}

/// Snapshot appended whenever the best energy or the step size changes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub evaluations: u64,
    pub best_energy: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptOutcome {
    pub coords: Vec<f64>,
    pub energy: f64,
    /// False only when the budget ran out first.
    pub converged: bool,
    pub reason: StopReason,
    pub evaluations: u64,
    pub records: Vec<TraceRecord>,
}

/// Minimizes `energy` starting from `coords0`.
///
/// `energy` must be pure: same coordinates, same number. The probes of a
/// sweep are independent of one another, but acceptance follows the fixed
/// axis order (+ before -, lower index first), so results do not depend on
/// evaluation scheduling.
pub fn optimize<F>(energy: F, coords0: &[f64], cfg: &OptConfig) -> Result<OptOutcome, OptError>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;

    let mut evaluations: u64 = 1;
    let e0 = energy(coords0);
    if !e0.is_finite() {
        return Err(OptError::NonFiniteStart(e0));
    }

    let mut best = coords0.to_vec();
    let mut best_energy = e0;
    let mut step = cfg.initial_step;
    let mut records =
        vec![TraceRecord { evaluations, best_energy, step }];

    let reason = 'search: loop {
        let mut improved = false;
        'sweep: for axis in 0..best.len() {
            for sign in [1.0, -1.0] {
                if evaluations >= cfg.max_evaluations {
                    break 'search StopReason::Budget;
                }
                let mut probe = best.clone();
                probe[axis] += sign * step;
                evaluations += 1;
                let e = energy(&probe);
                // Non-finite probes mark invalid geometry; treat as uphill.
                if e.is_finite() && e < best_energy {
                    let gain = best_energy - e;
                    best = probe;
                    best_energy = e;
                    records.push(TraceRecord { evaluations, best_energy, step });
                    if gain < cfg.convergence {
                        break 'search StopReason::SmallImprovement;
                    }
                    improved = true;
                    break 'sweep;
                }
            }
        }
        if !improved {
            step *= cfg.step_shrink;
            if step < cfg.min_step {
                break StopReason::StepLimit;
            }
            records.push(TraceRecord { evaluations, best_energy, step });
        }
    };

    Ok(OptOutcome {
        coords: best,
        energy: best_energy,
        converged: reason != StopReason::Budget,
        reason,
        evaluations,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quick_cfg() -> OptConfig {
        OptConfig { convergence: 1e-12, ..OptConfig::default() }
    }

    #[test]
    fn one_dimensional_harmonic_reaches_the_minimum() {
        let energy = |c: &[f64]| 100.0 * (c[0] - 1.5).powi(2);
        let out = optimize(energy, &[2.0], &quick_cfg()).unwrap();
        assert!(out.converged, "{:?}", out.reason);
        assert!((out.coords[0] - 1.5).abs() <= 1e-4, "r = {}", out.coords[0]);
        assert!(out.energy <= 1e-6, "E = {}", out.energy);
        assert!(out.energy <= 100.0 * (2.0f64 - 1.5).powi(2));
    }

    #[test]
    fn starting_at_the_minimum_accepts_nothing() {
        let energy = |c: &[f64]| 100.0 * (c[0] - 1.5).powi(2);
        let out = optimize(energy, &[1.5], &quick_cfg()).unwrap();
        assert!(out.converged);
        assert_eq!(out.reason, StopReason::StepLimit);
        assert_eq!(out.coords, vec![1.5]);
        assert_eq!(out.energy, 0.0);
        // Only shrink records follow the initial one; the energy never moves.
        assert!(out.records.iter().all(|r| r.best_energy == 0.0));
    }

    #[test]
    fn budget_of_one_returns_the_initial_point() {
        let energy = |c: &[f64]| c[0] * c[0];
        let cfg = OptConfig { max_evaluations: 1, ..quick_cfg() };
        let out = optimize(energy, &[3.0], &cfg).unwrap();
        assert!(!out.converged);
        assert_eq!(out.reason, StopReason::Budget);
        assert_eq!(out.coords, vec![3.0]);
        assert_eq!(out.energy, 9.0);
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn non_finite_start_is_an_input_error() {
        let energy = |_: &[f64]| f64::NAN;
        let err = optimize(energy, &[0.0], &quick_cfg()).unwrap_err();
        assert!(matches!(err, OptError::NonFiniteStart(_)), "{err}");
    }

    #[test]
    fn non_finite_probes_are_rejected_but_search_continues() {
        // A wall of invalid geometry at x > 2.05, with the minimum behind it.
        let energy = |c: &[f64]| {
            if c[0] > 2.05 {
                f64::NAN
            } else {
                (c[0] - 3.0).powi(2)
            }
        };
        let out = optimize(energy, &[2.0], &quick_cfg()).unwrap();
        assert!(out.converged);
        assert!(out.energy.is_finite());
        assert!(out.coords[0] <= 2.05);
        assert!(out.coords[0] > 2.05 - 1e-3, "stopped at {}", out.coords[0]);
    }

    #[test]
    fn trace_energies_never_increase() {
        let energy = |c: &[f64]| (c[0] - 0.3).powi(2) + 2.0 * (c[1] + 1.2).powi(2);
        let out = optimize(energy, &[1.0, 1.0], &quick_cfg()).unwrap();
        for w in out.records.windows(2) {
            assert!(w[1].best_energy <= w[0].best_energy, "{:?}", w);
            assert!(w[1].evaluations >= w[0].evaluations);
        }
        // Records with a changed energy are strict improvements.
        let accepted: Vec<f64> = out
            .records
            .windows(2)
            .filter(|w| w[1].best_energy != w[0].best_energy)
            .map(|w| w[1].best_energy)
            .collect();
        for w in accepted.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn identical_inputs_give_identical_traces() {
        let energy =
            |c: &[f64]| (c[0] - 0.37).powi(2) + 0.5 * (c[1] + 0.81).powi(2) + c[2].powi(2);
        let a = optimize(energy, &[1.0, -2.0, 0.5], &quick_cfg()).unwrap();
        let b = optimize(energy, &[1.0, -2.0, 0.5], &quick_cfg()).unwrap();
        // Debug formatting preserves every bit of every float.
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn zero_dimensional_input_converges_immediately() {
        let out = optimize(|_: &[f64]| 5.0, &[], &quick_cfg()).unwrap();
        assert!(out.converged);
        assert_eq!(out.evaluations, 1);
        assert_eq!(out.energy, 5.0);
        assert!(out.coords.is_empty());
    }

    #[test]
    fn bad_configurations_are_rejected() {
        let base = quick_cfg();
        let cases = [
            OptConfig { initial_step: 0.0, ..base.clone() },
            OptConfig { initial_step: f64::INFINITY, ..base.clone() },
            OptConfig { step_shrink: 1.0, ..base.clone() },
            OptConfig { step_shrink: 0.0, ..base.clone() },
            OptConfig { min_step: -1.0, ..base.clone() },
            OptConfig { min_step: 0.2, ..base.clone() },
            OptConfig { max_evaluations: 0, ..base.clone() },
            OptConfig { convergence: 0.0, ..base.clone() },
        ];
        for cfg in cases {
            let err = optimize(|_: &[f64]| 0.0, &[0.0], &cfg).unwrap_err();
            assert!(matches!(err, OptError::BadConfig(_)), "{cfg:?}");
        }
    }

    proptest! {
        /// Separable convex quadratics end up near the analytic minimum on
        /// every axis once the step limit is the stop reason.
        #[test]
        fn diagonal_quadratics_converge_to_their_minimum(
            c1 in 0.5..10.0f64,
            c2 in 0.5..10.0f64,
            c3 in 0.5..10.0f64,
            m1 in -2.0..2.0f64,
            m2 in -2.0..2.0f64,
            m3 in -2.0..2.0f64,
            d1 in -1.0..1.0f64,
            d2 in -1.0..1.0f64,
            d3 in -1.0..1.0f64,
            shrink in 0.3..0.7f64,
        ) {
            let cs = [c1, c2, c3];
            let ms = [m1, m2, m3];
            let energy = move |x: &[f64]| -> f64 {
                x.iter().zip(cs).zip(ms).map(|((xi, c), m)| c * (xi - m).powi(2)).sum()
            };
            let cfg = OptConfig {
                step_shrink: shrink,
                convergence: 1e-15,
                ..quick_cfg()
            };
            let start = [m1 + d1, m2 + d2, m3 + d3];
            let out = optimize(energy, &start, &cfg).unwrap();
            prop_assert!(out.converged);
            prop_assume!(out.reason == StopReason::StepLimit);
            for (xi, m) in out.coords.iter().zip(ms) {
                prop_assert!(
                    (xi - m).abs() <= 10.0 * cfg.min_step,
                    "axis off by {}", (xi - m).abs()
                );
            }
            for w in out.records.windows(2) {
                prop_assert!(w[1].best_energy <= w[0].best_energy);
            }
        }
    }
}
