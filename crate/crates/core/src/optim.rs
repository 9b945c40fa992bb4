//! Full-batch gradient ascent shared by the GLM fitters.
//!
//! Each step moves every parameter by `rate * grad / curvature`, where the
//! objective supplies a positive per-parameter curvature estimate (the
//! diagonal of the Fisher information for the likelihoods here). The rate
//! adapts per epoch: a step that lowers the objective (or makes it
//! non-finite) is rejected and the rate halved; an accepted step grows the
//! rate slightly. Accepted objectives therefore never decrease.

use crate::error::{Error, Result};
use crate::glm::FitConfig;

const GROW: f64 = 1.2;
const SHRINK: f64 = 0.5;
const STALL_EPOCHS: usize = 5;
const MAX_CONSECUTIVE_REJECTS: usize = 60;
/// Lower bound on a curvature entry, so parameters whose feature is never
/// active do not get unbounded steps.
const CURVATURE_FLOOR: f64 = 1e-8;

/// A smooth objective over a flat parameter vector, to be maximized.
pub(crate) trait Objective {
    fn n_params(&self) -> usize;

    /// Returns the mean per-row objective at `params`, writes its gradient to
    /// `grad` and a positive step scale per parameter to `curvature`.
    fn evaluate(&self, params: &[f64], grad: &mut [f64], curvature: &mut [f64]) -> f64;
}

/// What happened during one run of [`gradient_ascent`].
#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace {
    /// Mean objective after initialization and after every accepted step.
    pub objective: Vec<f64>,
    /// Epochs consumed, rejected steps included.
    pub epochs: usize,
    pub rejected_steps: usize,
    pub converged: bool,
}

impl AscentTrace {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().expect("trace holds the initial objective")
    }
}

pub(crate) fn gradient_ascent<O: Objective>(
    objective: &O,
    mut params: Vec<f64>,
    config: &FitConfig,
) -> Result<(Vec<f64>, AscentTrace)> {
    debug_assert_eq!(params.len(), objective.n_params());
    let n = params.len();
    let mut grad = vec![0.0; n];
    let mut curv = vec![1.0; n];
    let mut value = objective.evaluate(&params, &mut grad, &mut curv);
    if !value.is_finite() {
        return Err(Error::Training {
            epoch: 0,
            reason: "objective is non-finite at the initial parameters".into(),
        });
    }

    let mut trace = AscentTrace {
        objective: vec![value],
        epochs: 0,
        rejected_steps: 0,
        converged: false,
    };
    let mut rate = config.learning_rate;
    let mut candidate = vec![0.0; n];
    let mut candidate_grad = vec![0.0; n];
    let mut candidate_curv = vec![1.0; n];
    let mut stalled = 0;
    let mut rejects = 0;

    for epoch in 1..=config.max_epochs {
        trace.epochs = epoch;
        for (((c, p), g), h) in candidate.iter_mut().zip(&params).zip(&grad).zip(&curv) {
            *c = p + rate * g / h.max(CURVATURE_FLOOR);
        }
        let next = objective.evaluate(&candidate, &mut candidate_grad, &mut candidate_curv);
        if !next.is_finite() || next < value {
            trace.rejected_steps += 1;
            rejects += 1;
            rate *= SHRINK;
            if rejects >= MAX_CONSECUTIVE_REJECTS {
                if next.is_finite() {
                    // No ascent direction left at machine precision.
                    trace.converged = true;
                    break;
                }
                return Err(Error::Training {
                    epoch,
                    reason: "objective diverged to a non-finite value".into(),
                });
            }
            continue;
        }
        rejects = 0;
        let improvement = (next - value) / value.abs().max(1.0);
        std::mem::swap(&mut params, &mut candidate);
        std::mem::swap(&mut grad, &mut candidate_grad);
        std::mem::swap(&mut curv, &mut candidate_curv);
        value = next;
        trace.objective.push(value);
        rate *= GROW;

        if improvement <= config.tolerance {
            stalled += 1;
            if stalled >= STALL_EPOCHS {
                trace.converged = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    Ok((params, trace))
}

/// Runs [`gradient_ascent`] from `n` initial points drawn in order from
/// `init` and keeps the run with the highest final objective (the earliest on
/// ties). Fails only if every start fails, with the first start's error.
pub(crate) fn best_of_starts<O: Objective>(
    objective: &O,
    n: usize,
    mut init: impl FnMut() -> Vec<f64>,
    config: &FitConfig,
) -> Result<(Vec<f64>, AscentTrace)> {
    let mut best: Option<(Vec<f64>, AscentTrace)> = None;
    let mut first_error = None;
    for _ in 0..n.max(1) {
        match gradient_ascent(objective, init(), config) {
            Ok(run) => {
                if best
                    .as_ref()
                    .is_none_or(|(_, t)| run.1.final_objective() > t.final_objective())
                {
                    best = Some(run);
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_error.expect("at least one start ran"))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// -(p - target)^2 summed over coordinates.
    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn n_params(&self) -> usize {
            self.target.len()
        }

        fn evaluate(&self, params: &[f64], grad: &mut [f64], curv: &mut [f64]) -> f64 {
            curv.fill(1.0);
            let mut v = 0.0;
            for ((g, p), t) in grad.iter_mut().zip(params).zip(&self.target) {
                v -= (p - t) * (p - t);
                *g = -2.0 * (p - t);
            }
            v
        }
    }

    #[test]
    fn finds_quadratic_maximum() {
        let obj = Quadratic {
            target: vec![1.5, -3.0, 40.0],
        };
        let config = FitConfig {
            learning_rate: 5.0,
            ..FitConfig::default()
        };
        let (p, trace) = gradient_ascent(&obj, vec![0.0; 3], &config).unwrap();
        assert!(trace.converged);
        for (a, b) in p.iter().zip(&obj.target) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(trace.objective.windows(2).all(|w| w[1] >= w[0]));
    }

    struct NanAlways;

    impl Objective for NanAlways {
        fn n_params(&self) -> usize {
            1
        }

        fn evaluate(&self, _: &[f64], grad: &mut [f64], _: &mut [f64]) -> f64 {
            grad[0] = 1.0;
            f64::NAN
        }
    }

    /// Two peaks: a low one at -1 and a high one at +2.
    struct TwoPeaks;

    impl Objective for TwoPeaks {
        fn n_params(&self) -> usize {
            1
        }

        fn evaluate(&self, p: &[f64], grad: &mut [f64], _: &mut [f64]) -> f64 {
            let a = (-(p[0] + 1.0).powi(2)).exp();
            let b = 2.0 * (-(p[0] - 2.0).powi(2)).exp();
            grad[0] = -2.0 * (p[0] + 1.0) * a - 2.0 * (p[0] - 2.0) * b;
            a + b
        }
    }

    #[test]
    fn best_start_wins() {
        let starts = [-1.2, 1.5, -0.8];
        let mut i = 0;
        let (p, _) = best_of_starts(
            &TwoPeaks,
            3,
            || {
                i += 1;
                vec![starts[i - 1]]
            },
            &FitConfig::default(),
        )
        .unwrap();
        assert!((p[0] - 2.0).abs() < 1e-3, "{p:?}");
    }

    #[test]
    fn non_finite_start_is_a_training_error() {
        let err = gradient_ascent(&NanAlways, vec![0.0], &FitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Training { epoch: 0, .. }));
    }
}
