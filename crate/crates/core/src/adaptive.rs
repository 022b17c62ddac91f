//! Error-controlled step sizes for the ABM solver.
//!
//! The discrepancy between the AB2 prediction and the AM2 correction serves
//! as the local error estimate `E`. The next step is `h (eps / E)^(1/(p+1))`
//! clamped to `[h_min, h_max]`, except during a fixed warmup at the start and
//! a cooldown at the end of the interval, where the nominal step is used.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flows::{check_dim, check_time, VelocityField};
use crate::solvers::{AbmMode, AbmStepper, Counted, RoundTrip, SolverRun, StepRecord};
use crate::vecops::l2_distance;

/// Slack used when comparing times against region boundaries and endpoints.
const BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// Every step is kept; `E` only sizes the next step.
    #[default]
    AcceptAlways,
    /// A step with `E > eps` is redone at the reduced size.
    RejectRetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    /// Plain Euclidean norm of the difference.
    #[default]
    L2Total,
    /// Euclidean norm divided by `sqrt(d)`.
    L2Rms,
}

impl FromStr for Rejection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept_always" => Ok(Rejection::AcceptAlways),
            "reject_retry" => Ok(Rejection::RejectRetry),
            other => Err(Error::Config(format!("unknown rejection policy `{other}`"))),
        }
    }
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2_total" => Ok(ErrorNorm::L2Total),
            "l2_rms" => Ok(ErrorNorm::L2Rms),
            other => Err(Error::Config(format!("unknown error norm `{other}`"))),
        }
    }
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorNorm::L2Total => "l2_total",
            ErrorNorm::L2Rms => "l2_rms",
        })
    }
}

/// User-facing controller settings. Step bounds are multiples of the
/// nominal step, which is only known once the interval and step count are.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    pub epsilon: f64,
    pub order_p: u32,
    pub h_min_factor: f64,
    pub h_max_factor: f64,
    pub warmup_steps: usize,
    pub cooldown_steps: usize,
    pub rejection: Rejection,
    pub error_norm: ErrorNorm,
    pub mode: AbmMode,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            order_p: 2,
            h_min_factor: 1.0,
            h_max_factor: 4.0,
            warmup_steps: 5,
            cooldown_steps: 5,
            rejection: Rejection::AcceptAlways,
            error_norm: ErrorNorm::L2Total,
            mode: AbmMode::Pece,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.order_p == 0 {
            return Err(Error::Config("order_p must be positive".into()));
        }
        if !(self.h_min_factor > 0.0 && self.h_min_factor <= self.h_max_factor) {
            return Err(Error::Config(format!(
                "need 0 < h_min_factor <= h_max_factor, got {} and {}",
                self.h_min_factor, self.h_max_factor
            )));
        }
        Ok(())
    }
}

/// Controller bound to a concrete nominal step `h_init`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepController {
    pub epsilon: f64,
    pub order_p: u32,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub warmup_steps: usize,
    pub cooldown_steps: usize,
    pub rejection: Rejection,
    pub error_norm: ErrorNorm,
}

impl StepController {
    pub fn new(config: &ControllerConfig, h_init: f64) -> Result<Self> {
        config.validate()?;
        if !(h_init > 0.0) {
            return Err(Error::Config(format!(
                "h_init must be positive, got {h_init}"
            )));
        }
        Ok(Self {
            epsilon: config.epsilon,
            order_p: config.order_p,
            h_init,
            h_min: config.h_min_factor * h_init,
            h_max: config.h_max_factor * h_init,
            warmup_steps: config.warmup_steps,
            cooldown_steps: config.cooldown_steps,
            rejection: config.rejection,
            error_norm: config.error_norm,
        })
    }
}

/// How the size of one step was chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDecision {
    /// Discrepancy of the previous accepted step, which drove this choice.
    /// `None` when no ABM step precedes it.
    pub error_estimate: Option<f64>,
    /// Step magnitude used.
    pub next_h: f64,
    pub accepted: bool,
    /// Inside the warmup or cooldown region.
    pub frozen: bool,
    /// Shortened to land exactly on the cooldown boundary or the endpoint.
    pub truncated: bool,
}

/// Predictor-corrector discrepancy under `norm`.
pub fn error_estimate(z_pred: &[f64], z_corr: &[f64], norm: ErrorNorm) -> Result<f64> {
    check_dim(z_pred.len(), z_corr.len())?;
    let d = l2_distance(z_pred, z_corr);
    Ok(match norm {
        ErrorNorm::L2Total => d,
        ErrorNorm::L2Rms => d / (z_pred.len().max(1) as f64).sqrt(),
    })
}

/// Proposed step magnitude after a step of size `h` with estimate `e`:
/// `h (eps / e)^(1/(p+1))` clamped to `[h_min, h_max]`. A zero estimate
/// saturates at `h_max`.
pub fn next_step_size(h: f64, e: f64, ctrl: &StepController) -> f64 {
    next_step_size_unclamped(h, e, ctrl).clamp(ctrl.h_min, ctrl.h_max)
}

fn next_step_size_unclamped(h: f64, e: f64, ctrl: &StepController) -> f64 {
    if e <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = ctrl.epsilon / e;
    let factor = if ctrl.order_p == 2 {
        ratio.cbrt()
    } else {
        ratio.powf(1.0 / (ctrl.order_p as f64 + 1.0))
    };
    h * factor
}

/// ABM integration from `t_start` to `t_end` with the adaptive controller.
///
/// The nominal step is `h_init = |t_end - t_start| / nominal_steps`. The
/// first `warmup_steps` steps and every step that starts within
/// `cooldown_steps * h_init` of `t_end` use `h_init`. In between, each step
/// is sized from the previous step's discrepancy; the last one is shortened
/// so that the cooldown region starts exactly on schedule. Rejected attempts
/// are recorded in `per_step` and their evaluations are included in `nfe`.
pub fn adaptive_abm_solve<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    t_start: f64,
    t_end: f64,
    config: &ControllerConfig,
    nominal_steps: usize,
) -> Result<SolverRun> {
    check_dim(field.dim(), z_start.len())?;
    check_time(t_start)?;
    check_time(t_end)?;
    if nominal_steps < config.warmup_steps + config.cooldown_steps + 1 || nominal_steps < 2 {
        return Err(Error::Config(format!(
            "nominal_steps = {nominal_steps} must be at least warmup + cooldown + 1 = {} and at least 2",
            config.warmup_steps + config.cooldown_steps + 1
        )));
    }
    let span = t_end - t_start;
    if span == 0.0 {
        return Err(Error::InvalidGrid("empty integration interval".into()));
    }
    let sign = span.signum();
    let h_init = span.abs() / nominal_steps as f64;
    let ctrl = StepController::new(config, h_init)?;
    let mode = config.mode;
    let cooldown_span = ctrl.cooldown_steps as f64 * h_init;
    let t_cool = t_end - sign * cooldown_span;

    let counted = Counted::new(field);
    let mut stepper = AbmStepper::new(mode);
    let mut trajectory = vec![(t_start, z_start.to_vec())];
    let mut per_step = Vec::new();

    // Opening Heun step at the nominal size.
    let z1 = stepper.init(&counted, z_start, t_start, sign * h_init)?;
    per_step.push(StepRecord {
        t: t_start,
        h: sign * h_init,
        predictor_state: None,
        error_estimate: None,
        accepted: true,
        decision: Some(StepDecision {
            error_estimate: None,
            next_h: h_init,
            accepted: true,
            frozen: true,
            truncated: false,
        }),
    });
    trajectory.push((t_start + sign * h_init, z1));
    let mut last_h = h_init;
    let mut last_e: Option<f64> = None;

    loop {
        let (t, z) = trajectory.last().map(|(t, z)| (*t, z.clone())).unwrap();
        let remaining = (t_end - t).abs();
        if remaining <= BOUNDARY_TOLERANCE {
            break;
        }
        let accepted_steps = trajectory.len() - 1;
        let frozen =
            accepted_steps < ctrl.warmup_steps || remaining <= cooldown_span + BOUNDARY_TOLERANCE;

        let (mut h, mut t_next, mut truncated) = if frozen {
            if remaining <= h_init + BOUNDARY_TOLERANCE {
                (remaining, t_end, remaining != h_init)
            } else {
                (h_init, t + sign * h_init, false)
            }
        } else {
            let proposed = match last_e {
                Some(e) => next_step_size(last_h, e, &ctrl),
                None => h_init,
            };
            place_middle_step(t, proposed, t_cool, sign)
        };

        loop {
            let attempt = stepper.attempt(&counted, &z, t, t_next - t)?;
            let e = error_estimate(&attempt.z_pred, &attempt.z_corr, ctrl.error_norm)?;
            let retry = ctrl.rejection == Rejection::RejectRetry
                && !frozen
                && e > ctrl.epsilon
                && next_step_size(h, e, &ctrl) < h;
            let decision = StepDecision {
                error_estimate: last_e,
                next_h: h,
                accepted: !retry,
                frozen,
                truncated,
            };
            if retry {
                per_step.push(StepRecord {
                    t,
                    h: sign * h,
                    predictor_state: Some(attempt.z_pred),
                    error_estimate: Some(e),
                    accepted: false,
                    decision: Some(decision),
                });
                (h, t_next, truncated) =
                    place_middle_step(t, next_step_size(h, e, &ctrl), t_cool, sign);
                continue;
            }
            stepper.commit(&counted, &attempt)?;
            per_step.push(StepRecord {
                t,
                h: sign * h,
                predictor_state: Some(attempt.z_pred),
                error_estimate: Some(e),
                accepted: true,
                decision: Some(decision),
            });
            trajectory.push((t_next, attempt.z_corr));
            last_h = h;
            last_e = Some(e);
            break;
        }
    }

    Ok(SolverRun {
        trajectory,
        nfe: counted.calls(),
        per_step,
    })
}

/// Chooses the end of an adjustable step of magnitude `h` starting at `t`,
/// snapping onto `t_cool` if the step would reach or cross it.
fn place_middle_step(t: f64, h: f64, t_cool: f64, sign: f64) -> (f64, f64, bool) {
    let to_cool = (t_cool - t).abs();
    if h >= to_cool - BOUNDARY_TOLERANCE {
        (to_cool, t_cool, to_cool != h)
    } else {
        (h, t + sign * h, false)
    }
}

/// Adaptive inversion over `[0, 1]` followed by adaptive reconstruction back
/// to `t = 0`, both with the same settings.
pub fn adaptive_round_trip<F: VelocityField + ?Sized>(
    field: &F,
    z_data: &[f64],
    config: &ControllerConfig,
    nominal_steps: usize,
) -> Result<RoundTrip> {
    let inversion = adaptive_abm_solve(field, z_data, 0.0, 1.0, config, nominal_steps)?;
    let reconstruction =
        adaptive_abm_solve(field, inversion.terminal(), 1.0, 0.0, config, nominal_steps)?;
    Ok(RoundTrip::from_runs(inversion, reconstruction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{Constant, LinearDecay};

    fn ctrl(h_init: f64) -> StepController {
        StepController::new(&ControllerConfig::default(), h_init).unwrap()
    }

    #[test]
    fn error_estimate_examples() {
        assert_eq!(
            error_estimate(&[0.3, 0.4], &[0.3, 0.4], ErrorNorm::L2Total).unwrap(),
            0.0
        );
        assert_eq!(
            error_estimate(&[1.0, 0.0], &[0.0, 0.0], ErrorNorm::L2Total).unwrap(),
            1.0
        );
        let e = error_estimate(&[3e-2, 4e-2], &[0.0, 0.0], ErrorNorm::L2Total).unwrap();
        assert!((e - 0.05).abs() < 1e-16);
        let e = error_estimate(&[1.0, 1.0, 1.0, 1.0], &[0.0; 4], ErrorNorm::L2Rms).unwrap();
        assert_eq!(e, 1.0);
        assert!(error_estimate(&[1.0], &[0.0, 0.0], ErrorNorm::L2Total).is_err());
    }

    #[test]
    fn next_step_size_examples() {
        let c = ctrl(0.05);
        assert_eq!(c.h_min, 0.05);
        assert_eq!(c.h_max, 0.2);
        assert_eq!(next_step_size(0.07, 0.1, &c), 0.07);
        assert_eq!(next_step_size(0.05, 0.0125, &c), 0.1);
        assert_eq!(next_step_size(0.05, 0.8, &c), 0.05);
        assert!((next_step_size_unclamped(0.05, 0.8, &c) - 0.025).abs() < 1e-17);
        assert_eq!(next_step_size(0.05, 0.0, &c), 0.2);
        assert_eq!(next_step_size(0.05, 1e-9, &c), 0.2);
    }

    #[test]
    fn config_validation() {
        let bad = ControllerConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(StepController::new(&bad, 0.1).is_err());
        let bad = ControllerConfig {
            h_min_factor: 5.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(StepController::new(&ControllerConfig::default(), 0.0).is_err());
    }

    #[test]
    fn rejects_too_few_nominal_steps() {
        let decay = LinearDecay::new(1);
        let cfg = ControllerConfig::default();
        assert!(matches!(
            adaptive_abm_solve(&decay, &[1.0], 0.0, 1.0, &cfg, 10),
            Err(Error::Config(_))
        ));
        assert!(adaptive_abm_solve(&decay, &[1.0], 0.0, 1.0, &cfg, 11).is_ok());
    }

    #[test]
    fn constant_field_saturates() {
        let c = Constant::new(vec![2.0]);
        let cfg = ControllerConfig::default();
        let run = adaptive_abm_solve(&c, &[1.0], 0.0, 1.0, &cfg, 15).unwrap();
        // 5 warmup + ceil(5 / 4) middle + 5 cooldown
        assert_eq!(run.steps_taken(), 12);
        assert_eq!(run.nfe, 3 + 2 * 11);
        assert_eq!(run.terminal_time(), 1.0);
        assert!((run.terminal()[0] - 3.0).abs() < 1e-14);
        let d = run.per_step[5].decision.unwrap();
        assert!(!d.frozen && !d.truncated);
        assert_eq!(d.next_h, 4.0 / 15.0);
        for r in run.per_step.iter().skip(1) {
            assert_eq!(r.error_estimate, Some(0.0));
        }
    }

    #[test]
    fn decay_round_trip_nfe() {
        let decay = LinearDecay::new(1);
        let rt = adaptive_round_trip(&decay, &[1.0], &ControllerConfig::default(), 15).unwrap();
        assert_eq!(rt.total_nfe, 50);
        assert_eq!(rt.reconstruction.terminal_time(), 0.0);
    }

    #[test]
    fn reject_retry_counts_rejections() {
        let decay = LinearDecay::new(1);
        let cfg = ControllerConfig {
            epsilon: 1e-4,
            rejection: Rejection::RejectRetry,
            h_max_factor: 8.0,
            ..Default::default()
        };
        let run = adaptive_abm_solve(&decay, &[1.0], 0.0, 1.0, &cfg, 20).unwrap();
        let rejected = run.rejections();
        assert!(rejected > 0);
        let accepted = run.per_step.iter().filter(|r| r.accepted).count();
        assert_eq!(accepted, run.steps_taken());
        // rejected attempts cost one evaluation each
        assert_eq!(run.nfe, 3 + 2 * (accepted - 1) + rejected);
        assert_eq!(run.terminal_time(), 1.0);
    }
}
