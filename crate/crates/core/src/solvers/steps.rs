//! Single-step building blocks. Every step takes a signed `h`; the sign
//! selects the integration direction.

use crate::error::{Error, Result};
use crate::flows::{check_time, evaluate, VelocityField};
use crate::vecops::add_scaled;

/// Predictor-corrector evaluation convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbmMode {
    /// Predict, Evaluate, Correct, Evaluate: the corrected state is
    /// re-evaluated and that velocity becomes history. Two evaluations per step.
    #[default]
    Pece,
    /// Predict, Evaluate, Correct: the evaluation at the predicted state is
    /// reused as history. One evaluation per step.
    Pec,
}

/// Coefficient set for the two-step Adams-Bashforth predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ab2Coefficients {
    /// Constant-step weights `3/2, -1/2`.
    Uniform,
    /// Weights rebuilt from the ratio of the current step to the previous one.
    Variable,
}

/// Relative step-size mismatch beyond which the variable-step predictor is used.
pub const VARIABLE_STEP_THRESHOLD: f64 = 1e-12;

impl Ab2Coefficients {
    pub fn select(h: f64, h_prev: f64) -> Self {
        if (h - h_prev).abs() > VARIABLE_STEP_THRESHOLD * h_prev.abs() {
            Ab2Coefficients::Variable
        } else {
            Ab2Coefficients::Uniform
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub t: f64,
    pub v: Vec<f64>,
}

/// The two most recent `(time, velocity)` samples. Holds exactly two
/// entries; pushing a new one drops the oldest.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryPair {
    pub prev: HistoryEntry,
    pub curr: HistoryEntry,
}

impl HistoryPair {
    pub fn new(prev: HistoryEntry, curr: HistoryEntry) -> Self {
        Self { prev, curr }
    }

    pub fn push(&mut self, t: f64, v: Vec<f64>) {
        let curr = std::mem::replace(&mut self.curr, HistoryEntry { t, v });
        self.prev = curr;
    }

    /// Signed step separating the two entries.
    pub fn step(&self) -> f64 {
        self.curr.t - self.prev.t
    }
}

fn check_step(t: f64, h: f64) -> Result<()> {
    check_time(t)?;
    check_time(t + h)
}

/// Explicit Euler. One evaluation.
pub fn euler_step<F: VelocityField + ?Sized>(
    field: &F,
    z: &[f64],
    t: f64,
    h: f64,
) -> Result<Vec<f64>> {
    check_step(t, h)?;
    let v = evaluate(field, z, t)?;
    Ok(add_scaled(z, h, &v))
}

/// Explicit midpoint rule. Two evaluations.
pub fn midpoint_step<F: VelocityField + ?Sized>(
    field: &F,
    z: &[f64],
    t: f64,
    h: f64,
) -> Result<Vec<f64>> {
    check_step(t, h)?;
    let k1 = evaluate(field, z, t)?;
    let k2 = evaluate(field, &add_scaled(z, 0.5 * h, &k1), t + 0.5 * h)?;
    Ok(add_scaled(z, h, &k2))
}

/// Heun (explicit trapezoid) step that opens an ABM run and builds its first
/// history pair.
///
/// Both modes spend two evaluations on `k1 = v(z, t)` and
/// `k2 = v(z + h k1, t + h)`. In PECE mode the new state is evaluated once
/// more and that velocity becomes `curr`; in PEC mode `k2`, the evaluation
/// at the Euler-predicted point, plays that role.
pub fn rk2_init<F: VelocityField + ?Sized>(
    field: &F,
    z: &[f64],
    t: f64,
    h: f64,
    mode: AbmMode,
) -> Result<(Vec<f64>, HistoryPair)> {
    check_step(t, h)?;
    let t_next = t + h;
    let k1 = evaluate(field, z, t)?;
    let k2 = evaluate(field, &add_scaled(z, h, &k1), t_next)?;
    let z_next: Vec<f64> = z
        .iter()
        .zip(k1.iter().zip(&k2))
        .map(|(zi, (a, b))| zi + 0.5 * h * (a + b))
        .collect();
    let v_curr = match mode {
        AbmMode::Pece => evaluate(field, &z_next, t_next)?,
        AbmMode::Pec => k2,
    };
    let history = HistoryPair::new(
        HistoryEntry { t, v: k1 },
        HistoryEntry {
            t: t_next,
            v: v_curr,
        },
    );
    Ok((z_next, history))
}

/// Two-step Adams-Bashforth extrapolation. No evaluations.
///
/// `Uniform` applies `z + h/2 (3 v_curr - v_prev)`; `Variable` uses the
/// weights `1 + r` and `-r` with `r = h / (2 h_prev)`, where `h_prev` is the
/// spacing of the history pair. The two agree bit-for-bit when `h == h_prev`.
pub fn ab2_predict(
    z: &[f64],
    history: Option<&HistoryPair>,
    h: f64,
    coefficients: Ab2Coefficients,
) -> Result<Vec<f64>> {
    let hist = history.ok_or(Error::MissingHistory)?;
    let (vc, vp) = (&hist.curr.v, &hist.prev.v);
    if vc.len() != z.len() || vp.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: vc.len().min(vp.len()),
        });
    }
    let out = match coefficients {
        Ab2Coefficients::Uniform => {
            let half = 0.5 * h;
            z.iter()
                .zip(vc.iter().zip(vp))
                .map(|(zi, (c, p))| zi + half * (3.0 * c - p))
                .collect()
        }
        Ab2Coefficients::Variable => {
            let r = h / (2.0 * hist.step());
            let wc = 1.0 + r;
            z.iter()
                .zip(vc.iter().zip(vp))
                .map(|(zi, (c, p))| zi + h * (wc * c - r * p))
                .collect()
        }
    };
    Ok(out)
}

/// Trapezoidal Adams-Moulton correction applied once at the predicted state.
/// One evaluation. Returns the corrected state and `v(z_pred, t_next)`.
pub fn am2_correct<F: VelocityField + ?Sized>(
    field: &F,
    z: &[f64],
    z_pred: &[f64],
    t_next: f64,
    v_curr: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let v_pred = evaluate(field, z_pred, t_next)?;
    if v_curr.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: v_curr.len(),
        });
    }
    let half = 0.5 * h;
    let z_corr = z
        .iter()
        .zip(v_pred.iter().zip(v_curr))
        .map(|(zi, (a, b))| zi + half * (a + b))
        .collect();
    Ok((z_corr, v_pred))
}
