//! Fixed-grid integrators: Euler and midpoint baselines and the second-order
//! Adams-Bashforth-Moulton predictor-corrector, all with exact
//! function-evaluation (NFE) accounting.

mod grid;
mod steps;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

pub use grid::{Direction, TimeGrid};
pub use steps::{
    ab2_predict, am2_correct, euler_step, midpoint_step, rk2_init, Ab2Coefficients, AbmMode,
    HistoryEntry, HistoryPair, VARIABLE_STEP_THRESHOLD,
};

use crate::adaptive::StepDecision;
use crate::error::{Error, Result};
use crate::flows::{check_dim, evaluate, VelocityField};
use crate::vecops::l2_distance;

/// Wraps a field and counts every call that reaches it.
pub struct Counted<'a, F: ?Sized> {
    inner: &'a F,
    calls: Cell<usize>,
}

impl<'a, F: VelocityField + ?Sized> Counted<'a, F> {
    pub fn new(inner: &'a F) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }
}

impl<F: VelocityField + ?Sized> VelocityField for Counted<'_, F> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn velocity(&self, z: &[f64], t: f64, out: &mut [f64]) {
        self.calls.set(self.calls.get() + 1);
        self.inner.velocity(z, t, out)
    }

    fn lipschitz_bound(&self) -> Option<f64> {
        self.inner.lipschitz_bound()
    }

    fn exact(&self, z: &[f64], t_start: f64, t_end: f64) -> Option<Vec<f64>> {
        self.inner.exact(z, t_start, t_end)
    }
}

/// One integration step as taken (or attempted) by a solver.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Start time of the step.
    pub t: f64,
    /// Signed step size.
    pub h: f64,
    pub predictor_state: Option<Vec<f64>>,
    /// Predictor-corrector discrepancy.
    pub error_estimate: Option<f64>,
    pub accepted: bool,
    /// Controller output, for adaptive runs.
    pub decision: Option<StepDecision>,
}

impl StepRecord {
    fn plain(t: f64, h: f64) -> Self {
        Self {
            t,
            h,
            predictor_state: None,
            error_estimate: None,
            accepted: true,
            decision: None,
        }
    }
}

/// Output of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    /// Accepted `(time, state)` pairs, starting at the input state.
    pub trajectory: Vec<(f64, Vec<f64>)>,
    /// Number of velocity evaluations made during the run.
    pub nfe: usize,
    pub per_step: Vec<StepRecord>,
}

impl SolverRun {
    pub fn terminal(&self) -> &[f64] {
        &self.trajectory.last().expect("trajectory is never empty").1
    }

    pub fn terminal_time(&self) -> f64 {
        self.trajectory.last().expect("trajectory is never empty").0
    }

    /// Number of accepted steps.
    pub fn steps_taken(&self) -> usize {
        self.trajectory.len() - 1
    }

    pub fn rejections(&self) -> usize {
        self.per_step.iter().filter(|r| !r.accepted).count()
    }
}

/// Fixed-grid scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Euler,
    Midpoint,
    Abm(AbmMode),
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Euler => "euler",
            Solver::Midpoint => "midpoint",
            Solver::Abm(AbmMode::Pece) => "abm-pece",
            Solver::Abm(AbmMode::Pec) => "abm-pec",
        }
    }

    /// Evaluations spent on an `n`-step grid.
    pub fn nfe_for(self, n: usize) -> usize {
        match self {
            Solver::Euler => n,
            Solver::Midpoint => 2 * n,
            Solver::Abm(AbmMode::Pece) => 3 + 2 * (n - 1),
            Solver::Abm(AbmMode::Pec) => 2 + (n - 1),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl fmt::Display for AbmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbmMode::Pece => "pece",
            AbmMode::Pec => "pec",
        })
    }
}

impl FromStr for AbmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pece" => Ok(AbmMode::Pece),
            "pec" => Ok(AbmMode::Pec),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected pece or pec)"
            ))),
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    /// Accepts `euler`, `midpoint`, `abm` (PECE), `abm-pece` and `abm-pec`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Solver::Euler),
            "midpoint" => Ok(Solver::Midpoint),
            "abm" | "abm-pece" => Ok(Solver::Abm(AbmMode::Pece)),
            "abm-pec" => Ok(Solver::Abm(AbmMode::Pec)),
            other => Err(Error::Config(format!("unknown solver `{other}`"))),
        }
    }
}

/// Result of one predict/correct attempt, not yet committed to history.
pub(crate) struct Attempt {
    pub t_next: f64,
    pub h: f64,
    pub z_pred: Vec<f64>,
    pub z_corr: Vec<f64>,
    pub v_pred: Vec<f64>,
}

/// Predictor-corrector state machine shared by the fixed-grid and adaptive
/// drivers. Owns the two-entry history.
pub(crate) struct AbmStepper {
    mode: AbmMode,
    history: Option<HistoryPair>,
}

impl AbmStepper {
    pub fn new(mode: AbmMode) -> Self {
        Self {
            mode,
            history: None,
        }
    }

    pub fn init<F: VelocityField + ?Sized>(
        &mut self,
        field: &F,
        z: &[f64],
        t: f64,
        h: f64,
    ) -> Result<Vec<f64>> {
        let (z_next, history) = rk2_init(field, z, t, h, self.mode)?;
        self.history = Some(history);
        Ok(z_next)
    }

    pub fn attempt<F: VelocityField + ?Sized>(
        &self,
        field: &F,
        z: &[f64],
        t: f64,
        h: f64,
    ) -> Result<Attempt> {
        let history = self.history.as_ref();
        let h_prev = history.ok_or(Error::MissingHistory)?.step();
        let t_next = t + h;
        crate::flows::check_time(t_next)?;
        let z_pred = ab2_predict(z, history, h, Ab2Coefficients::select(h, h_prev))?;
        let v_curr = &history.unwrap().curr.v;
        let (z_corr, v_pred) = am2_correct(field, z, &z_pred, t_next, v_curr, h)?;
        Ok(Attempt {
            t_next,
            h,
            z_pred,
            z_corr,
            v_pred,
        })
    }

    pub fn commit<F: VelocityField + ?Sized>(
        &mut self,
        field: &F,
        attempt: &Attempt,
    ) -> Result<()> {
        let v = match self.mode {
            AbmMode::Pece => evaluate(field, &attempt.z_corr, attempt.t_next)?,
            AbmMode::Pec => attempt.v_pred.clone(),
        };
        self.history
            .as_mut()
            .ok_or(Error::MissingHistory)?
            .push(attempt.t_next, v);
        Ok(())
    }

    #[cfg(test)]
    pub fn history(&self) -> Option<&HistoryPair> {
        self.history.as_ref()
    }
}

/// Second-order ABM over `grid`: one Heun step to build history, then an
/// AB2 prediction and a single AM2 correction per remaining interval.
///
/// NFE is `3 + 2 (N - 1)` in PECE mode and `2 + (N - 1)` in PEC mode. Each
/// step record carries the predicted state and the L2 predictor-corrector
/// discrepancy.
pub fn abm_solve<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    grid: &TimeGrid,
    mode: AbmMode,
) -> Result<SolverRun> {
    check_dim(field.dim(), z_start.len())?;
    if grid.intervals() < 2 {
        return Err(Error::InvalidGrid(
            "ABM needs at least two intervals".into(),
        ));
    }
    let counted = Counted::new(field);
    let times = grid.times();
    let mut stepper = AbmStepper::new(mode);
    let mut trajectory = Vec::with_capacity(times.len());
    let mut per_step = Vec::with_capacity(grid.intervals());
    trajectory.push((times[0], z_start.to_vec()));

    let h0 = times[1] - times[0];
    let z1 = stepper.init(&counted, z_start, times[0], h0)?;
    per_step.push(StepRecord::plain(times[0], h0));
    trajectory.push((times[1], z1));

    for w in times[1..].windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let z = &trajectory.last().unwrap().1;
        let attempt = stepper.attempt(&counted, z, t, t_next - t)?;
        stepper.commit(&counted, &attempt)?;
        per_step.push(StepRecord {
            t,
            h: attempt.h,
            error_estimate: Some(l2_distance(&attempt.z_pred, &attempt.z_corr)),
            predictor_state: Some(attempt.z_pred),
            accepted: true,
            decision: None,
        });
        trajectory.push((t_next, attempt.z_corr));
    }

    Ok(SolverRun {
        trajectory,
        nfe: counted.calls(),
        per_step,
    })
}

fn one_step_solve<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    grid: &TimeGrid,
    step: impl Fn(&Counted<'_, F>, &[f64], f64, f64) -> Result<Vec<f64>>,
) -> Result<SolverRun> {
    check_dim(field.dim(), z_start.len())?;
    let counted = Counted::new(field);
    let mut trajectory = vec![(grid.start(), z_start.to_vec())];
    let mut per_step = Vec::with_capacity(grid.intervals());
    for w in grid.times().windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let z = step(&counted, &trajectory.last().unwrap().1, t, t_next - t)?;
        per_step.push(StepRecord::plain(t, t_next - t));
        trajectory.push((t_next, z));
    }
    Ok(SolverRun {
        trajectory,
        nfe: counted.calls(),
        per_step,
    })
}

/// Runs `solver` over `grid` starting from `z_start`.
pub fn solve<F: VelocityField + ?Sized>(
    field: &F,
    z_start: &[f64],
    grid: &TimeGrid,
    solver: Solver,
) -> Result<SolverRun> {
    match solver {
        Solver::Euler => one_step_solve(field, z_start, grid, |f, z, t, h| euler_step(f, z, t, h)),
        Solver::Midpoint => {
            one_step_solve(field, z_start, grid, |f, z, t, h| midpoint_step(f, z, t, h))
        }
        Solver::Abm(mode) => abm_solve(field, z_start, grid, mode),
    }
}

/// One-step defect of the ABM update given exact history.
///
/// `z` is a point on the exact trajectory at time `t`. The history is seeded
/// with exact states at `t - h` and `t`, one uniform AB2 prediction and one
/// AM2 correction are made, and the L2 distance to the exact state at `t + h`
/// is returned.
pub fn local_truncation_probe<F: VelocityField + ?Sized>(
    field: &F,
    z: &[f64],
    t: f64,
    h: f64,
) -> Result<f64> {
    check_dim(field.dim(), z.len())?;
    let t_prev = t - h;
    let t_next = t + h;
    crate::flows::check_time(t_prev)?;
    crate::flows::check_time(t_next)?;
    let unsupported = || Error::UnsupportedField(field.name().to_string());
    let z_prev = field.exact(z, t, t_prev).ok_or_else(unsupported)?;
    let z_true = field.exact(z, t, t_next).ok_or_else(unsupported)?;
    let history = HistoryPair::new(
        HistoryEntry {
            t: t_prev,
            v: evaluate(field, &z_prev, t_prev)?,
        },
        HistoryEntry {
            t,
            v: evaluate(field, z, t)?,
        },
    );
    // Representable step actually spanned by [t, t_next].
    let h_eff = t_next - t;
    let z_pred = ab2_predict(z, Some(&history), h_eff, Ab2Coefficients::Uniform)?;
    let (z_corr, _) = am2_correct(field, z, &z_pred, t_next, &history.curr.v, h_eff)?;
    Ok(l2_distance(&z_corr, &z_true))
}

/// Endpoints and cost of an inversion followed by a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub z_noise: Vec<f64>,
    pub z_recon: Vec<f64>,
    pub total_nfe: usize,
    pub inversion: SolverRun,
    pub reconstruction: SolverRun,
}

impl RoundTrip {
    pub(crate) fn from_runs(inversion: SolverRun, reconstruction: SolverRun) -> Self {
        Self {
            z_noise: inversion.terminal().to_vec(),
            z_recon: reconstruction.terminal().to_vec(),
            total_nfe: inversion.nfe + reconstruction.nfe,
            inversion,
            reconstruction,
        }
    }

    pub fn recon_error(&self, z_data: &[f64]) -> f64 {
        l2_distance(&self.z_recon, z_data)
    }
}

/// Integrates `z_data` along `grid` (ascending) and then back along the
/// reversed grid with the same scheme.
pub fn invert_then_reconstruct<F: VelocityField + ?Sized>(
    field: &F,
    z_data: &[f64],
    grid: &TimeGrid,
    solver: Solver,
) -> Result<RoundTrip> {
    if grid.direction() != Direction::Inversion {
        return Err(Error::InvalidGrid(
            "inversion grid must ascend in time".into(),
        ));
    }
    let inversion = solve(field, z_data, grid, solver)?;
    let reconstruction = solve(field, inversion.terminal(), &grid.reversed(), solver)?;
    Ok(RoundTrip::from_runs(inversion, reconstruction))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flows::{by_name, Constant, LinearDecay};

    #[test]
    fn abm_first_steps_match_hand_values() {
        // N = 2 on [0, 1]: Heun to 0.625, then predict 0.40625 and correct.
        let decay = LinearDecay::new(1);
        let grid = TimeGrid::uniform(0.0, 1.0, 2).unwrap();
        let run = abm_solve(&decay, &[1.0], &grid, AbmMode::Pece).unwrap();
        assert_eq!(run.trajectory[1].1, vec![0.625]);
        assert_eq!(run.per_step[1].predictor_state, Some(vec![0.40625]));
        assert_eq!(run.terminal(), &[0.3671875]);
        assert_eq!(run.per_step[1].error_estimate, Some(0.40625 - 0.3671875));
        assert_eq!(run.nfe, 5);
    }

    #[test]
    fn abm_nfe_accounting() {
        let decay = LinearDecay::new(1);
        let grid = TimeGrid::uniform(0.0, 1.0, 15).unwrap();
        let pece = abm_solve(&decay, &[1.0], &grid, AbmMode::Pece).unwrap();
        assert_eq!(pece.nfe, 31);
        let pec = abm_solve(&decay, &[1.0], &grid, AbmMode::Pec).unwrap();
        assert_eq!(pec.nfe, 16);
        for n in [2, 5, 15, 40] {
            let g = TimeGrid::uniform(0.0, 1.0, n).unwrap();
            for s in [
                Solver::Euler,
                Solver::Midpoint,
                Solver::Abm(AbmMode::Pece),
                Solver::Abm(AbmMode::Pec),
            ] {
                assert_eq!(
                    solve(&decay, &[1.0], &g, s).unwrap().nfe,
                    s.nfe_for(n),
                    "{s} n={n}"
                );
            }
        }
    }

    #[test]
    fn abm_requires_two_intervals() {
        let grid = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        assert!(matches!(
            abm_solve(&LinearDecay::new(1), &[1.0], &grid, AbmMode::Pece),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn stepper_rejects_attempt_before_init() {
        let s = AbmStepper::new(AbmMode::Pece);
        assert!(matches!(
            s.attempt(&LinearDecay::new(1), &[1.0], 0.0, 0.1),
            Err(Error::MissingHistory)
        ));
        assert!(s.history().is_none());
    }

    #[test]
    fn constant_field_terminal_exact() {
        let c = Constant::new(vec![2.0, -0.5]);
        for n in [2, 3, 15, 64] {
            let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
            for s in [
                Solver::Euler,
                Solver::Midpoint,
                Solver::Abm(AbmMode::Pece),
                Solver::Abm(AbmMode::Pec),
            ] {
                let run = solve(&c, &[1.0, 1.0], &grid, s).unwrap();
                let tol = 4.0 * f64::EPSILON * n as f64 * 3.0;
                assert!((run.terminal()[0] - 3.0).abs() <= tol, "{s} n={n}");
                assert!((run.terminal()[1] - 0.5).abs() <= tol, "{s} n={n}");
                assert_eq!(run.terminal_time(), 1.0);
            }
        }
    }

    #[test]
    fn probe_examples() {
        let c = Constant::new(vec![2.0]);
        assert_eq!(local_truncation_probe(&c, &[1.3], 0.5, 0.1).unwrap(), 0.0);
        let zero = Constant::zero(2);
        assert_eq!(
            local_truncation_probe(&zero, &[1.3, 0.2], 0.5, 0.1).unwrap(),
            0.0
        );

        let decay = LinearDecay::new(1);
        let z = [(-0.5f64).exp()];
        let e1 = local_truncation_probe(&decay, &z, 0.5, 0.1).unwrap();
        let e2 = local_truncation_probe(&decay, &z, 0.5, 0.05).unwrap();
        let ratio = e1 / e2;
        assert!((7.0..9.0).contains(&ratio), "ratio {ratio}");

        let sur = by_name("surrogate", 2).unwrap();
        assert!(matches!(
            local_truncation_probe(sur.as_ref(), &[0.0, 0.0], 0.5, 0.1),
            Err(Error::UnsupportedField(_))
        ));
    }

    #[test]
    fn round_trip_rectified_is_exact() {
        let f = by_name("rectified", 3).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 15).unwrap();
        let z = [0.2, -1.0, 4.0];
        for s in [
            Solver::Euler,
            Solver::Midpoint,
            Solver::Abm(AbmMode::Pece),
            Solver::Abm(AbmMode::Pec),
        ] {
            let rt = invert_then_reconstruct(f.as_ref(), &z, &grid, s).unwrap();
            assert!(rt.recon_error(&z) < 1e-13, "{s}");
            assert_eq!(rt.total_nfe, 2 * s.nfe_for(15));
        }
        assert!(invert_then_reconstruct(f.as_ref(), &z, &grid.reversed(), Solver::Euler).is_err());
    }

    #[test]
    fn solver_names_round_trip() {
        for s in [
            Solver::Euler,
            Solver::Midpoint,
            Solver::Abm(AbmMode::Pece),
            Solver::Abm(AbmMode::Pec),
        ] {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert_eq!("abm".parse::<Solver>().unwrap(), Solver::Abm(AbmMode::Pece));
        assert!("rk4".parse::<Solver>().is_err());
        assert_eq!("PEC".parse::<AbmMode>().unwrap(), AbmMode::Pec);
    }
}
