use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::ControllerConfig;
use crate::error::{Error, Result};
use crate::mgfi::DEFAULT_TAU;
use crate::solvers::{AbmMode, Solver};

/// Current config schema version.
pub const CONFIG_VERSION: u32 = 1;

/// Closed slope interval a fitted order must fall in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeWindow {
    pub lo: f64,
    pub hi: f64,
}

impl SlopeWindow {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, slope: f64) -> bool {
        (self.lo..=self.hi).contains(&slope)
    }
}

/// Acceptance windows for fitted convergence orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlopeWindows {
    pub first_order: SlopeWindow,
    pub second_order: SlopeWindow,
    pub local_third_order: SlopeWindow,
}

impl Default for SlopeWindows {
    fn default() -> Self {
        Self {
            first_order: SlopeWindow::new(0.9, 1.1),
            second_order: SlopeWindow::new(1.8, 2.2),
            local_third_order: SlopeWindow::new(2.7, 3.3),
        }
    }
}

impl SlopeWindows {
    /// Window for the global order of `solver`.
    pub fn global(&self, solver: Solver) -> SlopeWindow {
        match solver {
            Solver::Euler => self.first_order,
            _ => self.second_order,
        }
    }
}

/// Settings for the masking demo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgfiConfig {
    pub positions: usize,
    pub channels: usize,
    /// Displacement of the sampling-side tensors from the inversion side.
    pub perturbation: f64,
    pub perturbation_sweep: Vec<f64>,
    pub tau_sweep: Vec<f64>,
}

impl Default for MgfiConfig {
    fn default() -> Self {
        Self {
            positions: 64,
            channels: 16,
            perturbation: 2.0,
            perturbation_sweep: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0],
            tau_sweep: vec![0.0, 0.2, 0.9],
        }
    }
}

/// Everything a study needs. Loaded from a TOML file, then overridden from
/// the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub version: u32,
    pub field: String,
    pub dim: usize,
    pub solver: String,
    pub mode: AbmMode,
    /// Step counts `N`, strictly increasing, each at least 4.
    pub steps: Vec<usize>,
    /// Tolerances for the adaptive sweep.
    pub epsilon: Vec<f64>,
    /// Nominal step counts for the adaptive order sweep.
    pub order_steps: Vec<usize>,
    /// Tolerance at the first `order_steps` entry; scaled by `(N_0 / N)^3`
    /// for the others.
    pub order_epsilon: f64,
    pub nominal_steps: usize,
    pub tau: f64,
    pub seed: u64,
    /// Explicit initial state; drawn uniformly from `[-1, 1]^d` with `seed`
    /// when absent.
    pub initial_state: Option<Vec<f64>>,
    /// Reference integrations use `oracle_factor` times the largest step
    /// count in the config, and never fewer than 100 000 RK4 steps.
    pub oracle_factor: usize,
    pub output_dir: Option<PathBuf>,
    pub plot: bool,
    pub adaptive: ControllerConfig,
    pub windows: SlopeWindows,
    pub mgfi: MgfiConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            field: "decay".into(),
            dim: 1,
            solver: "abm".into(),
            mode: AbmMode::Pece,
            steps: vec![10, 20, 40, 80],
            epsilon: vec![1e-1, 1e-2, 1e-3, 1e-4],
            order_steps: vec![20, 40, 80, 160, 320],
            order_epsilon: 1e-3,
            nominal_steps: 15,
            tau: DEFAULT_TAU,
            seed: 0,
            initial_state: None,
            oracle_factor: 1000,
            output_dir: None,
            plot: true,
            adaptive: ControllerConfig::default(),
            windows: SlopeWindows::default(),
            mgfi: MgfiConfig::default(),
        }
    }
}

/// Values supplied on the command line; `None` leaves the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub field: Option<String>,
    pub dim: Option<usize>,
    pub solver: Option<String>,
    pub steps: Option<Vec<usize>>,
    pub epsilon: Option<Vec<f64>>,
    pub mode: Option<AbmMode>,
    pub tau: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl StudyConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("study config always serializes")
    }

    /// Command-line values take precedence over file values.
    pub fn apply(&mut self, o: Overrides) {
        let Overrides {
            field,
            dim,
            solver,
            steps,
            epsilon,
            mode,
            tau,
            seed,
            out,
        } = o;
        if let Some(v) = field {
            self.field = v;
        }
        if let Some(v) = dim {
            self.dim = v;
        }
        if let Some(v) = solver {
            self.solver = v;
        }
        if let Some(v) = steps {
            self.steps = v;
        }
        if let Some(v) = epsilon {
            self.epsilon = v;
        }
        if let Some(v) = mode {
            self.mode = v;
        }
        if let Some(v) = tau {
            self.tau = v;
        }
        if let Some(v) = seed {
            self.seed = v;
        }
        if let Some(v) = out {
            self.output_dir = Some(v);
        }
    }

    /// The configured solver. A bare `abm` picks up `mode`.
    pub fn solver(&self) -> Result<Solver> {
        match self.solver.to_ascii_lowercase().as_str() {
            "abm" => Ok(Solver::Abm(self.mode)),
            other => other.parse(),
        }
    }

    pub fn validate_steps(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Config("steps list is empty".into()));
        }
        if let Some(n) = self.steps.iter().find(|n| **n < 4) {
            return Err(Error::Config(format!(
                "step count {n} is below the minimum of 4"
            )));
        }
        if self.steps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(format!(
                "steps must be strictly increasing, got {:?}",
                self.steps
            )));
        }
        Ok(())
    }

    pub fn validate_epsilon(&self) -> Result<()> {
        if self.epsilon.is_empty() {
            return Err(Error::Config("epsilon list is empty".into()));
        }
        if !(self.order_epsilon > 0.0 && self.order_epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "order_epsilon must be positive, got {}",
                self.order_epsilon
            )));
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("epsilon must be positive, got {e}")));
        }
        Ok(())
    }

    pub fn oracle_steps(&self) -> usize {
        let max_n = self
            .steps
            .iter()
            .chain(&self.order_steps)
            .copied()
            .chain([self.nominal_steps])
            .max()
            .unwrap_or(1);
        (self.oracle_factor * max_n).max(100_000)
    }

    /// Initial state for trajectory studies.
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        match &self.initial_state {
            Some(z) if z.len() != self.dim => Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            }),
            Some(z) => Ok(z.clone()),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok((0..self.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            }
        }
    }
}
