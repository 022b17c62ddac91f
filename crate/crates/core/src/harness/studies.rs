use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{SlopeWindow, StudyConfig};
use super::output::{loglog_svg, write_atomic, write_csv, write_json};
use super::slope::{fit_loglog_slope, LogLogFit};
use crate::adaptive::{adaptive_abm_solve, adaptive_round_trip, ControllerConfig};
use crate::error::{Error, Result};
use crate::flows::{by_name, ground_truth, VelocityField};
use crate::mgfi::{
    cosine_similarity_map, masked_blend, similarity_to_text, threshold_mask, BinaryMask,
    FeatureTensor, SyntheticPair,
};
use crate::solvers::{invert_then_reconstruct, solve, SolverRun, TimeGrid};
use crate::vecops::l2_distance;

/// Below this every error in a study counts as exact and no fit is attempted.
pub const EXACT_THRESHOLD: f64 = 1e-12;

type Field = Box<dyn VelocityField + Send + Sync>;

/// Slope fit result, or a marker that the scheme was exact at every point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        intercept: f64,
        points_used: usize,
    },
    Exact,
}

impl SlopeFit {
    fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        if points.iter().all(|(_, e)| *e < EXACT_THRESHOLD) {
            return Ok(SlopeFit::Exact);
        }
        let LogLogFit {
            slope,
            intercept,
            points_used,
        } = fit_loglog_slope(points)?;
        Ok(SlopeFit::Fitted {
            slope,
            intercept,
            points_used,
        })
    }

    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Fitted { slope, .. } => Some(*slope),
            SlopeFit::Exact => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub h: f64,
    pub terminal_error: f64,
    pub nfe: usize,
}

/// Terminal error against ground truth for each step count, with the fitted
/// global order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub field: String,
    pub dim: usize,
    pub solver: String,
    pub rows: Vec<ConvergenceRow>,
    pub fit: SlopeFit,
    pub window: SlopeWindow,
    /// Whether the fitted slope lies in `window`; `true` for exact runs.
    pub within_window: bool,
}

fn field_of(cfg: &StudyConfig) -> Result<Field> {
    by_name(&cfg.field, cfg.dim)
}

/// Integrates `0 -> 1` for every `N` in `cfg.steps` and fits the terminal
/// error against `h = 1/N`. Writes `convergence.{csv,json,svg}` when an
/// output directory is configured.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate_steps()?;
    let field = field_of(cfg)?;
    let solver = cfg.solver()?;
    let z0 = cfg.initial_state()?;
    let truth = ground_truth(field.as_ref(), &z0, 0.0, 1.0, cfg.oracle_steps())?;

    let rows = cfg
        .steps
        .par_iter()
        .map(|&n| {
            let grid = TimeGrid::uniform(0.0, 1.0, n)?;
            let run = solve(field.as_ref(), &z0, &grid, solver)?;
            Ok(ConvergenceRow {
                steps: n,
                h: 1.0 / n as f64,
                terminal_error: l2_distance(run.terminal(), &truth),
                nfe: run.nfe,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.terminal_error)).collect();
    let fit = SlopeFit::from_points(&points)?;
    let window = cfg.windows.global(solver);
    let report = ConvergenceReport {
        field: cfg.field.clone(),
        dim: cfg.dim,
        solver: solver.name().to_string(),
        within_window: fit.slope().is_none_or(|s| window.contains(s)),
        rows,
        fit,
        window,
    };

    if let Some(dir) = &cfg.output_dir {
        write_csv(&dir.join("convergence.csv"), &report.rows)?;
        write_json(&dir.join("convergence.json"), &report)?;
        if cfg.plot {
            let title = format!("{} on {} (d = {})", report.solver, report.field, report.dim);
            let svg = loglog_svg(&title, &[(report.solver.as_str(), points)]);
            write_atomic(&dir.join("convergence.svg"), svg.as_bytes())?;
        }
    }
    Ok(report)
}

/// `10 log10(range^2 / MSE)` over the state vector, with `range` the
/// peak-to-peak spread of `reference` (falling back to its largest
/// magnitude, then 1). Infinite when the reconstruction is exact.
pub fn psnr_proxy(reference: &[f64], recon: &[f64]) -> f64 {
    let max = reference.iter().copied().fold(f64::MIN, f64::max);
    let min = reference.iter().copied().fold(f64::MAX, f64::min);
    let mut range = max - min;
    if !(range > 0.0) {
        range = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    }
    if !(range > 0.0) {
        range = 1.0;
    }
    let mse = l2_distance(reference, recon).powi(2) / reference.len().max(1) as f64;
    if mse == 0.0 {
        return f64::INFINITY;
    }
    10.0 * (range * range / mse).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripRow {
    pub steps: usize,
    pub h: f64,
    pub recon_error: f64,
    pub psnr_proxy: f64,
    pub nfe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundTripReport {
    pub field: String,
    pub dim: usize,
    pub solver: String,
    pub rows: Vec<RoundTripRow>,
    /// Fit of reconstruction error against `h`.
    pub fit: SlopeFit,
}

/// Inversion `0 -> 1` then reconstruction `1 -> 0` for every `N`, comparing
/// the reconstruction with the starting state. Writes `roundtrip.{csv,json}`.
pub fn run_roundtrip_study(cfg: &StudyConfig) -> Result<RoundTripReport> {
    cfg.validate_steps()?;
    let field = field_of(cfg)?;
    let solver = cfg.solver()?;
    let z0 = cfg.initial_state()?;

    let rows = cfg
        .steps
        .par_iter()
        .map(|&n| {
            let grid = TimeGrid::uniform(0.0, 1.0, n)?;
            let rt = invert_then_reconstruct(field.as_ref(), &z0, &grid, solver)?;
            Ok(RoundTripRow {
                steps: n,
                h: 1.0 / n as f64,
                recon_error: rt.recon_error(&z0),
                psnr_proxy: psnr_proxy(&z0, &rt.z_recon),
                nfe: rt.total_nfe,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.recon_error)).collect();
    let report = RoundTripReport {
        field: cfg.field.clone(),
        dim: cfg.dim,
        solver: solver.name().to_string(),
        fit: SlopeFit::from_points(&points)?,
        rows,
    };
    if let Some(dir) = &cfg.output_dir {
        write_csv(&dir.join("roundtrip.csv"), &report.rows)?;
        write_json(
            &dir.join("roundtrip.json"),
            &serde_json::json!({
                "field": report.field,
                "dim": report.dim,
                "solver": report.solver,
                "fit": report.fit,
            }),
        )?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveRow {
    pub epsilon: f64,
    /// Evaluations over the whole round trip.
    pub nfe: usize,
    /// Inversion-leg error at `t = 1` against ground truth.
    pub terminal_error: f64,
    /// Accepted steps on the inversion leg.
    pub steps_taken: usize,
    /// Rejected attempts over the round trip.
    pub rejections: usize,
    pub recon_error: f64,
    pub max_step: f64,
    pub min_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveOrderRow {
    pub nominal_steps: usize,
    pub epsilon: f64,
    pub max_step: f64,
    pub terminal_error: f64,
    pub nfe: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveReport {
    pub field: String,
    pub dim: usize,
    pub nominal_steps: usize,
    pub controller: ControllerConfig,
    pub rows: Vec<AdaptiveRow>,
    /// Runs with `nominal_steps` taken from `cfg.order_steps` and the tolerance
    /// scaled as `order_epsilon (N_0 / N)^3`, so the largest accepted step shrinks
    /// with the nominal one while adaptation stays active.
    pub order_rows: Vec<AdaptiveOrderRow>,
    pub order_fit: Option<SlopeFit>,
}

/// Magnitudes of the accepted steps of a run: `(max, min)`.
pub fn accepted_step_range(run: &SolverRun) -> (f64, f64) {
    run.per_step
        .iter()
        .filter(|r| r.accepted)
        .map(|r| r.h.abs())
        .fold((0.0, f64::INFINITY), |(hi, lo), h| (hi.max(h), lo.min(h)))
}

/// Tolerance sweep at `cfg.nominal_steps`, one adaptive round trip per
/// entry of `cfg.epsilon`, plus the scaled order sweep over `cfg.order_steps`
/// (skipped, with `order_fit = None`, when `cfg.order_steps` has fewer than three
/// admissible entries). Writes `adaptive.csv`, `adaptive_order.csv` and
/// `adaptive.json`.
pub fn run_adaptive_study(cfg: &StudyConfig) -> Result<AdaptiveReport> {
    cfg.validate_epsilon()?;
    let field = field_of(cfg)?;
    let z0 = cfg.initial_state()?;
    let base = ControllerConfig {
        mode: cfg.mode,
        ..cfg.adaptive.clone()
    };
    let oracle = cfg
        .oracle_steps()
        .max(cfg.oracle_factor * cfg.nominal_steps);
    let truth = ground_truth(field.as_ref(), &z0, 0.0, 1.0, oracle)?;

    let rows = cfg
        .epsilon
        .par_iter()
        .map(|&epsilon| {
            let ctrl = ControllerConfig {
                epsilon,
                ..base.clone()
            };
            let rt = adaptive_round_trip(field.as_ref(), &z0, &ctrl, cfg.nominal_steps)?;
            let (max_step, min_step) = accepted_step_range(&rt.inversion);
            Ok(AdaptiveRow {
                epsilon,
                nfe: rt.total_nfe,
                terminal_error: l2_distance(rt.inversion.terminal(), &truth),
                steps_taken: rt.inversion.steps_taken(),
                rejections: rt.inversion.rejections() + rt.reconstruction.rejections(),
                recon_error: rt.recon_error(&z0),
                max_step,
                min_step,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let min_nominal = base.warmup_steps + base.cooldown_steps + 1;
    let order_steps: Vec<usize> = cfg
        .order_steps
        .iter()
        .copied()
        .filter(|n| *n >= min_nominal)
        .collect();
    let (order_rows, order_fit) = if order_steps.len() >= 3 {
        let n0 = order_steps[0] as f64;
        let eps_ref = cfg.order_epsilon;
        let order_rows = order_steps
            .par_iter()
            .map(|&n| {
                let epsilon = eps_ref * (n0 / n as f64).powi(3);
                let ctrl = ControllerConfig {
                    epsilon,
                    ..base.clone()
                };
                let run = adaptive_abm_solve(field.as_ref(), &z0, 0.0, 1.0, &ctrl, n)?;
                Ok(AdaptiveOrderRow {
                    nominal_steps: n,
                    epsilon,
                    max_step: accepted_step_range(&run).0,
                    terminal_error: l2_distance(run.terminal(), &truth),
                    nfe: run.nfe,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let points: Vec<(f64, f64)> = order_rows
            .iter()
            .map(|r| (r.max_step, r.terminal_error))
            .collect();
        let fit = SlopeFit::from_points(&points)?;
        (order_rows, Some(fit))
    } else {
        (Vec::new(), None)
    };

    let report = AdaptiveReport {
        field: cfg.field.clone(),
        dim: cfg.dim,
        nominal_steps: cfg.nominal_steps,
        controller: base,
        rows,
        order_rows,
        order_fit,
    };
    if let Some(dir) = &cfg.output_dir {
        write_csv(&dir.join("adaptive.csv"), &report.rows)?;
        if !report.order_rows.is_empty() {
            write_csv(&dir.join("adaptive_order.csv"), &report.order_rows)?;
        }
        write_json(&dir.join("adaptive.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    /// `perturbation` or `tau`.
    pub sweep: &'static str,
    pub value: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgfiReport {
    pub mask: BinaryMask,
    pub blended: FeatureTensor,
    pub density_rows: Vec<DensityRow>,
}

/// Builds seeded synthetic feature pairs for two consecutive timesteps,
/// masks on the first and blends the second. Also sweeps the perturbation
/// (at `cfg.tau`) and the threshold (at the base perturbation) and records
/// mask densities. Writes the four input tensors, `similarity.txt`,
/// `mask.txt`, `blended.txt`, `mask_density.csv` and `mgfi.json`.
pub fn run_mgfi_demo(cfg: &StudyConfig) -> Result<MgfiReport> {
    let m = &cfg.mgfi;
    if !(-1.0..=1.0).contains(&cfg.tau) {
        return Err(Error::Config(format!(
            "tau must lie in [-1, 1], got {}",
            cfg.tau
        )));
    }
    let curr = SyntheticPair::generate(m.positions, m.channels, m.perturbation, cfg.seed)?;
    let next = SyntheticPair::generate(
        m.positions,
        m.channels,
        m.perturbation,
        cfg.seed.wrapping_add(1),
    )?;
    let sim = cosine_similarity_map(&curr.inversion, &curr.sampling)?;
    let mask = threshold_mask(&sim, cfg.tau);
    let blended = masked_blend(&mask, &next.inversion, &next.sampling)?;

    let mut density_rows = Vec::new();
    for &p in &m.perturbation_sweep {
        let pair = SyntheticPair::generate(m.positions, m.channels, p, cfg.seed)?;
        let s = cosine_similarity_map(&pair.inversion, &pair.sampling)?;
        density_rows.push(DensityRow {
            sweep: "perturbation",
            value: p,
            density: threshold_mask(&s, cfg.tau).density(),
        });
    }
    for &tau in &m.tau_sweep {
        density_rows.push(DensityRow {
            sweep: "tau",
            value: tau,
            density: threshold_mask(&sim, tau).density(),
        });
    }

    if let Some(dir) = &cfg.output_dir {
        write_tensor(&dir.join("inv_curr.txt"), &curr.inversion)?;
        write_tensor(&dir.join("smp_curr.txt"), &curr.sampling)?;
        write_tensor(&dir.join("inv_next.txt"), &next.inversion)?;
        write_tensor(&dir.join("smp_next.txt"), &next.sampling)?;
        write_tensor(&dir.join("blended.txt"), &blended)?;
        write_atomic(
            &dir.join("similarity.txt"),
            similarity_to_text(&sim).as_bytes(),
        )?;
        write_atomic(&dir.join("mask.txt"), mask.to_text().as_bytes())?;
        write_csv(&dir.join("mask_density.csv"), &density_rows)?;
        write_json(
            &dir.join("mgfi.json"),
            &serde_json::json!({
                "positions": m.positions,
                "channels": m.channels,
                "perturbation": m.perturbation,
                "tau": cfg.tau,
                "seed": cfg.seed,
                "density": mask.density(),
            }),
        )?;
    }
    Ok(MgfiReport {
        mask,
        blended,
        density_rows,
    })
}

fn write_tensor(path: &Path, t: &FeatureTensor) -> Result<()> {
    write_atomic(path, t.to_text().as_bytes())
}
