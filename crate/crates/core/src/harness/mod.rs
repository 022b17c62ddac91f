//! Study runners behind the `abm` binary: configuration, slope fitting,
//! report writers and the four studies.

mod config;
mod output;
mod slope;
mod studies;

pub use config::{MgfiConfig, Overrides, SlopeWindow, SlopeWindows, StudyConfig, CONFIG_VERSION};
pub use output::{csv_string, loglog_svg, write_atomic, write_csv, write_json};
pub use slope::{fit_loglog_slope, LogLogFit, FIT_ERROR_FLOOR};
pub use studies::{
    accepted_step_range, psnr_proxy, run_adaptive_study, run_convergence_study, run_mgfi_demo,
    run_roundtrip_study, AdaptiveOrderRow, AdaptiveReport, AdaptiveRow, ConvergenceReport,
    ConvergenceRow, DensityRow, MgfiReport, RoundTripReport, RoundTripRow, SlopeFit,
    EXACT_THRESHOLD,
};
