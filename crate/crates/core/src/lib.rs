//! Second-order Adams-Bashforth-Moulton integration for flow ODEs.
//!
//! - [`flows`]: analytic velocity fields with closed-form or fine-grid ground truth.
//! - [`solvers`]: Euler and midpoint baselines and the fixed-grid ABM
//!   predictor-corrector, with exact evaluation counting.
//! - [`adaptive`]: predictor-corrector error control wrapped around ABM.
//! - [`mgfi`]: cosine-similarity masks and mask-guided feature blending.
//! - [`harness`]: convergence, round-trip, adaptive and masking studies with
//!   CSV/JSON/SVG reports.

pub mod adaptive;
pub mod error;
pub mod flows;
pub mod harness;
pub mod mgfi;
pub mod solvers;
mod vecops;

pub use error::{Error, Result};
pub use vecops::{l2_distance, l2_norm};
