use serde::Serialize;

use crate::error::{Error, Result};

/// Errors at or below this are treated as exact and left out of fits.
pub const FIT_ERROR_FLOOR: f64 = 1e-14;

/// Ordinary least-squares line through `(ln h, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    /// Natural log of the fitted error constant.
    pub intercept: f64,
    pub points_used: usize,
}

/// Fits `ln error = slope * ln h + intercept` over the points whose error
/// exceeds [`FIT_ERROR_FLOOR`]. Needs at least three such points.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *e > FIT_ERROR_FLOOR && *h > 0.0 && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if logs.len() < 3 {
        return Err(Error::InsufficientPoints(logs.len()));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(1));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        points_used: logs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_points() {
        let pts: Vec<_> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|h| (*h, h * h))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-9);
        assert!(fit.intercept.abs() < 1e-9);
    }

    #[test]
    fn linear_points_recover_constant() {
        let pts: Vec<_> = [0.3, 0.1, 0.02, 0.001]
            .iter()
            .map(|h| (*h, 3.0 * h))
            .collect();
        let fit = fit_loglog_slope(&pts).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_loglog_slope(&[(0.1, 0.01), (0.05, 0.0025)]),
            Err(Error::InsufficientPoints(2))
        ));
        // exact rows are dropped before counting
        assert!(matches!(
            fit_loglog_slope(&[(0.1, 0.01), (0.05, 0.0025), (0.025, 1e-15)]),
            Err(Error::InsufficientPoints(2))
        ));
        assert!(fit_loglog_slope(&[(0.1, 1e-3), (0.1, 2e-3), (0.1, 3e-3)]).is_err());
    }
}
