// One-step defect of the ABM update from exact history. Halving `h` cuts
// it by about eight.

use abm_flow::flows::LinearDecay;
use abm_flow::harness::fit_loglog_slope;
use abm_flow::solvers::local_truncation_probe;

pub fn run() -> abm_flow::Result<(Vec<(f64, f64)>, f64)> {
    let decay = LinearDecay::new(1);
    let t: f64 = 0.5;
    let z = [(-t).exp()];
    let mut points = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        points.push((h, local_truncation_probe(&decay, &z, t, h)?));
    }
    let slope = fit_loglog_slope(&points)?.slope;
    Ok((points, slope))
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    let (points, slope) = run()?;
    for (h, e) in points {
        println!("h = {h:<7} defect = {e:.3e}");
    }
    println!("slope {slope:.3}");
    Ok(())
}
