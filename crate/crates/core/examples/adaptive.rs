// Adaptive round trip with the default controller: frozen warmup and
// cooldown, steps growing up to four times the nominal size in between.

use abm_flow::adaptive::{adaptive_round_trip, ControllerConfig};
use abm_flow::flows::LinearDecay;

pub struct Summary {
    pub total_nfe: usize,
    pub inversion_steps: Vec<f64>,
    pub recon_error: f64,
}

pub fn run() -> abm_flow::Result<Summary> {
    let decay = LinearDecay::new(2);
    let z0 = [1.0, -0.5];
    let rt = adaptive_round_trip(&decay, &z0, &ControllerConfig::default(), 15)?;
    Ok(Summary {
        total_nfe: rt.total_nfe,
        inversion_steps: rt
            .inversion
            .per_step
            .iter()
            .filter(|r| r.accepted)
            .map(|r| r.h)
            .collect(),
        recon_error: rt.recon_error(&z0),
    })
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    let s = run()?;
    let steps: Vec<String> = s
        .inversion_steps
        .iter()
        .map(|h| format!("{h:.4}"))
        .collect();
    println!("inversion steps: {}", steps.join(" "));
    println!(
        "round trip nfe {}  reconstruction error {:.3e}",
        s.total_nfe, s.recon_error
    );
    Ok(())
}
