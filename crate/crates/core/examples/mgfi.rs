// Mask-guided feature blending on seeded synthetic tensors.

use abm_flow::mgfi::{mgfi_apply, SyntheticPair, DEFAULT_TAU};

/// Mask density and the number of blended rows injected from the inversion side.
pub fn run() -> abm_flow::Result<(f64, usize)> {
    let curr = SyntheticPair::generate(64, 16, 2.0, 7)?;
    let next = SyntheticPair::generate(64, 16, 2.0, 8)?;
    let (mask, blended) = mgfi_apply(
        &curr.inversion,
        &curr.sampling,
        &next.inversion,
        &next.sampling,
        DEFAULT_TAU,
    )?;
    let injected = (0..blended.positions())
        .filter(|&p| blended.row(p) == next.inversion.row(p))
        .count();
    Ok((mask.density(), injected))
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    let (density, rows) = run()?;
    println!("mask density {density:.3}; {rows} of 64 rows injected from the inversion side");
    Ok(())
}
