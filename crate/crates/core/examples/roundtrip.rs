// Inversion then reconstruction on the surrogate field, ABM against Euler
// given the same evaluation budget.

use abm_flow::flows::by_name;
use abm_flow::solvers::{invert_then_reconstruct, AbmMode, Solver, TimeGrid};

pub struct Row {
    pub steps: usize,
    pub abm_error: f64,
    pub abm_nfe: usize,
    pub euler_error: f64,
    pub euler_nfe: usize,
}

pub fn run() -> abm_flow::Result<Vec<Row>> {
    let field = by_name("surrogate", 3)?;
    let z0 = [0.8, -0.3, 0.5];
    let mut rows = Vec::new();
    for n in [10, 15, 20] {
        let abm_grid = TimeGrid::uniform(0.0, 1.0, n)?;
        let abm =
            invert_then_reconstruct(field.as_ref(), &z0, &abm_grid, Solver::Abm(AbmMode::Pece))?;
        // PECE spends 2N + 1 evaluations per leg; give Euler the same.
        let euler_grid = TimeGrid::uniform(0.0, 1.0, 2 * n + 1)?;
        let euler = invert_then_reconstruct(field.as_ref(), &z0, &euler_grid, Solver::Euler)?;
        rows.push(Row {
            steps: n,
            abm_error: abm.recon_error(&z0),
            abm_nfe: abm.total_nfe,
            euler_error: euler.recon_error(&z0),
            euler_nfe: euler.total_nfe,
        });
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    for r in run()? {
        println!(
            "N={:<3} abm {:.3e} ({} nfe)   euler {:.3e} ({} nfe)",
            r.steps, r.abm_error, r.abm_nfe, r.euler_error, r.euler_nfe
        );
    }
    Ok(())
}
