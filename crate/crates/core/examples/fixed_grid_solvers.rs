// Global convergence order of Euler, midpoint and both ABM modes on the
// nonlinear surrogate field.

use abm_flow::flows::{by_name, reference_solve};
use abm_flow::harness::fit_loglog_slope;
use abm_flow::solvers::{solve, AbmMode, Solver, TimeGrid};

pub const STEPS: [usize; 4] = [40, 80, 160, 320];

/// Fitted slope and the NFE at the finest grid, per solver.
pub fn run() -> abm_flow::Result<Vec<(Solver, f64, usize)>> {
    let field = by_name("surrogate", 4)?;
    let z0 = [0.7, 0.4, 0.1, -0.2];
    let truth = reference_solve(field.as_ref(), &z0, 0.0, 1.0, 320_000)?;
    let solvers = [
        Solver::Euler,
        Solver::Midpoint,
        Solver::Abm(AbmMode::Pece),
        Solver::Abm(AbmMode::Pec),
    ];
    let mut out = Vec::new();
    for solver in solvers {
        let mut points = Vec::new();
        let mut nfe = 0;
        for n in STEPS {
            let run = solve(
                field.as_ref(),
                &z0,
                &TimeGrid::uniform(0.0, 1.0, n)?,
                solver,
            )?;
            points.push((
                1.0 / n as f64,
                abm_flow::l2_distance(run.terminal(), &truth),
            ));
            nfe = run.nfe;
        }
        out.push((solver, fit_loglog_slope(&points)?.slope, nfe));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    for (solver, slope, nfe) in run()? {
        println!("{solver:<9} slope {slope:.3}  nfe at N=320: {nfe}");
    }
    Ok(())
}
