// Driving the harness from a TOML config with a command-line style override.

use abm_flow::harness::{run_convergence_study, ConvergenceReport, Overrides, StudyConfig};

const CONFIG: &str = r#"
field = "rotation"
dim = 2
solver = "midpoint"
steps = [10, 20, 40, 80]
"#;

pub fn run() -> abm_flow::Result<ConvergenceReport> {
    let mut cfg = StudyConfig::from_toml_str(CONFIG)?;
    cfg.apply(Overrides {
        solver: Some("abm".into()),
        ..Default::default()
    });
    run_convergence_study(&cfg)
}

#[allow(dead_code)]
fn main() -> abm_flow::Result<()> {
    let report = run()?;
    for row in &report.rows {
        println!(
            "N={:<3} error {:.3e}  nfe {}",
            row.steps, row.terminal_error, row.nfe
        );
    }
    println!("{} fitted {:?}", report.solver, report.fit.slope());
    Ok(())
}
