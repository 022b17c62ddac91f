//! Runs every example through its `run` function and checks the headline
//! number it prints.

mod field_catalog {
    include!("../examples/field_catalog.rs");
}
mod fixed_grid_solvers {
    include!("../examples/fixed_grid_solvers.rs");
}
mod local_error {
    include!("../examples/local_error.rs");
}
mod roundtrip {
    include!("../examples/roundtrip.rs");
}
mod adaptive {
    include!("../examples/adaptive.rs");
}
mod mgfi {
    include!("../examples/mgfi.rs");
}
mod study_config {
    include!("../examples/study_config.rs");
}

use abm_flow::solvers::Solver;

#[test]
fn field_catalog_reference_agrees_with_closed_forms() {
    let rows = field_catalog::run().unwrap();
    assert_eq!(rows.len(), abm_flow::flows::CATALOG.len());
    for (name, v, gap) in rows {
        assert_eq!(v.len(), 2, "{name}");
        if let Some(g) = gap {
            assert!(g < 1e-11, "{name}: {g}");
        }
    }
}

#[test]
fn fixed_grid_solver_orders() {
    for (solver, slope, nfe) in fixed_grid_solvers::run().unwrap() {
        let (lo, hi) = match solver {
            Solver::Euler => (0.9, 1.1),
            _ => (1.8, 2.2),
        };
        assert!((lo..=hi).contains(&slope), "{solver}: {slope}");
        assert_eq!(nfe, solver.nfe_for(320));
    }
}

#[test]
fn local_error_is_third_order() {
    let (_, slope) = local_error::run().unwrap();
    assert!((2.7..=3.3).contains(&slope), "{slope}");
}

#[test]
fn roundtrip_abm_beats_euler_at_equal_cost() {
    for r in roundtrip::run().unwrap() {
        assert_eq!(r.abm_nfe, r.euler_nfe);
        assert!(r.abm_error < r.euler_error, "N={}", r.steps);
    }
}

#[test]
fn adaptive_default_cost() {
    let s = adaptive::run().unwrap();
    assert!((40..=60).contains(&s.total_nfe), "{}", s.total_nfe);
    let h0 = 1.0 / 15.0;
    assert!(s.inversion_steps.iter().all(|h| *h <= 4.0 * h0 + 1e-12));
    assert!((s.inversion_steps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn mgfi_injects_masked_rows() {
    let (density, injected) = mgfi::run().unwrap();
    assert_eq!(injected as f64 / 64.0, density);
}

#[test]
fn study_config_override_applies() {
    let report = study_config::run().unwrap();
    assert_eq!(report.solver, "abm-pece");
    assert_eq!(report.field, "rotation");
    assert_eq!(report.rows.len(), 4);
}
