use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use abm_flow::harness::{
    run_adaptive_study, run_convergence_study, run_mgfi_demo, run_roundtrip_study, SlopeFit,
    StudyConfig,
};
use abm_flow::mgfi::BinaryMask;
use abm_flow::solvers::{AbmMode, Solver};

fn abm() -> Command {
    Command::new(env!("CARGO_BIN_EXE_abm"))
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn report_nfe_is_the_solver_count() {
    let cfg = StudyConfig {
        field: "surrogate".into(),
        dim: 3,
        solver: "abm".into(),
        mode: AbmMode::Pec,
        ..Default::default()
    };
    let report = run_convergence_study(&cfg).unwrap();
    for row in &report.rows {
        assert_eq!(row.nfe, Solver::Abm(AbmMode::Pec).nfe_for(row.steps));
    }
    let rt = run_roundtrip_study(&cfg).unwrap();
    for row in &rt.rows {
        assert_eq!(row.nfe, 2 * Solver::Abm(AbmMode::Pec).nfe_for(row.steps));
    }
}

#[test]
fn constant_field_reports_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = StudyConfig {
        field: "constant".into(),
        dim: 3,
        output_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let report = run_convergence_study(&cfg).unwrap();
    assert_eq!(report.fit, SlopeFit::Exact);
    assert!(report.within_window);
    let json = fs::read_to_string(dir.path().join("convergence.json")).unwrap();
    assert!(json.contains("\"status\": \"exact\""));
}

#[test]
fn euler_slope_on_decay() {
    let cfg = StudyConfig {
        solver: "euler".into(),
        ..Default::default()
    };
    let report = run_convergence_study(&cfg).unwrap();
    let slope = report.fit.slope().unwrap();
    assert!((0.9..=1.1).contains(&slope), "{slope}");
    assert!(report.within_window);
}

#[test]
fn adaptive_study_defaults() {
    let report = run_adaptive_study(&StudyConfig::default()).unwrap();
    let first = &report.rows[0];
    assert_eq!(first.epsilon, 0.1);
    assert!((40..=60).contains(&first.nfe), "{}", first.nfe);
    assert!(report
        .rows
        .windows(2)
        .all(|w| w[1].terminal_error <= w[0].terminal_error));

    // A constant field saturates at h_max: 5 + 5 frozen steps plus
    // ceil((1 - 10/15) / (4/15)) = 2 in between.
    let cfg = StudyConfig {
        field: "constant".into(),
        ..Default::default()
    };
    for row in run_adaptive_study(&cfg).unwrap().rows {
        assert_eq!(row.steps_taken, 12);
        assert!((row.max_step - 4.0 / 15.0).abs() < 1e-12);
    }
}

#[test]
fn mgfi_demo_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = StudyConfig {
        output_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    cfg.mgfi.perturbation = 0.0;
    let report = run_mgfi_demo(&cfg).unwrap();
    assert_eq!(report.mask.density(), 1.0);
    let text = fs::read_to_string(dir.path().join("mask.txt")).unwrap();
    assert_eq!(text, format!("{}\n", "1".repeat(64)));
    let parsed = BinaryMask::from_text(&text, cfg.tau).unwrap();
    assert_eq!(parsed, report.mask);

    let by = |kind: &str| -> Vec<f64> {
        report
            .density_rows
            .iter()
            .filter(|r| r.sweep == kind)
            .map(|r| r.density)
            .collect()
    };
    let pert = by("perturbation");
    assert_eq!(pert.len(), cfg.mgfi.perturbation_sweep.len());
    assert!(pert.windows(2).all(|w| w[1] <= w[0]), "{pert:?}");
    assert!(pert.last().unwrap() < &1.0);
    let tau = by("tau");
    assert!(tau.windows(2).all(|w| w[1] <= w[0]), "{tau:?}");
}

#[test]
fn reruns_are_byte_identical() {
    let cfgs = [
        StudyConfig {
            field: "surrogate".into(),
            dim: 4,
            seed: 11,
            ..Default::default()
        },
        StudyConfig {
            field: "rotation".into(),
            dim: 2,
            solver: "midpoint".into(),
            ..Default::default()
        },
    ];
    for base in cfgs {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for dir in [&a, &b] {
            let cfg = StudyConfig {
                output_dir: Some(dir.path().to_path_buf()),
                ..base.clone()
            };
            run_convergence_study(&cfg).unwrap();
            run_roundtrip_study(&cfg).unwrap();
            run_adaptive_study(&cfg).unwrap();
            run_mgfi_demo(&cfg).unwrap();
        }
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert_eq!(fa.len(), 17);
        assert_eq!(fa, fb);
    }
}

#[test]
fn cli_runs_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["convergence", "roundtrip", "adaptive", "mgfi"] {
        let out = abm().args([sub, "--out"]).arg(dir.path()).output().unwrap();
        assert!(
            out.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stdout.is_empty());
    }
    let names: Vec<_> = files(dir.path()).into_keys().collect();
    for want in [
        "convergence.csv",
        "roundtrip.csv",
        "adaptive.csv",
        "mask.txt",
        "blended.txt",
    ] {
        assert!(
            names.iter().any(|n| n == want),
            "{want} missing from {names:?}"
        );
    }
    assert!(!names.iter().any(|n| n.ends_with(".tmp")));
}

#[test]
fn cli_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("study.toml");
    fs::write(
        &cfg_path,
        "field = \"surrogate\"\ndim = 2\nsolver = \"euler\"\nsteps = [10, 20, 40]\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = abm()
        .arg("convergence")
        .arg("--config")
        .arg(&cfg_path)
        .args([
            "--solver", "abm", "--mode", "pec", "--steps", "20,40,80", "--out",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("convergence.csv")).unwrap();
    let rows: Vec<_> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("20,"));
    // PEC on 20 steps costs 21 evaluations
    assert!(rows[0].ends_with(",21"));
    let json = fs::read_to_string(out_dir.join("convergence.json")).unwrap();
    assert!(json.contains("\"field\": \"surrogate\""));
    assert!(json.contains("\"solver\": \"abm-pec\""));
}

#[test]
fn cli_errors_are_one_line_and_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    fs::write(&bad_cfg, "stepz = [1]\n").unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["convergence".into(), "--field".into(), "nope".into()],
        vec!["convergence".into(), "--steps".into(), "3,8".into()],
        vec!["convergence".into(), "--steps".into(), "20,10".into()],
        vec!["convergence".into(), "--solver".into(), "rk45".into()],
        vec!["adaptive".into(), "--epsilon".into(), "-1".into()],
        vec!["mgfi".into(), "--tau".into(), "1.5".into()],
        vec!["convergence".into(), "--mode".into(), "pcec".into()],
        vec!["convergence".into(), "--bogus".into()],
        vec![
            "convergence".into(),
            "--config".into(),
            bad_cfg.display().to_string(),
        ],
        vec![
            "convergence".into(),
            "--config".into(),
            "/nonexistent/x.toml".into(),
        ],
        vec!["rotate".into()],
    ];
    for args in cases {
        let out = abm().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
        assert!(err.starts_with("error:"), "{args:?}: {err}");
    }
}
