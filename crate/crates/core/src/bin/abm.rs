use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use abm_flow::harness::{
    run_adaptive_study, run_convergence_study, run_mgfi_demo, run_roundtrip_study, Overrides,
    SlopeFit, StudyConfig,
};
use abm_flow::solvers::AbmMode;
use clap::{Args, Parser, Subcommand};

/// Predictor-corrector flow integration studies.
#[derive(Parser)]
#[command(name = "abm", version)]
struct Cli {
    /// TOML study config; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Terminal error against step count, with the fitted order.
    Convergence(Flags),
    /// Inversion then reconstruction error against step count.
    Roundtrip(Flags),
    /// Adaptive round trips over a tolerance sweep.
    Adaptive(Flags),
    /// Similarity mask and blended features for synthetic tensors.
    Mgfi(Flags),
}

#[derive(Args)]
struct Flags {
    /// Velocity field: constant, zero, rectified, decay, rotation, sin, surrogate.
    #[arg(long)]
    field: Option<String>,
    /// State dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// euler, midpoint, abm, abm-pece or abm-pec.
    #[arg(long)]
    solver: Option<String>,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    /// Comma-separated adaptive tolerances.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// pece or pec.
    #[arg(long)]
    mode: Option<AbmMode>,
    /// Mask threshold.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            field: f.field,
            dim: f.dim,
            solver: f.solver,
            steps: f.steps,
            epsilon: f.epsilon,
            mode: f.mode,
            tau: f.tau,
            seed: f.seed,
            out: f.out,
        }
    }
}

fn fit_text(fit: &SlopeFit) -> String {
    match fit.slope() {
        Some(s) => format!("slope {s:.4}"),
        None => "exact".to_string(),
    }
}

fn run(cli: Cli) -> abm_flow::Result<String> {
    let mut out = String::new();
    let mut cfg = match &cli.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    let (command, flags) = match cli.command {
        Command::Convergence(f) => ("convergence", f),
        Command::Roundtrip(f) => ("roundtrip", f),
        Command::Adaptive(f) => ("adaptive", f),
        Command::Mgfi(f) => ("mgfi", f),
    };
    cfg.apply(flags.into());

    match command {
        "convergence" => {
            let r = run_convergence_study(&cfg)?;
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "N={:<5} err={:.6e} nfe={}",
                    row.steps, row.terminal_error, row.nfe
                );
            }
            let _ = writeln!(
                out,
                "{} on {}: {} (window [{}, {}], {})",
                r.solver,
                r.field,
                fit_text(&r.fit),
                r.window.lo,
                r.window.hi,
                if r.within_window { "inside" } else { "outside" }
            );
        }
        "roundtrip" => {
            let r = run_roundtrip_study(&cfg)?;
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "N={:<5} recon_err={:.6e} psnr={:.2} nfe={}",
                    row.steps, row.recon_error, row.psnr_proxy, row.nfe
                );
            }
            let _ = writeln!(out, "{} on {}: {}", r.solver, r.field, fit_text(&r.fit));
        }
        "adaptive" => {
            let r = run_adaptive_study(&cfg)?;
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "eps={:<8e} nfe={:<4} err={:.6e} steps={} rejections={}",
                    row.epsilon, row.nfe, row.terminal_error, row.steps_taken, row.rejections
                );
            }
            if let Some(fit) = &r.order_fit {
                let _ = writeln!(out, "order sweep on {}: {}", r.field, fit_text(fit));
            }
        }
        _ => {
            let r = run_mgfi_demo(&cfg)?;
            let _ = writeln!(
                out,
                "mask density {:.4} at tau {}",
                r.mask.density(),
                cfg.tau
            );
            for row in &r.density_rows {
                let _ = writeln!(
                    out,
                    "{}={} density={:.4}",
                    row.sweep, row.value, row.density
                );
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            eprintln!(
                "{}",
                text.lines().next().unwrap_or("error: invalid arguments")
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(out) => {
            // a closed pipe downstream is not our failure
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
