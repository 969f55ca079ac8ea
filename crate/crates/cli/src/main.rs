use anyhow::{bail, Context};
use clap::Parser;
use gspm_core::harness::{self, Experiment, ExperimentConfig, ExperimentKind};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one experiment described by a JSON config.
#[derive(Debug, Parser)]
#[command(name = "gspm2", version, about)]
struct Cli {
    /// converge-time, converge-space, converge-2d, stability, micromag or solve
    kind: ExperimentKind,

    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Use the full-scale grid of a micromag config.
    #[arg(long)]
    full_scale: bool,

    #[arg(long, default_value = "csv,json,vtk", value_parser = harness::parse_formats)]
    formats: std::collections::BTreeSet<harness::Format>,
}

/// Failure class, mapped onto the process exit code.
enum Failure {
    Config(anyhow::Error),
    BlowUp(anyhow::Error),
    Other(anyhow::Error),
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if cfg.kind() != cli.kind {
        bail!(
            "{} describes a '{}' experiment, not '{}'",
            cli.config.display(),
            cfg.kind(),
            cli.kind
        );
    }
    if cli.full_scale {
        match &mut cfg.experiment {
            Experiment::Micromag(m) => m.full_scale = true,
            _ => log::warn!("--full-scale only affects micromag runs; ignored"),
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load(cli).map_err(Failure::Config)?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.kind().name()));

    log::info!("running {} ({})", cfg.kind(), cli.config.display());
    let record = harness::run(&cfg).map_err(|e| {
        if e.is_blow_up() {
            Failure::BlowUp(e.into())
        } else {
            Failure::Other(anyhow::Error::from(e).context("run failed"))
        }
    })?;
    let written = harness::emit(&record, &out, &cli.formats)
        .context("writing results")
        .map_err(Failure::Other)?;
    for path in &written {
        log::info!("wrote {}", path.display());
    }
    summarize(&record);
    Ok(())
}

fn summarize(record: &harness::RunRecord) {
    use harness::Payload;
    match &record.payload {
        Payload::Convergence(r) => {
            for p in &r.points {
                println!(
                    "{} = {:.4e}  inf {:.4e}  l2 {:.4e}",
                    r.variable, p.step, p.error_inf, p.error_l2
                );
            }
            println!("order: inf {:.3}  l2 {:.3}", r.order_inf, r.order_l2);
        }
        Payload::Stability(r) => {
            for row in &r.rows {
                println!(
                    "h = {:.4e}: stable {:.4e}, unstable {:.4e}",
                    row.h, row.dt_stable, row.dt_unstable
                );
            }
        }
        Payload::Micromag(m) => println!(
            "{} steps, energy {:.6e} -> {:.6e}",
            m.steps,
            m.initial_energy.total(),
            m.final_energy.total()
        ),
        Payload::Solve(s) => println!(
            "{} steps, energy {:.6e} -> {:.6e}",
            s.steps, s.initial_energy, s.final_energy
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::BlowUp(e)) => {
            eprintln!("numerical blow-up: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
