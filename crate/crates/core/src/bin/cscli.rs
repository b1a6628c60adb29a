use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cs_sgld::harness::config::{ExperimentConfig, ExperimentKind};
use cs_sgld::harness::{output_dir_for, replot, run_experiment};

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Kind {
    Recover,
    Compare,
    PhaseTransition,
    Validate,
    ChainLab,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Recover => ExperimentKind::Recover,
            Kind::Compare => ExperimentKind::Compare,
            Kind::PhaseTransition => ExperimentKind::PhaseTransition,
            Kind::Validate => ExperimentKind::Validate,
            Kind::ChainLab => ExperimentKind::ChainLab,
        }
    }
}

/// Compressed-sensing recovery with constrained Langevin dynamics.
#[derive(Debug, Parser)]
#[command(name = "cscli", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only regenerate SVG plots from the CSVs already in the output directory.
    #[arg(long)]
    replot: bool,
    /// Override a config field, e.g. `--set sampler.beta=100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let kind = ExperimentKind::from(cli.kind);
    let result = ExperimentConfig::load(&cli.config, &cli.set).and_then(|cfg| {
        let dir = output_dir_for(&cfg, kind, cli.out.as_deref());
        if cli.replot {
            replot(kind, &dir)?;
        } else {
            run_experiment(kind, &cfg, &dir)?;
        }
        Ok(dir)
    });
    match result {
        Ok(dir) => {
            println!("{} finished; outputs in {}", kind.name(), dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
