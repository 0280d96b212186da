use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use hopdeq_cli::commands::{run_compare, run_eval, run_sim, run_trace, run_train};
use hopdeq_cli::config::ExperimentConfig;
use hopdeq_cli::metrics::format_table;
use hopdeq_cli::{classify, ExitCategory};

#[derive(Parser)]
#[command(name = "hopdeq", version, about = "Train and evaluate Hopfield deep equilibrium models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Config overrides as --key=value.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes checkpoint.hopdeq and train_log.csv.
    Train(Common),
    /// Evaluate a checkpoint; writes metrics.csv.
    Eval(Common),
    /// Write per-iteration residual traces for test samples.
    Trace(Common),
    /// Simulate synchronous updates and count 2-cycles.
    Sim(Common),
    /// Train and evaluate the variant matrix and print a comparison table.
    Compare {
        /// Use the published presets and check against reference values.
        #[arg(long)]
        full: bool,
        #[command(flatten)]
        common: Common,
    },
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(c.config.as_deref(), &c.overrides)?;
    if cfg.threads > 0 {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let cfg = load(&c)?;
            let out = run_train(&cfg)?;
            println!("checkpoint written to {}", out.checkpoint.display());
        }
        Command::Eval(c) => {
            let reports = run_eval(&load(&c)?)?;
            print!("{}", format_table(&reports));
        }
        Command::Trace(c) => {
            let path = run_trace(&load(&c)?)?;
            println!("trace written to {}", path.display());
        }
        Command::Sim(c) => {
            let r = run_sim(&load(&c)?)?;
            println!("instances                      {}", r.instances);
            println!("sync converged from zero       {}", r.sync_converged);
            println!("sync 2-cycles from zero        {}", r.sync_two_cycles);
            println!("sync 2-cycles from eo init     {}", r.eo_init_two_cycles);
            println!("fused converged                {}", r.fused_converged);
            println!("cycles resolved by fused       {}", r.fused_resolved_cycles);
            println!("constructed instance cycles    {}", r.constructed_two_cycle);
            println!("constructed cycles, eo init    {}", r.constructed_eo_init_two_cycle);
        }
        Command::Compare { full, common } => {
            run_compare(&load(&common)?, full)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCategory::Config.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify(&e).code())
        }
    }
}
