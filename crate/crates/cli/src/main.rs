use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prospect_core::data::{make_synthetic, write_csv, CsvSchema, SyntheticSpec};
use prospect_core::Task;
use prospect_cli::config::ExperimentConfig;
use prospect_cli::runner::{build_objective, load_dataset, run_experiment, solve_reference, write_outputs};
use prospect_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "prospect", version, about = "Spectral risk optimizer benchmarks")]
struct Cli {
    /// Added to every configured seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (optimizer, seed) pair and write metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write an SVG plot of suboptimality against passes.
        #[arg(long)]
        plot: bool,
    },
    /// Solve for the reference minimizer only and print it as JSON.
    SolveRef {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic dataset as CSV.
    MakeData {
        #[arg(long, default_value = "regression")]
        task: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        /// Number of groups in a `group` column; 0 for none.
        #[arg(long, default_value_t = 0)]
        groups: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, plot } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let output = run_experiment(&cfg, cli.seed_offset)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            write_outputs(&output, &dir, plot)?;
            let diverged = output.runs.iter().filter(|r| r.record.status.tag() == "diverged").count();
            eprintln!(
                "{} runs written to {} (F* = {:.6e}, {diverged} diverged)",
                output.runs.len(),
                dir.display(),
                output.reference.f_star
            );
            for run in output.runs.iter().filter(|r| r.record.status.tag() == "diverged") {
                eprintln!("  diverged: {} seed {}", run.label, run.seed);
            }
        }
        Command::SolveRef { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let dataset = load_dataset(&cfg.dataset)?;
            let obj = build_objective(&cfg, &dataset)?;
            let reference = solve_reference(&cfg, &obj)?;
            println!("{}", serde_json::to_string_pretty(&reference).expect("reference serializes"));
        }
        Command::MakeData { task, n, d, seed, noise, groups, out } => {
            let task = Task::from_tag(&task).map_err(|e| CliError::Config(e.to_string()))?;
            let mut spec = SyntheticSpec::new(task, n, d, seed);
            spec.noise = noise;
            spec.groups = groups;
            let dataset = make_synthetic(&spec).map_err(|e| CliError::Config(e.to_string()))?;
            let mut schema = CsvSchema::new(task);
            if groups > 0 {
                schema.group_column = Some("group".into());
            }
            write_csv(&dataset, &out, &schema).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
