//! Command-line entry point.
//!
//! Exit codes: 0 success, 2 validation/configuration error, 3 runtime
//! stage failure.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use pathbin::dataset;
use pathbin::pipeline;
use pathbin::types::ScenarioConfig;
use pathbin::Error;

#[derive(Parser)]
#[command(
    name = "pathbin",
    version,
    about = "mmWave ground-to-air channel prediction under blockage"
)]
struct Cli {
    /// Scenario configuration file (key = value); defaults used if absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Externally generated trajectory dataset (CSV or JSON); skips the
    /// simulate stage.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads for stage-internal parallelism (0 = all cores).
    /// Outputs are independent of this setting.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Reserved; the default pipeline is deterministic and noise-free.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic trajectory dataset.
    Simulate,
    /// Arrange MPCs into path bins; write bins, events, and Markov trace.
    Bin,
    /// Forecast per-bin channel parameters through the blockage window.
    Forecast,
    /// Predict path-bin deaths by average distance to the LOS reference.
    Deaths {
        /// Reference bin id; defaults to the bin with maximum mean gain.
        #[arg(long)]
        reference_bin: Option<u32>,
    },
    /// Run the blockage experiment and write metrics.
    Evaluate,
    /// Run all stages and emit the full artifact set.
    Pipeline,
    /// Wall-clock scaling of binning/forecasting over N,M sweep points,
    /// e.g. --point 50,4 --point 100,8.
    Bench {
        #[arg(long = "point", value_parser = parse_point, required = true)]
        points: Vec<(u32, u32)>,
    },
}

fn parse_point(s: &str) -> Result<(u32, u32), String> {
    let (n, m) = s
        .split_once(',')
        .ok_or_else(|| format!("expected N,M, got {s}"))?;
    Ok((
        n.trim().parse().map_err(|e| format!("bad N: {e}"))?,
        m.trim().parse().map_err(|e| format!("bad M: {e}"))?,
    ))
}

fn load_config(path: Option<&PathBuf>) -> Result<ScenarioConfig, Error> {
    match path {
        Some(p) => dataset::read_config(p),
        None => {
            let config = ScenarioConfig::default();
            config.validate()?;
            Ok(config)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let config = load_config(cli.config.as_ref())?;
    let input = cli.input.as_deref();
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Simulate => {
            let path = pipeline::cmd_simulate(&config, out)?;
            println!("wrote {}", path.display());
        }
        Command::Bin => pipeline::cmd_bin(&config, input, out)?,
        Command::Forecast => pipeline::cmd_forecast(&config, input, out)?,
        Command::Deaths { reference_bin } => {
            pipeline::cmd_deaths(&config, input, *reference_bin, out)?
        }
        Command::Evaluate => pipeline::cmd_evaluate(&config, input, out)?,
        Command::Pipeline => {
            let manifest = pipeline::cmd_pipeline(&config, input, out)?;
            println!(
                "pipeline done: {} outputs in {}",
                manifest.outputs.len(),
                out.display()
            );
        }
        Command::Bench { points } => pipeline::cmd_bench(points, out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        // Parallelism only affects wall clock, never output bytes.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::InvalidConfig(_) | Error::Parse(_) | Error::Toml(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
