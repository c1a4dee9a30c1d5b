use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pixbound_cli::{commands, resolve_config, CliError, ExperimentConfig};

/// Pixel-wise error quantiles with coverage guarantees for Bayesian denoising.
#[derive(Parser, Debug)]
#[command(name = "pixbound", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; all cores when omitted
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Quantile level, repeatable; replaces the configured list
    #[arg(long = "q", global = true)]
    q: Vec<f64>,

    #[arg(long, global = true, value_parser = ["joint", "separate"])]
    pooling: Option<String>,

    /// Override any configuration key, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Crop clean images and add Gaussian noise
    Corrupt,
    /// Sample calibration posteriors and build quantile tables
    Calibrate,
    /// Sample test posteriors and predict error quantile maps
    Predict,
    /// Coverage, PSNR, SSIM and mutual information of predictions
    Evaluate,
    /// Sampler moments against belief propagation
    BpCompare,
    /// The BP comparison for every thinning factor
    ThinningStudy,
    /// Calibration on the analytic Gaussian-mixture model
    Toy,
}

fn execute(command: Command, cfg: &ExperimentConfig, out: &std::path::Path) -> Result<String, CliError> {
    Ok(match command {
        Command::Corrupt => format!("corrupted {} images", commands::corrupt(cfg, out)?.len()),
        Command::Calibrate => format!("wrote {} quantile tables", commands::calibrate(cfg, out)?.len()),
        Command::Predict => format!("predicted {} images", commands::predict(cfg, out)?.len()),
        Command::Evaluate => format!("evaluated {} images", commands::evaluate(cfg, out)?.len()),
        Command::BpCompare => format!("{} checkpoints", commands::bp_compare(cfg, out)?.len()),
        Command::ThinningStudy => format!("{} checkpoints", commands::thinning_study(cfg, out)?.len()),
        Command::Toy => {
            let reports = commands::toy(cfg, out)?;
            reports
                .iter()
                .map(|r| format!("q={} coverage={:.4}", r.q, r.coverage))
                .collect::<Vec<_>>()
                .join("\n")
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve_config(cli.config.as_deref(), &cli.set, cli.seed, &cli.q, cli.pooling.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n.max(1));
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| execute(cli.command, &cfg, &cli.out_dir)) {
        Ok(summary) => {
            println!("{summary}");
            println!("config_hash={}", cfg.hash());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
