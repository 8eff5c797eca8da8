use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use microcavity::output::Table;
use microcavity::scenario;
use microcavity::{Error, Result, ScenarioConfig};

/// Cavity-QED atom detection simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Scenario configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of drops for the selected run.
    #[arg(long, global = true)]
    drops: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (does not change results).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling rates, cooperativity and mode volumes.
    Params,
    /// Time-of-flight signal of the falling cloud.
    Tof,
    /// Synthetic detuning scan, fitted back by default.
    Scan,
    /// Variance-to-mean ratio of the reflected counts.
    Noise,
    /// Cavity emission after the excitation beam turns on.
    Pulse,
    /// Fit a scan table.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
    /// Atom-number calibration against the target peak N_eff.
    Calibrate,
    /// Configuration commands.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the effective configuration as TOML.
    Dump,
}

fn load(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(drops) = cli.drops {
        match cli.command {
            Command::Tof => cfg.tof.drops = drops,
            Command::Scan => cfg.scan.drops = drops,
            Command::Noise => cfg.noise.drops = drops,
            Command::Pulse => cfg.pulse.drops = drops,
            _ => {}
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn save(table: &Table, cfg: &ScenarioConfig) -> Result<()> {
    let path = table.save(&cfg.out)?;
    info!("wrote {}", path.display());
    println!("{}", path.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("threads", e.to_string()))?;
    }
    let cfg = load(cli)?;
    match &cli.command {
        Command::Params => {
            let report = scenario::run_params(&cfg)?;
            print!("{}", report.render());
            save(&report.table(&cfg), &cfg)
        }
        Command::Tof => save(&scenario::run_tof(&cfg)?.table(&cfg), &cfg),
        Command::Scan => save(&scenario::run_scan(&cfg)?.table(&cfg), &cfg),
        Command::Noise => save(&scenario::run_noise(&cfg)?.table(&cfg), &cfg),
        Command::Pulse => save(&scenario::run_pulse(&cfg)?.table(&cfg), &cfg),
        Command::Fit { input } => {
            let data = scenario::scan_dataset_from_table(&cfg, &Table::load(input)?)?;
            let text = scenario::run_fit(&cfg, &data)?.render(&cfg);
            std::fs::create_dir_all(&cfg.out)?;
            let path = cfg.out.join("fit.toml");
            std::fs::write(&path, &text)?;
            print!("{text}");
            info!("wrote {}", path.display());
            Ok(())
        }
        Command::Calibrate => {
            let cal = scenario::calibrate(&cfg)?;
            save(&scenario::calibration_table(&cfg, &cal), &cfg)
        }
        Command::Config {
            action: ConfigAction::Dump,
        } => {
            print!("{}", cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
