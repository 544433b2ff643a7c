use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cafl::allocation::Method;
use cafl::experiment::{run_scenario, ExperimentConfig, SweepAxis};
use cafl::report::fmt_f64;

const DEFAULT_SUBCHANNEL_SWEEP: [usize; 5] = [10, 15, 20, 25, 30];
const DEFAULT_SWEEP_KSE: usize = 10;
const DEFAULT_KSE_SWEEP: [usize; 5] = [3, 6, 9, 12, 15];

/// Sub-channel allocation and participant-count experiments for federated
/// learning over an OFDMA uplink.
///
/// Without --config the built-in scenario is used: 100 devices in a 200 m
/// cell, 20 sub-channels of 180 kHz, 23 dBm transmit power, -174 dBm/Hz
/// noise, 1e6-bit uploads, 1000 trials, seed 1, coalition allocation. Flags
/// override the matching keys of the scenario file.
#[derive(Debug, Parser)]
#[command(name = "cafl", version)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed [scenario default: 1].
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Monte Carlo trials [scenario default: 1000].
    #[arg(long, value_name = "N")]
    trials: Option<usize>,

    /// Sweep axis. Without a value list in the scenario, subchannels sweeps
    /// 10,15,20,25,30 at kse 10 unless the scenario fixes kse, and kse sweeps
    /// 3,6,9,12,15 [scenario default: none].
    #[arg(long, value_name = "AXIS")]
    sweep: Option<SweepAxis>,

    /// Allocation method: coalition, fairness or exhaustive
    /// [scenario default: coalition]. Sweeps always run coalition and fairness.
    #[arg(long, value_name = "METHOD")]
    method: Option<Method>,

    /// Worker threads, 0 for all cores [scenario default: 0].
    #[arg(long, value_name = "N")]
    workers: Option<usize>,

    /// Also run the toy training loop and write trajectory.csv.
    #[arg(long)]
    fl: bool,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

fn build_config(cli: &Cli) -> cafl::Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(method) = cli.method {
        config.method = method;
    }
    if let Some(workers) = cli.workers {
        config.workers = workers;
    }
    if cli.fl {
        config.fl.enabled = true;
    }
    if let Some(axis) = cli.sweep {
        if axis != config.sweep.axis {
            config.sweep.values = match axis {
                SweepAxis::None => Vec::new(),
                SweepAxis::Subchannels => {
                    config.kse.get_or_insert(DEFAULT_SWEEP_KSE);
                    DEFAULT_SUBCHANNEL_SWEEP.to_vec()
                }
                SweepAxis::Kse => DEFAULT_KSE_SWEEP.to_vec(),
            };
        }
        config.sweep.axis = axis;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> cafl::Result<()> {
    let config = build_config(cli)?;
    let output = run_scenario(&config, &cli.out)?;
    println!("method,axis,point,kse,rounds,trials,mean_total_s,std_total_s");
    for s in &output.summaries {
        println!(
            "{},{},{},{},{},{},{},{}",
            s.method,
            s.axis.as_str(),
            s.point().map(|p| p.to_string()).unwrap_or_default(),
            s.kse,
            s.rounds,
            s.trials,
            fmt_f64(s.mean_total_s),
            fmt_f64(s.std_total_s),
        );
    }
    if let Some(choice) = output.summaries.first().and_then(|s| s.kse_choice.as_ref()) {
        eprintln!("optimal kse {} with r_min {}", choice.kse, choice.r_min);
    }
    eprintln!("wrote {}", output.rounds_csv.display());
    eprintln!("wrote {}", output.summary_csv.display());
    if let Some(path) = &output.trajectory_csv {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
