//! End to end: choose the participant count from the bound, then allocate
//! sub-channels every round and write the CSV reports.
//!
//! ```bash
//! cargo run --release -p cafl --example full_pipeline -- /tmp/cafl-out
//! ```

use std::path::PathBuf;

use cafl::experiment::{run_scenario, ExperimentConfig};

fn main() -> cafl::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("cafl-pipeline"));
    let config = ExperimentConfig { trials: 100, ..ExperimentConfig::default() };
    let output = run_scenario(&config, &out)?;

    let summary = &output.summaries[0];
    if let Some(choice) = &summary.kse_choice {
        println!("kse = {}, r_min = {}", choice.kse, choice.r_min);
    }
    println!(
        "total upload time over {} rounds: {:.3} s (std {:.3}, {} trials)",
        summary.rounds, summary.mean_total_s, summary.std_total_s, summary.trials
    );
    println!("reports in {}", out.display());
    Ok(())
}
