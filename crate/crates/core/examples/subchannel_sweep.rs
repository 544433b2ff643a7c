//! Mean single-round upload time as the sub-channel count grows, coalition
//! game against the fairness baseline on paired random streams.

use cafl::allocation::Method;
use cafl::experiment::{sweep_subchannels, ExperimentConfig};

fn main() -> cafl::Result<()> {
    let config = ExperimentConfig { kse: Some(10), trials: 200, ..ExperimentConfig::default() };
    let values = [10, 15, 20, 25, 30];
    let result = sweep_subchannels(&config, &values)?;

    println!("  S  coalition_s  fairness_s");
    for s in values {
        let c = result.summary(Method::Coalition, s).expect("swept");
        let f = result.summary(Method::Fairness, s).expect("swept");
        println!("{s:>3}  {:>11.4}  {:>10.4}", c.mean_total_s, f.mean_total_s);
    }
    Ok(())
}
