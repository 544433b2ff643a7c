//! Toy federated training with compression distortion: how many rounds each
//! participant count needs to get within 0.2 of the optimum.

use cafl::fl::{median, median_trajectory, rounds_to_accuracy, run_seeds, FlRunConfig, TaskSpec};

fn main() -> cafl::Result<()> {
    let spec = TaskSpec::default();
    let seeds: Vec<u64> = (0..20).collect();

    println!("kse  median_rounds  final_distance");
    for kse in [5, 10, 20, 40, 50, 80, 100] {
        let config = FlRunConfig { kse, ..FlRunConfig::default() };
        let runs = run_seeds(&config, &spec, &seeds)?;
        let rounds: Vec<f64> = runs
            .iter()
            .map(|t| rounds_to_accuracy(t, config.threshold).map_or(f64::INFINITY, |r| r as f64))
            .collect();
        let mid = median_trajectory(&runs);
        println!(
            "{kse:>3}  {:>13}  {:>14.4}",
            median(rounds),
            mid.distance.last().copied().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
