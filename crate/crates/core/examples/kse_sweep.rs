//! Mean single-round upload time as more devices share 20 sub-channels.

use cafl::allocation::Method;
use cafl::experiment::{sweep_kse, ExperimentConfig};

fn main() -> cafl::Result<()> {
    let config = ExperimentConfig { trials: 200, ..ExperimentConfig::default() };
    let values = [3, 6, 9, 12, 15];
    let result = sweep_kse(&config, &values)?;

    println!("kse  coalition_s  fairness_s  ratio");
    for k in values {
        let c = result.summary(Method::Coalition, k).expect("swept").mean_total_s;
        let f = result.summary(Method::Fairness, k).expect("swept").mean_total_s;
        println!("{k:>3}  {c:>11.4}  {f:>10.4}  {:>5.3}", f / c);
    }
    Ok(())
}
