//! Link budget walkthrough: transmit power, noise, path loss and the
//! per-sub-channel rate table for one round.
//!
//! ```bash
//! cargo run --release -p cafl --example link_budget
//! ```

use cafl::radio::{dbm_to_watts, rate, rate_table, sample_topology, Fading, LinkBudget};
use cafl::rng::{derive_rng, Stream};

fn main() -> cafl::Result<()> {
    let link = LinkBudget::default();
    println!("tx power     {:.4} W", dbm_to_watts(link.tx_power_dbm));
    println!("noise power  {:.4e} W", link.noise_power_watts());

    let still = LinkBudget { fading: Fading::None, ..link.clone() };
    println!("\ndistance_m  loss_db  snr        rate_bps");
    for d in [1.0, 10.0, 50.0, 100.0, 200.0] {
        let gain = still.path_gain(d);
        println!(
            "{d:>10}  {:>7.2}  {:>9.3e}  {:>10.0}",
            still.path_loss.loss_db(d),
            still.snr(gain),
            rate(&still, gain)
        );
    }

    let topology = sample_topology(&mut derive_rng(5, 0, 0, Stream::Topology), 4, 200.0);
    let table = rate_table(&topology, &link, 6, 0, &mut derive_rng(5, 0, 0, Stream::Fading))?;
    println!("\nRayleigh-faded rates (Mbit/s), 4 devices x 6 sub-channels");
    for k in 0..table.devices() {
        let row: Vec<String> = table.row(k).iter().map(|c| format!("{:6.3}", c / 1e6)).collect();
        println!("device {k} at {:>5.1} m: {}", topology.distance(k), row.join(" "));
    }
    Ok(())
}
