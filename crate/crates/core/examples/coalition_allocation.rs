//! One round of sub-channel allocation: coalition game against the fairness
//! baseline and, since the instance is small, the exhaustive optimum.

use cafl::allocation::{coalition_game, exhaustive_optimum, fairness_outcome};
use cafl::fl::select_devices;
use cafl::radio::{rate_table, sample_topology, LinkBudget};
use cafl::rng::{derive_rng, Stream};

fn main() -> cafl::Result<()> {
    let (seed, devices, subchannels, kse, z_bits) = (42, 100, 8, 3, 1e6);
    let link = LinkBudget::default();

    let topology = sample_topology(&mut derive_rng(seed, 0, 0, Stream::Topology), devices, 200.0);
    let table = rate_table(&topology, &link, subchannels, 0, &mut derive_rng(seed, 0, 0, Stream::Fading))?;
    let selected = select_devices(devices, kse, &mut derive_rng(seed, 0, 0, Stream::Selection))?;

    let fair = fairness_outcome(&table, &selected, z_bits)?;
    let game = coalition_game(&table, &selected, z_bits, &mut derive_rng(seed, 0, 0, Stream::Allocation))?;
    let best = exhaustive_optimum(&table, &selected, z_bits)?;

    for (name, o) in [("fairness", &fair), ("coalition", &game), ("exhaustive", &best)] {
        println!("{name:<10} t_comp = {:.4} s", o.t_comp_seconds);
        for (device, channels) in o.assignment.channel_sets() {
            println!("    device {device:>2} ({:>5.1} m): {channels:?}", topology.distance(device));
        }
    }
    println!(
        "\ncoalition: {} sweeps, {} accepted moves, {} candidates, started at {:.4} s",
        game.iterations, game.moves_accepted, game.candidates_evaluated, game.initial_t_comp
    );
    println!("gap to optimum: {:.3}", game.t_comp_seconds / best.t_comp_seconds);
    Ok(())
}
