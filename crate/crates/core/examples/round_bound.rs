//! Round lower bound against the participating-device count, and the count
//! that minimises it.
//!
//! ```bash
//! cargo run --release -p cafl --example round_bound
//! ```

use cafl::bound::{optimal_kse, r_min, r_min_oracle};
use cafl::experiment::BoundSection;
use cafl::Error;

fn main() -> cafl::Result<()> {
    let params = BoundSection::default().to_params(100);

    println!("kse  r_min  oracle");
    for kse in [1, 5, 10, 11, 12, 15, 20, 30, 50, 100] {
        match r_min(&params, kse) {
            Ok(r) => println!("{kse:>3}  {r:>5}  {:>6}", r_min_oracle(&params, kse)?),
            Err(Error::DiscriminantNegative { discriminant, .. }) => {
                println!("{kse:>3}  infeasible (discriminant {discriminant:.3e})")
            }
            Err(e) => return Err(e),
        }
    }

    let choice = optimal_kse(&params)?;
    println!(
        "\noptimal kse = {} needing {} rounds ({} counts skipped as infeasible)",
        choice.kse,
        choice.r_min,
        choice.skipped.len()
    );
    Ok(())
}
