//! Resource allocation for compression-aided federated learning over an
//! OFDMA uplink.
//!
//! The crate is organised around the pipeline it simulates:
//!
//! - [`bound`]: the round lower bound as a function of the participating
//!   device count, and the search for the count that minimises it.
//! - [`radio`]: device placement, path loss and fading, and per-sub-channel
//!   Shannon rates.
//! - [`allocation`]: sub-channel partitions, the round's upload time, and the
//!   coalition-game, fairness and exhaustive allocators.
//! - [`fl`]: a toy federated training loop with compression distortion, used
//!   to study convergence against the participating device count.
//! - [`experiment`]: scenario files, Monte Carlo trials, sweeps and CSV output.
//!
//! Runnable walkthroughs live in this crate's `examples/` directory:
//!
//! ```bash
//! cargo run --release -p cafl --example round_bound
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod bound;
pub mod error;
pub mod experiment;
pub mod fl;
pub mod radio;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
