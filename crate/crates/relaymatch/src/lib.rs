//! Distributed RB and power allocation for relay-aided D2D communication in a
//! multi-relay OFDMA cell, driven by many-to-one stable matching under
//! worst-case (ellipsoidal) channel uncertainty.
//!
//! The pipeline for one network realization is
//! [`scenario::generate_topology`] → [`channel::sample_link_gains`] →
//! [`allocator::run_network`] → [`metrics`]. Brute-force ground truth for
//! tiny instances lives in [`oracle`], and [`experiment`] drives sweeps and
//! writes CSV/JSON.
//!
//! Every capability has a runnable example:
//!
//! ```text
//! cargo run --example topology
//! cargo run --example channel
//! cargo run --example matching
//! cargo run --example robust_rates
//! cargo run --example power_control
//! cargo run --example network
//! cargo run --example oracle_efficiency
//! cargo run --example signalling
//! cargo run --example sweep
//! ```
//!
//! A minimal end-to-end run:
//!
//! ```
//! use relaymatch::{allocator, channel, scenario};
//!
//! let mut cfg = scenario::NetworkConfig::default();
//! cfg.num_cues = 3;
//! cfg.num_d2d_pairs = 3;
//! cfg.rb_count = 6;
//! let topo = scenario::generate_topology(&cfg, 7).unwrap();
//! let cs = channel::sample_link_gains(&topo, &cfg, 7);
//! let run = allocator::run_network(&cfg, &cs);
//! assert!(run.iterations() >= 1 && run.iterations() <= cfg.t_max);
//! ```

pub mod allocator;
pub mod channel;
pub mod experiment;
pub mod matching;
pub mod metrics;
pub mod oracle;
pub mod power;
pub mod rates;
pub mod scenario;

mod error;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random stream `stream` of the generator seeded by `seed`.
pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}
