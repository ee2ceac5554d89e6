#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaymatch::allocator::UtilityMatrix;
use relaymatch::channel::ChannelState;
use relaymatch::experiment::realization_channel;
use relaymatch::scenario::{load_config, NetworkConfig};

pub const RELAYING_TOML: &str = include_str!("../../configs/relaying.toml");
pub const CONVERGENCE_TOML: &str = include_str!("../../configs/convergence.toml");
pub const TINY_TOML: &str = include_str!("../../configs/tiny.toml");

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `u × n` matrix holding a random permutation of 1..=u·n, in kbit/s.
pub fn distinct_utility(rng: &mut impl Rng, u: usize, n: usize) -> UtilityMatrix {
    let mut vals: Vec<f64> = (1..=u * n).map(|x| x as f64 * 1e3).collect();
    vals.shuffle(rng);
    let rows: Vec<Vec<f64>> = vals.chunks(n).map(<[f64]>::to_vec).collect();
    UtilityMatrix::from_rows(&rows)
}

/// Single relay, 1–4 UEs (at most half of them D2D), 1–4 RBs, demands from
/// the tiny config.
pub fn tiny_instance(seed: u64) -> (NetworkConfig, ChannelState) {
    let mut r = rng(seed ^ 0x7119);
    let mut cfg = load_config(TINY_TOML).unwrap();
    let u = r.random_range(1..=4usize);
    cfg.num_d2d_pairs = r.random_range(0..=u / 2);
    cfg.num_cues = u - cfg.num_d2d_pairs;
    cfg.rb_count = r.random_range(1..=4);
    let cs = realization_channel(&cfg, seed, 0).unwrap();
    (cfg, cs)
}

/// Iterations until the trace first comes within `tol` (relative) of its
/// final value.
pub fn iterations_to_settle(trace: &[f64], tol: f64) -> usize {
    let last = *trace.last().unwrap();
    trace.iter().position(|&x| (x - last).abs() <= tol * last.abs()).unwrap() + 1
}
