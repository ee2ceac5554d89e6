//! Relay loop against exhaustive search on small single-relay instances.

use relaymatch::allocator::run_network;
use relaymatch::experiment::realization_channel;
use relaymatch::metrics::efficiency;
use relaymatch::oracle::{candidate_count, optimal_rate, Grid, OracleInstance};
use relaymatch::rates::Mode;
use relaymatch::scenario::NetworkConfig;

fn main() -> relaymatch::Result<()> {
    let mut cfg = NetworkConfig::default();
    cfg.num_relays = 1;
    cfg.num_cues = 2;
    cfg.num_d2d_pairs = 1;
    cfg.rb_count = 3;
    cfg.set_xi(0.25);
    // unreachable demands: everyone transmits at the full budget
    cfg.q_min_cue_bps = 1e8;
    cfg.q_min_d2d_bps = 1e8;
    println!("{} candidate allocations per instance", candidate_count(3, 3, 5));

    let mut etas = Vec::new();
    for seed in 0..20 {
        let cs = realization_channel(&cfg, seed, 0)?;
        let run = run_network(&cfg, &cs);
        let achieved: f64 = run.ue_rates(&cfg, &cs, Mode::Robust).iter().sum();
        let inst = OracleInstance::new(cfg.clone(), cs, Grid::Adaptive(5))?;
        let opt = optimal_rate(&inst, Mode::Robust)?;
        let eta = efficiency(achieved, opt.sum_rate)?;
        println!("seed {seed:2}: {:9.0} / {:9.0} bit/s  η = {eta:.3}", achieved, opt.sum_rate);
        etas.push(eta);
    }
    let inside = etas.iter().filter(|&&e| (0.6..=1.0 + 1e-9).contains(&e)).count();
    println!("{inside}/{} instances with η in [0.6, 1]", etas.len());
    Ok(())
}
