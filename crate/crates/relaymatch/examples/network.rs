//! Full relay loop on one realization: per-iteration trace, final rates and
//! the direct-D2D reference on the same channel.
//!
//! `cargo run --example network -- [xi] [seed]`

use relaymatch::allocator::{run_network, run_reference, ReferenceCsi};
use relaymatch::channel::sample_link_gains;
use relaymatch::metrics::{r_avg, rate_gain};
use relaymatch::rates::Mode;
use relaymatch::scenario::{generate_topology, NetworkConfig};

fn main() -> relaymatch::Result<()> {
    let mut args = std::env::args().skip(1);
    let xi: f64 = args.next().map_or(0.25, |s| s.parse().expect("xi"));
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));

    let mut cfg = NetworkConfig::default();
    cfg.set_xi(xi);
    let topo = generate_topology(&cfg, seed)?;
    let cs = sample_link_gains(&topo, &cfg, seed);

    let run = run_network(&cfg, &cs);
    println!("iter  relay  sum rate (kbit/s)  proposals");
    for row in &run.trace {
        println!(
            "{:4}  {:5}  {:17.1}  {:9}",
            row.iteration,
            row.relay,
            row.sum_rate_bps / 1e3,
            row.messages_matching
        );
    }
    println!(
        "{} iterations, converged = {}, every round stable = {}",
        run.iterations(),
        run.converged,
        run.all_rounds_stable()
    );

    let rates = run.ue_rates(&cfg, &cs, Mode::Robust);
    let reference = run_reference(&cfg, &cs, ReferenceCsi::Nominal);
    let d2d: Vec<usize> = (0..rates.len()).filter(|&u| cs.layout.is_d2d(u)).collect();
    let sum = |r: &[f64]| d2d.iter().map(|&u| r[u]).sum::<f64>();
    println!("\nR_avg relayed {:.1} kbit/s, reference {:.1} kbit/s", r_avg(&rates) / 1e3, r_avg(&reference.ue_rates) / 1e3);
    match rate_gain(sum(&rates), sum(&reference.ue_rates)) {
        Ok(g) => println!("D2D rate gain of relaying: {g:+.1}%"),
        Err(e) => println!("D2D rate gain: {e}"),
    }
    Ok(())
}
