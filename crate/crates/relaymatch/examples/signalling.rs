//! Message counts: the closed forms against what the matching and the relay
//! loop actually exchange.

use relaymatch::allocator::{run_network, UtilityMatrix};
use relaymatch::channel::sample_link_gains;
use relaymatch::matching::{allocate_rbs, build_preferences, Quota};
use relaymatch::metrics::signalling_overhead;
use relaymatch::scenario::{generate_topology, NetworkConfig};

fn main() -> relaymatch::Result<()> {
    // every UE prefers the RB that proposes last, so each RB walks as far
    // down its list as it can
    for (n, u) in [(5, 5), (6, 3), (12, 4)] {
        let rows: Vec<Vec<f64>> = (0..u)
            .map(|i| (0..n).map(|j| (j + 1) as f64 * (u - i) as f64).collect())
            .collect();
        let prefs = build_preferences(&UtilityMatrix::from_rows(&rows));
        let (_, stats) = allocate_rbs(&prefs, &Quota::uniform(u, 1));
        let o = signalling_overhead(n as u64, u as u64, 3);
        println!(
            "N={n:2} U={u}: {:?} Ω = {}, measured {}; Ω_max over 3 iterations = {}",
            o.case, o.omega, stats.proposals, o.omega_max
        );
    }

    let cfg = NetworkConfig::default();
    let topo = generate_topology(&cfg, 2)?;
    let cs = sample_link_gains(&topo, &cfg, 2);
    let run = run_network(&cfg, &cs);
    println!("\nnetwork run: {} iterations", run.iterations());
    for l in 0..cfg.num_relays {
        let rows: Vec<_> = run.trace.iter().filter(|r| r.relay == l).collect();
        let matching: usize = rows.iter().map(|r| r.messages_matching).sum();
        let x2: usize = rows.iter().map(|r| r.messages_x2).sum();
        let members = cs.layout.members(l).len() as u64;
        let bound = signalling_overhead(cfg.rb_count as u64, members, run.iterations() as u64);
        println!(
            "relay {l}: {matching} proposals + {x2} X2 messages; worst case for N={}, U={members}: {}",
            cfg.rb_count, bound.omega_max
        );
    }
    Ok(())
}
