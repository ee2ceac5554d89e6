//! The per-RB power update and how powers settle in a network run.

use relaymatch::allocator::run_network;
use relaymatch::channel::sample_link_gains;
use relaymatch::power::{lambda, update_power, Caps};
use relaymatch::scenario::{generate_topology, NetworkConfig};

fn main() -> relaymatch::Result<()> {
    // a link at 1 bit/s/Hz with 0.1 W needs 0.3 W for 2 bit/s/Hz
    println!("Λ(2, 1, 0.1) = {:.3} W", lambda(2.0, 1.0, 0.1));
    let caps = Caps {
        p_hat_max: 0.2,
        varpi: 0.15,
    };
    println!("capped update: {:.3} W", update_power(2.0, 1.0, 0.1, caps));
    println!("already at target: {:.3} W", update_power(1.0, 1.0, 0.1, caps));

    let mut cfg = NetworkConfig::default();
    cfg.set_xi(0.25);
    let topo = generate_topology(&cfg, 11)?;
    let cs = sample_link_gains(&topo, &cfg, 11);
    let run = run_network(&cfg, &cs);

    println!("\npower of relay 0's allocated RBs per iteration (mW)");
    for (t, round) in run.rounds.iter().enumerate() {
        let r = &round[0];
        let ps: Vec<String> = r.powers.iter().map(|&(u, n, p)| format!("{u}/{n}:{:.2}", p * 1e3)).collect();
        println!("t={:2}  {}", t + 1, ps.join(" "));
    }
    println!("converged: {}", run.converged);
    Ok(())
}
