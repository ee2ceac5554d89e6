//! Draws one network layout and reports who is served by which relay.
//!
//! `cargo run --example topology -- [seed]`

use relaymatch::scenario::{generate_topology, NetworkConfig, UeKind};

fn main() -> relaymatch::Result<()> {
    let seed = std::env::args().nth(1).map_or(Ok(1), |s| s.parse()).expect("seed must be an integer");
    let cfg = NetworkConfig::default();
    let topo = generate_topology(&cfg, seed)?;

    println!("{} m cell, eNB at ({:.0}, {:.0})", topo.cell_side_m, topo.enb.x, topo.enb.y);
    for (l, r) in topo.relay_positions.iter().enumerate() {
        let members = topo.members(l);
        let d2d = members.iter().filter(|&&u| matches!(topo.ues[u].kind, UeKind::D2d { .. })).count();
        println!(
            "relay {l} at ({:6.1}, {:6.1}), {:5.1} m from eNB: {} CUEs, {d2d} D2D pairs",
            r.x,
            r.y,
            r.dist(&topo.enb),
            members.len() - d2d
        );
    }

    println!("\n ue  kind  relay   x       y     peer distance");
    for (u, ue) in topo.ues.iter().enumerate() {
        let (kind, peer) = match ue.kind {
            UeKind::Cue => ("cue", String::new()),
            UeKind::D2d { rx } => ("d2d", format!("{:.1} m", ue.position.dist(&rx))),
        };
        println!(
            "{u:3}  {kind:4}  {:5}  {:6.1}  {:6.1}  {peer}",
            ue.relay, ue.position.x, ue.position.y
        );
    }
    Ok(())
}
