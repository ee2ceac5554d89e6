//! Samples link gains, shows the worst-case bookkeeping derived from them and
//! replays the channel through a dump file.

use relaymatch::channel::{dump_channel, load_channel, normalized_gain, reference_user, sample_link_gains, Hop};
use relaymatch::scenario::{generate_topology, NetworkConfig};

fn main() -> relaymatch::Result<()> {
    let mut cfg = NetworkConfig::default();
    cfg.set_xi(0.25);
    let topo = generate_topology(&cfg, 3)?;
    let cs = sample_link_gains(&topo, &cfg, 3);

    let u = 0;
    let l = cs.relay_of(u);
    println!("UE {u} is served by relay {l}");
    for n in 0..3 {
        let r1 = reference_user(&cs, l, u, Hop::One, n);
        println!(
            "  RB {n}: h1 = {:.3e}, h2 = {:.3e}, H = {:.3}, hop-1 victim {:?}",
            cs.h1(u, n),
            cs.h2(u, n),
            cs.hop_ratio(u, n),
            r1.map(|r| (r.id, r.gain))
        );
    }

    let norm = normalized_gain(&cs, cfg.sigma2())?;
    println!("σ²/h on RB 0 = {:.3e}", norm.sigma_t[u][0]);

    let unc = cs.uncertainty();
    println!("uncertainty radii of relay {l}: r1(UE {u}) = {:.3e}, r2 = {:.3e}", unc.r1[u][0], unc.r2[l]);

    let path = std::env::temp_dir().join("relaymatch-channel.csv");
    dump_channel(&cs, &path)?;
    let back = load_channel(&path, cs.xi)?;
    println!("replayed from {}: identical = {}", path.display(), back == cs);
    Ok(())
}
