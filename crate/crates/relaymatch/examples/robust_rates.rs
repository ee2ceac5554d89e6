//! Nominal versus worst-case rates of one fixed allocation as the uncertainty
//! grows, and a Monte Carlo check that sampled channels never do worse.

use relaymatch::channel::{sample_link_gains, sample_perturbation, Spread};
use relaymatch::rates::{Allocation, Mode, RateContext};
use relaymatch::scenario::{generate_topology, NetworkConfig};

fn main() -> relaymatch::Result<()> {
    let mut cfg = NetworkConfig::default();
    cfg.num_cues = 6;
    cfg.num_d2d_pairs = 3;
    cfg.rb_count = 9;
    let topo = generate_topology(&cfg, 5)?;
    let base = sample_link_gains(&topo, &cfg, 5);

    // each relay hands RBs 0, 1, ... to its members, so RBs are reused
    // across relays and every link sees uncertain interference
    let nu = base.layout.num_ues();
    let mut alloc = Allocation::empty(nu, cfg.rb_count);
    let mut rb_of = vec![0; nu];
    for l in 0..cfg.num_relays {
        for (n, &u) in base.layout.members(l).iter().enumerate() {
            alloc.assign(u, n, 1e-3);
            rb_of[u] = n;
        }
    }

    println!("  xi    nominal sum    robust sum   violated worst-case constraints");
    for xi in [0.0, 0.1, 0.25, 0.5] {
        let cs = base.clone().with_xi([xi; 4]);
        let ctx = RateContext::new(&cfg, &cs, &alloc);
        let nominal: f64 = (0..nu).map(|u| ctx.ue_rate(u, Mode::Nominal)).sum();
        let robust: f64 = (0..nu).map(|u| ctx.ue_rate(u, Mode::Robust)).sum();
        let report = ctx.check_constraints(Mode::Robust);
        let broken: std::collections::BTreeSet<String> = report.violations().map(|c| format!("{:?}", c.family)).collect();
        println!("{xi:5.2}  {:10.0}  {:12.0}   {broken:?}", nominal, robust);
    }

    let cs = base.with_xi([0.25; 4]);
    let ctx = RateContext::new(&cfg, &cs, &alloc);
    let mut worst_margin = f64::INFINITY;
    for seed in 0..1000 {
        let pert = sample_perturbation(&cs, seed, Spread::Boundary);
        for u in 0..nu {
            let n = rb_of[u];
            let realized = ctx.realized_rate_at(&pert, u, n, alloc.p[u][n]);
            worst_margin = worst_margin.min(realized - ctx.robust_rb_rate(u, n));
        }
    }
    println!("smallest realized-minus-robust margin over 1000 draws: {worst_margin:.1} bit/s");
    Ok(())
}
