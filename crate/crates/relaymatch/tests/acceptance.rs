//! Acceptance criteria, one PASS/FAIL line each. Runs as a plain binary so
//! the lines always show up in `cargo test` output.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use relaymatch::allocator::{build_utility_matrix, run_network};
use relaymatch::channel::{sample_perturbation, Spread};
use relaymatch::experiment::{realization_channel, run_experiment, sweep_summary, ExperimentSpec, RunMode, Sweep};
use relaymatch::matching::{allocate_rbs, build_preferences, verify_stable, Quota};
use relaymatch::metrics::{efficiency, signalling_overhead};
use relaymatch::oracle::{optimal_rate, stable_set, strict_improvements, Grid, OracleInstance};
use relaymatch::rates::{Allocation, Mode, RateContext};
use relaymatch::scenario::{load_config, NetworkConfig};

use common::*;

type Verdict = (bool, String);

fn stability() -> Verdict {
    let bad: usize = (0..1000u64)
        .into_par_iter()
        .map(|s| {
            let mut r = rng(s);
            let (u, n) = (r.random_range(1..=6), r.random_range(1..=8));
            let util = distinct_utility(&mut r, u, n);
            let quota = Quota {
                kappa: (0..u).map(|_| r.random_range(1..=n)).collect(),
                infeasible: vec![false; u],
            };
            let prefs = build_preferences(&util);
            let (m, _) = allocate_rbs(&prefs, &quota);
            verify_stable(&m, &prefs, &quota).violations.len()
        })
        .sum();
    (bad == 0, format!("1000 instances, {bad} blocking or IR violations"))
}

fn uniqueness() -> Verdict {
    let bad = (0..500u64)
        .into_par_iter()
        .filter(|&s| {
            let mut r = rng(1 << 20 | s);
            let u = r.random_range(1..=4);
            let n = r.random_range(u..=6);
            let util = distinct_utility(&mut r, u, n);
            let prefs = build_preferences(&util);
            let quota = Quota::uniform(u, 1);
            let (m, _) = allocate_rbs(&prefs, &quota);
            stable_set(&prefs, &quota).unwrap() != vec![m]
        })
        .count();
    (bad == 0, format!("500 instances, {bad} without a unique stable matching equal to ours"))
}

/// Median over instances of the fastest of five timing batches. Quotas of
/// ⌈N/U⌉ let every RB be held.
fn median_call(u: usize, n: usize) -> Duration {
    let mut r = rng((u * 1000 + n) as u64);
    let quota = Quota::uniform(u, n.div_ceil(u));
    let mut per_call: Vec<Duration> = (0..7)
        .map(|_| {
            let prefs = build_preferences(&distinct_utility(&mut r, u, n));
            (0..5)
                .map(|_| {
                    let mut reps = 0u32;
                    let start = Instant::now();
                    while start.elapsed() < Duration::from_millis(5) {
                        std::hint::black_box(allocate_rbs(&prefs, &quota));
                        reps += 1;
                    }
                    start.elapsed() / reps
                })
                .min()
                .unwrap()
        })
        .collect();
    per_call.sort();
    per_call[per_call.len() / 2]
}

fn termination() -> Verdict {
    let over = (0..1000u64)
        .filter(|&s| {
            let mut r = rng(2 << 20 | s);
            let (u, n) = (r.random_range(1..=16), r.random_range(1..=16));
            let util = distinct_utility(&mut r, u, n);
            let quota = Quota {
                kappa: (0..u).map(|_| r.random_range(1..=n)).collect(),
                infeasible: vec![false; u],
            };
            allocate_rbs(&build_preferences(&util), &quota).1.proposals > n * u
        })
        .count();
    let sizes = [(16, 16), (32, 16), (32, 32), (64, 32), (64, 64), (128, 64), (128, 128), (256, 128), (256, 256)];
    // wall-clock timing on a shared machine: up to three ladders
    let mut attempts = Vec::new();
    for _ in 0..3 {
        let times: Vec<Duration> = sizes.iter().map(|&(n, u)| median_call(u, n)).collect();
        let worst = times
            .windows(2)
            .map(|w| w[1].as_secs_f64() / w[0].as_secs_f64())
            .fold(0.0, f64::max);
        attempts.push((worst, times[0], times[8]));
        if worst <= 2.5 {
            break;
        }
    }
    let (worst, t0, t8) = *attempts.last().unwrap();
    let ratios: Vec<String> = attempts.iter().map(|a| format!("{:.2}", a.0)).collect();
    (
        over == 0 && worst <= 2.5,
        format!(
            "{over} instances above N·U proposals; largest runtime ratio per doubling of β [{}] (16×16 {t0:?}, 256×256 {t8:?})",
            ratios.join(", ")
        ),
    )
}

fn signalling() -> Verdict {
    let mut bad = Vec::new();
    for (n, u) in [(2, 2), (5, 5), (9, 9), (6, 3), (8, 2), (12, 4), (7, 6)] {
        // every UE prefers the RB that proposes last
        let rows: Vec<Vec<f64>> = (0..u)
            .map(|i| (0..n).map(|j| ((j + 1) * (u - i)) as f64).collect())
            .collect();
        let prefs = build_preferences(&relaymatch::allocator::UtilityMatrix::from_rows(&rows));
        let (m, stats) = allocate_rbs(&prefs, &Quota::uniform(u, 1));
        let premise = m.matched_pairs() == u.min(n);
        for t in 1..=5u64 {
            let o = signalling_overhead(n as u64, u as u64, t);
            // T rounds of the same matching plus one X2 multicast each
            let measured = t * (stats.proposals as u64 + 1);
            if !premise || stats.proposals as u64 != o.omega || measured != o.omega_max {
                bad.push((n, u, t));
            }
        }
    }
    // the loop's counters are the matching's own proposal counts
    let cfg = NetworkConfig::default();
    let cs = realization_channel(&cfg, 4, 0).unwrap();
    let run = run_network(&cfg, &cs);
    let counted = run.rounds.iter().flatten().map(|o| o.stats.proposals).sum::<usize>() == run.messages_matching()
        && run.messages_x2() == run.iterations() * cfg.num_relays;
    (bad.is_empty() && counted, format!("formula mismatches {bad:?}; network counters consistent {counted}"))
}

fn robust_soundness() -> Verdict {
    let mut cfg = load_config(CONVERGENCE_TOML).unwrap();
    cfg.num_cues = 6;
    cfg.num_d2d_pairs = 3;
    cfg.rb_count = 6;
    let results: Vec<(usize, usize, bool)> = (0..20u64)
        .into_par_iter()
        .map(|s| {
            let cs = realization_channel(&cfg, 100 + s, 0).unwrap();
            let run = run_network(&cfg, &cs);
            let ctx = RateContext::new(&cfg, &cs, &run.alloc);
            let robust = ctx.check_constraints(Mode::Robust);
            let (hard, all) = (robust.hard_passes(), robust.passes());
            let links: Vec<(usize, usize)> = (0..cs.layout.num_ues())
                .flat_map(|u| (0..cs.rb_count).map(move |n| (u, n)))
                .filter(|&(u, n)| run.alloc.x[u][n])
                .collect();
            let mut rate_viol = 0;
            let mut feas_viol = 0;
            for k in 0..1000 {
                let spread = if k % 2 == 0 { Spread::Boundary } else { Spread::Interior };
                let pert = sample_perturbation(&cs, s << 16 | k, spread);
                for &(u, n) in &links {
                    let real = ctx.realized_rate_at(&pert, u, n, run.alloc.p[u][n]);
                    let rob = ctx.robust_rb_rate(u, n);
                    if real < rob * (1.0 - 1e-9) {
                        rate_viol += 1;
                    }
                }
                let rep = ctx.check_realized(&pert);
                if (hard && !rep.hard_passes()) || (all && !rep.passes()) {
                    feas_viol += 1;
                }
            }
            (rate_viol, feas_viol, hard)
        })
        .collect();
    let rv: usize = results.iter().map(|r| r.0).sum();
    let fv: usize = results.iter().map(|r| r.1).sum();
    let feasible = results.iter().filter(|r| r.2).count();
    (
        rv == 0 && fv == 0 && feasible > 0,
        format!("20 instances × 1000 draws: {rv} rate violations, {fv} feasibility violations; {feasible} allocations worst-case feasible"),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()) || a == b
}

fn zero_uncertainty() -> Verdict {
    let mut cfg = NetworkConfig::default();
    cfg.num_cues = 6;
    cfg.num_d2d_pairs = 3;
    cfg.rb_count = 6;
    let bad = (0..500u64)
        .into_par_iter()
        .filter(|&s| {
            let cs = realization_channel(&cfg, 200 + s / 10, 0).unwrap();
            let mut r = rng(3 << 20 | s);
            let nu = cs.layout.num_ues();
            let mut alloc = Allocation::empty(nu, cfg.rb_count);
            for l in 0..cfg.num_relays {
                let m = cs.layout.members(l);
                for n in 0..cfg.rb_count {
                    if !m.is_empty() && r.random_bool(0.7) {
                        let u = m[r.random_range(0..m.len())];
                        alloc.assign(u, n, r.random_range(0.0..cfg.p_max_ue() / 2.0));
                    }
                }
            }
            let ctx = RateContext::new(&cfg, &cs, &alloc);
            let rates_ok = (0..nu).all(|u| close(ctx.ue_rate(u, Mode::Robust), ctx.ue_rate(u, Mode::Nominal)));
            let (a, b) = (ctx.check_constraints(Mode::Robust), ctx.check_constraints(Mode::Nominal));
            let reports_ok = a.checks.len() == b.checks.len()
                && a.checks.iter().zip(&b.checks).all(|(x, y)| {
                    x.family == y.family && x.index == y.index && x.rb == y.rb && close(x.lhs, y.lhs) && close(x.rhs, y.rhs)
                });
            !(rates_ok && reports_ok)
        })
        .count();
    (bad == 0, format!("500 allocations, {bad} differing from the nominal evaluation"))
}

fn efficiency_vs_oracle() -> Verdict {
    let etas: Vec<f64> = (0..200u64)
        .into_par_iter()
        .map(|s| {
            let (cfg, cs) = tiny_instance(s);
            let run = run_network(&cfg, &cs);
            let achieved: f64 = run.ue_rates(&cfg, &cs, Mode::Robust).iter().sum();
            let inst = OracleInstance::new(cfg, cs, Grid::Adaptive(5)).unwrap();
            efficiency(achieved, optimal_rate(&inst, Mode::Robust).unwrap().sum_rate).unwrap()
        })
        .collect();
    let inside = etas.iter().filter(|&&e| (0.6..=1.0 + 1e-9).contains(&e)).count();
    let min = etas.iter().cloned().fold(f64::INFINITY, f64::min);
    (inside >= 180, format!("η in [0.6, 1] for {inside}/200 tiny instances (min {min:.3})"))
}

fn convergence() -> Verdict {
    let cfg = load_config(CONVERGENCE_TOML).unwrap();
    let ks: Vec<usize> = (0..50)
        .into_par_iter()
        .map(|r| {
            let cs = realization_channel(&cfg, cfg.seed, r).unwrap();
            iterations_to_settle(&run_network(&cfg, &cs).sum_rate_trace(), 0.01)
        })
        .collect();
    let ok = ks.iter().filter(|&&k| k <= 10).count();
    (ok >= 45, format!("{ok}/50 seeds within 1% of the final sum rate by iteration 10 (slowest {})", ks.iter().max().unwrap()))
}

fn relaying_spec(sweep: &str) -> ExperimentSpec {
    let mut spec = ExperimentSpec::new(load_config(RELAYING_TOML).unwrap());
    spec.sweep = Some(sweep.parse::<Sweep>().unwrap());
    spec.modes = vec![RunMode::Proposed, RunMode::Reference];
    spec
}

fn crossover() -> Verdict {
    let spec = relaying_spec("d_dd_m=10,20,30,40,50,60,70,80,90,100");
    let s = sweep_summary(&run_experiment(&spec).unwrap()).unwrap();
    let signs: Vec<i8> = s.gains.iter().map(|g| g.majority()).collect();
    let ok = signs[0] < 0 && *signs.last().unwrap() > 0 && s.sign_changes == 1;
    (ok, format!("majority signs {signs:?}, crossover {:?} m", s.crossover))
}

fn uncertainty_ordering() -> Verdict {
    let spec = relaying_spec("xi=0,0.25,0.5");
    let s = sweep_summary(&run_experiment(&spec).unwrap()).unwrap();
    let g: Vec<f64> = s.gains.iter().map(|g| g.rate_gain_pct.unwrap_or(f64::NAN)).collect();
    (g[0] > g[1] && g[1] > g[2], format!("aggregate gain {:.1}% > {:.1}% > {:.1}%", g[0], g[1], g[2]))
}

fn weak_pareto() -> Verdict {
    let bad = (0..100u64)
        .into_par_iter()
        .filter(|&s| {
            let (cfg, cs) = tiny_instance(1000 + s);
            let run = run_network(&cfg, &cs);
            let powers = run.final_powers(&cfg, &cs);
            let ctx = RateContext::new(&cfg, &cs, &run.alloc);
            let util = build_utility_matrix(&ctx, &cs.layout.members(0), &powers);
            let last = &run.rounds.last().unwrap()[0];
            !strict_improvements(&util, &last.matching, &last.quota).unwrap().is_empty()
        })
        .count();
    (bad == 0, format!("100 tiny instances, {bad} with a matching better for every UE"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("stability", stability),
        ("uniqueness", uniqueness),
        ("termination and complexity", termination),
        ("signalling formulas", signalling),
        ("robust soundness", robust_soundness),
        ("zero-uncertainty degeneracy", zero_uncertainty),
        ("efficiency against the oracle", efficiency_vs_oracle),
        ("convergence", convergence),
        ("relaying crossover", crossover),
        ("uncertainty degrades gain", uncertainty_ordering),
        ("weak Pareto", weak_pareto),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:2} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
