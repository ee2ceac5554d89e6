//! The joint RB and power allocation loop, run by every relay in lockstep.
//!
//! Each global iteration every relay, working from the allocation snapshot
//! exchanged at the end of the previous iteration, builds its worst-case
//! utility matrix, derives quotas and preference profiles, runs the stable
//! matching, updates the power of every allocated RB and stages its new
//! `(x, P)` for exchange. The exchange is a barrier: no relay starts
//! iteration `t + 1` before all have finished `t`.
//!
//! Utilities are worst-case rates at the bid power `min(p̂max, ϖ)`, with the
//! UE and relay RB counts of the snapshot (at least one). The target-rate
//! update then runs from that bid point, so at unchanged interference every
//! allocated RB lands on its share of the UE's rate target in one step.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelState;
use crate::matching::{
    allocate_rbs, build_preferences, compute_quota, verify_stable, AllocStats, Matching, PreferenceProfiles, Quota,
};
use crate::power::{caps_for_counts, power_caps, update_power};
use crate::rates::{q_min, Allocation, Mode, RateContext};
use crate::scenario::NetworkConfig;

/// Worst-case per-RB rates of one relay's UEs, rows in member order.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl UtilityMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        UtilityMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged utility rows");
        UtilityMatrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Entry `(i, n)` is the worst-case rate of `members[i]` on RB `n` at power
/// `power[members[i]][n]`, with other relays' transmissions taken from `ctx`.
pub fn build_utility_matrix(ctx: &RateContext, members: &[usize], power: &[Vec<f64>]) -> UtilityMatrix {
    let nn = ctx.cs.rb_count;
    let mut m = UtilityMatrix::zeros(members.len(), nn);
    for (i, &u) in members.iter().enumerate() {
        for n in 0..nn {
            m.set(i, n, ctx.robust_rate_at(u, n, power[u][n]));
        }
    }
    m
}

/// Bid power of every UE of `members` on every RB under the allocation in `ctx`.
pub fn bid_powers(ctx: &RateContext, members: &[usize]) -> Vec<Vec<f64>> {
    let nn = ctx.cs.rb_count;
    let mut out = vec![vec![0.0; nn]; ctx.cs.layout.num_ues()];
    let total: usize = members.iter().map(|&v| ctx.alloc.rb_count_of(v)).sum();
    for &u in members {
        let held = ctx.alloc.rb_count_of(u).max(1);
        for n in 0..nn {
            out[u][n] = caps_for_counts(ctx, u, n, held, total.max(1)).bound();
        }
    }
    out
}

/// Power that turns per-RB rate `rate` at power `p` into `target`, both in
/// bit/s. The exponents are per-hop spectral efficiencies, twice the
/// end-to-end rate over `B`, so a link at fixed interference lands on the
/// target in one step.
fn next_power(cfg: &NetworkConfig, target: f64, rate: f64, p: f64, caps: crate::power::Caps) -> f64 {
    let b = cfg.rb_bandwidth_hz;
    update_power(2.0 * target / b, 2.0 * rate / b, p, caps)
}

/// Everything one relay produced in one iteration.
#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub relay: usize,
    pub members: Vec<usize>,
    pub utility: UtilityMatrix,
    pub quota: Quota,
    pub profiles: PreferenceProfiles,
    pub matching: Matching,
    pub stats: AllocStats,
    /// `(ue, rb, power)` for every allocated RB after the update.
    pub powers: Vec<(usize, usize, f64)>,
    /// Σ of worst-case rates over the relay's allocated RBs after the update.
    pub sum_rate: f64,
}

/// One relay's iteration against a frozen snapshot of the network.
pub fn relay_round(
    cfg: &NetworkConfig,
    cs: &ChannelState,
    snapshot: &Allocation,
    relay: usize,
    members: &[usize],
) -> RoundOutput {
    let nn = cs.rb_count;
    let ctx = RateContext::new(cfg, cs, snapshot);
    let bid = bid_powers(&ctx, members);
    let utility = build_utility_matrix(&ctx, members, &bid);
    let qs: Vec<f64> = members.iter().map(|&u| q_min(cfg, cs, u)).collect();
    let quota = compute_quota(&utility, &qs);
    let profiles = build_preferences(&utility);
    let (matching, stats) = allocate_rbs(&profiles, &quota);

    let mut staged = snapshot.clone();
    for &u in members {
        for n in 0..nn {
            staged.x[u][n] = false;
            staged.p[u][n] = 0.0;
        }
    }
    for (n, o) in matching.rb_owner.iter().enumerate() {
        if let Some(i) = *o {
            staged.assign(members[i], n, bid[members[i]][n]);
        }
    }

    let sctx = RateContext::new(cfg, cs, &staged);
    let mut powers = Vec::new();
    for (n, o) in matching.rb_owner.iter().enumerate() {
        let Some(i) = *o else { continue };
        let u = members[i];
        let caps = power_caps(&sctx, u, n).expect("allocated UE has caps");
        let target = qs[i] / matching.ue_rbs[i].len() as f64;
        powers.push((u, n, next_power(cfg, target, utility.get(i, n), bid[u][n], caps)));
    }
    for &(u, n, p) in &powers {
        staged.p[u][n] = p;
    }
    let sctx = RateContext::new(cfg, cs, &staged);
    let sum_rate = powers.iter().map(|&(u, n, p)| sctx.robust_rate_at(u, n, p)).sum();

    RoundOutput {
        relay,
        members: members.to_vec(),
        utility,
        quota,
        profiles,
        matching,
        stats,
        powers,
        sum_rate,
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub relay: usize,
    pub sum_rate_bps: f64,
    pub messages_matching: usize,
    pub messages_x2: usize,
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub trace: Vec<TraceRow>,
    /// Exchanged allocation after the last iteration.
    pub alloc: Allocation,
    /// Per-iteration outputs of every relay (`rounds[t][l]`).
    pub rounds: Vec<Vec<RoundOutput>>,
    pub converged: bool,
}

impl NetworkRun {
    pub fn iterations(&self) -> usize {
        self.rounds.len()
    }

    /// Network sum-rate after each iteration.
    pub fn sum_rate_trace(&self) -> Vec<f64> {
        self.rounds
            .iter()
            .map(|r| r.iter().map(|o| o.sum_rate).sum())
            .collect()
    }

    pub fn messages_matching(&self) -> usize {
        self.trace.iter().map(|r| r.messages_matching).sum()
    }

    pub fn messages_x2(&self) -> usize {
        self.trace.iter().map(|r| r.messages_x2).sum()
    }

    /// Per-UE rate of the final exchanged allocation.
    pub fn ue_rates(&self, cfg: &NetworkConfig, cs: &ChannelState, mode: Mode) -> Vec<f64> {
        let ctx = RateContext::new(cfg, cs, &self.alloc);
        (0..cs.layout.num_ues()).map(|u| ctx.ue_rate(u, mode)).collect()
    }

    /// Every recorded matching is stable for the profiles it was built from.
    pub fn all_rounds_stable(&self) -> bool {
        self.rounds
            .iter()
            .flatten()
            .all(|o| verify_stable(&o.matching, &o.profiles, &o.quota).is_stable())
    }

    /// Power of every UE on every RB at the end of the run: the allocated
    /// power where it transmits, its bid power elsewhere.
    pub fn final_powers(&self, cfg: &NetworkConfig, cs: &ChannelState) -> Vec<Vec<f64>> {
        let ctx = RateContext::new(cfg, cs, &self.alloc);
        let mut p = vec![vec![0.0; cs.rb_count]; cs.layout.num_ues()];
        for l in 0..cs.layout.num_relays {
            let m = cs.layout.members(l);
            let bid = bid_powers(&ctx, &m);
            for &u in &m {
                for n in 0..cs.rb_count {
                    p[u][n] = if self.alloc.x[u][n] { self.alloc.p[u][n] } else { bid[u][n] };
                }
            }
        }
        p
    }
}

pub fn run_network(cfg: &NetworkConfig, cs: &ChannelState) -> NetworkRun {
    run_subset(cfg, cs, &vec![true; cs.layout.num_ues()])
}

/// Runs the loop with only the UEs flagged in `active` taking part.
pub fn run_subset(cfg: &NetworkConfig, cs: &ChannelState, active: &[bool]) -> NetworkRun {
    let (nu, nn) = (cs.layout.num_ues(), cs.rb_count);
    let members: Vec<Vec<usize>> = (0..cs.layout.num_relays)
        .map(|l| cs.layout.members(l).into_iter().filter(|&u| active[u]).collect())
        .collect();
    let mut alloc = Allocation::empty(nu, nn);
    let mut trace = Vec::new();
    let mut rounds: Vec<Vec<RoundOutput>> = Vec::new();
    let mut converged = false;

    for t in 1..=cfg.t_max {
        let outs: Vec<RoundOutput> = (0..members.len())
            .into_par_iter()
            .map(|l| relay_round(cfg, cs, &alloc, l, &members[l]))
            .collect();

        // barrier: every relay's staged (x, P) becomes the shared snapshot
        for o in &outs {
            for &u in &o.members {
                for n in 0..nn {
                    alloc.x[u][n] = false;
                    alloc.p[u][n] = 0.0;
                }
            }
            for &(u, n, p) in &o.powers {
                alloc.assign(u, n, p);
            }
            trace.push(TraceRow {
                iteration: t,
                relay: o.relay,
                sum_rate_bps: o.sum_rate,
                messages_matching: o.stats.proposals,
                messages_x2: 1,
            });
        }
        let settled = rounds
            .last()
            .is_some_and(|prev| prev.iter().zip(&outs).all(|(a, b)| (a.sum_rate - b.sum_rate).abs() < cfg.epsilon));
        rounds.push(outs);
        if settled {
            converged = true;
            break;
        }
    }

    NetworkRun {
        trace,
        alloc,
        rounds,
        converged,
    }
}

/// Channel knowledge assumed by the reference scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
pub enum ReferenceCsi {
    /// Uncertainty-unaware: nominal gains taken as exact.
    #[default]
    Nominal,
    /// Same uncertainty bounds as the proposed scheme.
    Robust,
}

/// Outcome of the direct-D2D underlay scheme.
#[derive(Debug, Clone)]
pub struct ReferenceRun {
    /// CUE allocation from the relay loop with D2D UEs absent.
    pub cue_run: NetworkRun,
    /// CUE allocation after partners raised their power to absorb D2D reuse.
    pub alloc: Allocation,
    /// CUE whose RBs each admitted D2D pair reuses, indexed by UE id.
    pub partner: Vec<Option<usize>>,
    /// Direct D2D transmit power per RB, `[u][n]`.
    pub d2d_power: Vec<Vec<f64>>,
    /// Per-UE rate: relayed worst-case rate for CUEs, direct rate for D2D UEs.
    pub ue_rates: Vec<f64>,
}

/// Conventional underlay D2D. CUEs are allocated by the relay loop with the
/// D2D UEs absent; then each D2D pair, in index order, may reuse all RBs of
/// one not-yet-shared CUE of its relay and talk directly to its peer.
///
/// On every shared RB the CUE scales its power up, within its own caps, to
/// keep its worst-case SINR at the relay; the D2D power is the largest the CUE
/// can absorb, at most `P^max/|RBs|`, and also respects the hop-1 threshold at
/// every other relay. The pair is admitted with the CUE giving it the highest
/// direct rate, provided that rate and the CUE's rate both meet their targets;
/// otherwise it stays silent. Direct links are evaluated at nominal gains.
///
/// With [`ReferenceCsi::Nominal`] the whole scheme, CUE loop included, runs as
/// if the channel were known exactly.
pub fn run_reference(cfg: &NetworkConfig, cs: &ChannelState, csi: ReferenceCsi) -> ReferenceRun {
    let nominal;
    let cs = match csi {
        ReferenceCsi::Nominal => {
            nominal = cs.clone().with_xi([0.0; 4]);
            &nominal
        }
        ReferenceCsi::Robust => cs,
    };
    let lay = &cs.layout;
    let (nu, nn) = (lay.num_ues(), cs.rb_count);
    let active: Vec<bool> = (0..nu).map(|u| !lay.is_d2d(u)).collect();
    let cue_run = run_subset(cfg, cs, &active);
    let mut alloc = cue_run.alloc.clone();
    let mut partner = vec![None; nu];
    let mut d2d_power = vec![vec![0.0; nn]; nu];
    let mut taken = vec![false; nu];
    let b = cfg.rb_bandwidth_hz;

    let d2d_rate = |d: usize, alloc: &Allocation, d2d_power: &[Vec<f64>]| -> f64 {
        let ctx = RateContext::new(cfg, cs, alloc);
        (0..nn)
            .filter(|&n| d2d_power[d][n] > 0.0)
            .map(|n| {
                let co: Vec<(usize, f64)> = (0..nu).map(|v| (v, alloc.s(v, n) + d2d_power[v][n])).collect();
                ctx.direct_d2d_rate(d, n, d2d_power[d][n], &co).expect("D2D transmitter")
            })
            .sum()
    };

    for d in (0..nu).filter(|&u| lay.is_d2d(u)) {
        let l = cs.relay_of(d);
        let mut best: Option<(usize, Allocation, Vec<f64>, f64)> = None;
        for c in lay.members(l).into_iter().filter(|&c| !lay.is_d2d(c) && !taken[c]) {
            let rbs: Vec<usize> = (0..nn).filter(|&n| alloc.x[c][n]).collect();
            if rbs.is_empty() {
                continue;
            }
            let ctx = RateContext::new(cfg, cs, &alloc);
            let mut trial = alloc.clone();
            let mut p = vec![0.0; nn];
            let mut cue_rate = 0.0;
            for &n in &rbs {
                let den = ctx.robust_denominator(c, n);
                let pc = alloc.p[c][n];
                let cap = power_caps(&ctx, c, n).expect("CUE holds RBs").bound();
                let g = cs.ue_relay[d][l][n];
                let mut pd = (cfg.p_max_ue() / rbs.len() as f64).min(((cap / pc - 1.0) * den / g).max(0.0));
                for j in (0..lay.num_relays).filter(|&j| j != l) {
                    pd = pd.min(cfg.i_th1() / cs.ue_relay[d][j][n]);
                }
                let j = pd * g;
                trial.p[c][n] = pc * (den + j) / den;
                p[n] = pd;
                cue_rate += 0.5 * b * crate::rates::log2_1p(trial.p[c][n] * cs.h1(c, n) / (den + j));
            }
            let mut dp = d2d_power.clone();
            dp[d] = p.clone();
            let rate = d2d_rate(d, &trial, &dp);
            if rate >= cfg.q_min_d2d_bps && cue_rate >= cfg.q_min_cue_bps && best.as_ref().is_none_or(|x| rate > x.3) {
                best = Some((c, trial, p, rate));
            }
        }
        if let Some((c, trial, p, _)) = best {
            taken[c] = true;
            partner[d] = Some(c);
            d2d_power[d] = p;
            alloc = trial;
        }
    }

    let ctx = RateContext::new(cfg, cs, &alloc);
    let ue_rates = (0..nu)
        .map(|u| {
            if lay.is_d2d(u) {
                return d2d_rate(u, &alloc, &d2d_power);
            }
            let l = cs.relay_of(u);
            (0..nn)
                .filter(|&n| alloc.x[u][n])
                .map(|n| {
                    let j: f64 = lay
                        .members(l)
                        .iter()
                        .map(|&v| d2d_power[v][n] * cs.ue_relay[v][l][n])
                        .sum();
                    let den = ctx.robust_denominator(u, n) + j;
                    0.5 * b * crate::rates::log2_1p(alloc.p[u][n] * cs.h1(u, n) / den)
                })
                .sum()
        })
        .collect();

    ReferenceRun {
        cue_run,
        alloc,
        partner,
        d2d_power,
        ue_rates,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_link_gains, Layout};
    use crate::scenario::generate_topology;

    fn cfg_small() -> NetworkConfig {
        let mut cfg = NetworkConfig::default();
        cfg.num_cues = 6;
        cfg.num_d2d_pairs = 3;
        cfg.rb_count = 6;
        cfg
    }

    #[test]
    fn zero_power_zero_utility() {
        let cfg = cfg_small();
        let t = generate_topology(&cfg, 1).unwrap();
        let cs = sample_link_gains(&t, &cfg, 1);
        let a = Allocation::empty(cs.layout.num_ues(), cs.rb_count);
        let zero = vec![vec![0.0; cs.rb_count]; cs.layout.num_ues()];
        let m = build_utility_matrix(&RateContext::new(&cfg, &cs, &a), &cs.layout.members(0), &zero);
        assert!((0..m.rows()).all(|r| m.row(r).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn one_by_one_matches_scalar() {
        let cfg = NetworkConfig::default();
        let layout = Layout {
            num_relays: 1,
            num_cues: 1,
            relay_of: vec![0],
        };
        let cs = ChannelState::uniform(layout, 1, 1e-9, [0.3, 0.0, 0.0, 0.0]);
        let a = Allocation::empty(1, 1);
        let ctx = RateContext::new(&cfg, &cs, &a);
        let m = build_utility_matrix(&ctx, &[0], &[vec![0.01]]);
        assert_eq!(m.get(0, 0), ctx.robust_rate_at(0, 0, 0.01));
    }

    #[test]
    fn single_link_settles_at_cap() {
        let mut cfg = NetworkConfig::default();
        cfg.q_min_cue_bps = 1e9;
        let layout = Layout {
            num_relays: 1,
            num_cues: 1,
            relay_of: vec![0],
        };
        let cs = ChannelState::uniform(layout, 1, 1e-10, [0.0; 4]);
        let run = run_network(&cfg, &cs);
        assert!(run.iterations() <= 2);
        assert!(run.converged);
        assert!((run.alloc.p[0][0] - cfg.p_max_ue()).abs() < 1e-15);
    }

    #[test]
    fn t_max_one_records_one_iteration() {
        let mut cfg = cfg_small();
        cfg.t_max = 1;
        let t = generate_topology(&cfg, 2).unwrap();
        let cs = sample_link_gains(&t, &cfg, 2);
        let run = run_network(&cfg, &cs);
        assert_eq!(run.iterations(), 1);
        assert_eq!(run.trace.len(), cfg.num_relays);
    }

    #[test]
    fn every_round_stable_and_deterministic() {
        let cfg = cfg_small();
        let t = generate_topology(&cfg, 3).unwrap();
        let cs = sample_link_gains(&t, &cfg, 3);
        let a = run_network(&cfg, &cs);
        let b = run_network(&cfg, &cs);
        assert!(a.all_rounds_stable());
        assert_eq!(a.trace, b.trace);
        assert!(a.trace.len() <= cfg.t_max * cfg.num_relays);
    }

    #[test]
    fn reference_only_d2d_reuse() {
        let cfg = cfg_small();
        let t = generate_topology(&cfg, 4).unwrap();
        let cs = sample_link_gains(&t, &cfg, 4);
        let r = run_reference(&cfg, &cs, ReferenceCsi::Robust);
        for u in 0..cs.layout.num_ues() {
            if cs.layout.is_d2d(u) {
                assert!(r.cue_run.alloc.x[u].iter().all(|&x| !x));
                if let Some(c) = r.partner[u] {
                    for n in 0..cs.rb_count {
                        if r.d2d_power[u][n] > 0.0 {
                            assert!(r.alloc.x[c][n]);
                        }
                    }
                } else {
                    assert_eq!(r.ue_rates[u], 0.0);
                }
            }
        }
    }
}
