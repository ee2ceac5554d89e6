//! Brute-force ground truth for tiny single-relay instances.
//!
//! Every RB goes to one UE or none, and every assigned RB takes one level of
//! a small power grid. With `U` UEs, `N` RBs and `G` levels that gives
//! `(1 + U·G)^N` candidates; instances are limited to `U, N ≤ 4`, `G ≤ 5`.
//!
//! The adaptive grid for an assigned `(u, n)` is zero plus `G − 1` levels
//! log-spaced from `p̂/100` to `p̂`, where `p̂` is the power cap of `u` on `n`
//! under that assignment. The grid optimum therefore bounds the continuous
//! optimum from below.

use rayon::prelude::*;

use crate::allocator::UtilityMatrix;
use crate::channel::ChannelState;
use crate::matching::{verify_stable, Matching, PreferenceProfiles, Quota};
use crate::power::power_caps;
use crate::rates::{Allocation, Mode, RateContext};
use crate::scenario::NetworkConfig;
use crate::{Error, Result};

pub const MAX_UES: usize = 4;
pub const MAX_RBS: usize = 4;
pub const MAX_LEVELS: usize = 5;
pub const MAX_CANDIDATES: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `G` levels per assigned RB, scaled to its power cap.
    Adaptive(usize),
    /// The same absolute levels (W) for every assigned RB.
    Fixed(Vec<f64>),
}

impl Grid {
    fn len(&self) -> usize {
        match self {
            Grid::Adaptive(g) => *g,
            Grid::Fixed(v) => v.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub cfg: NetworkConfig,
    pub cs: ChannelState,
    pub grid: Grid,
}

impl OracleInstance {
    pub fn new(cfg: NetworkConfig, cs: ChannelState, grid: Grid) -> Result<Self> {
        let (u, n, g) = (cs.layout.num_ues(), cs.rb_count, grid.len());
        if cs.layout.num_relays != 1 {
            return Err(Error::Invalid("oracle instances have a single relay".into()));
        }
        let size = candidate_count(u, n, g);
        if u > MAX_UES || n > MAX_RBS || g > MAX_LEVELS || size > MAX_CANDIDATES {
            return Err(Error::Guard {
                size,
                limit: MAX_CANDIDATES,
            });
        }
        if g == 0 {
            return Err(Error::Invalid("empty power grid".into()));
        }
        Ok(OracleInstance { cfg, cs, grid })
    }

    pub fn num_ues(&self) -> usize {
        self.cs.layout.num_ues()
    }

    pub fn num_rbs(&self) -> usize {
        self.cs.rb_count
    }

    fn num_assignments(&self) -> usize {
        (self.num_ues() + 1).pow(self.num_rbs() as u32)
    }

    /// Decodes assignment number `code` into RB owners.
    fn owners(&self, code: usize) -> Vec<Option<usize>> {
        decode(code, self.num_ues(), self.num_rbs())
    }

    /// Power levels of every RB under `owners` (empty when unassigned).
    fn levels(&self, owners: &[Option<usize>]) -> Vec<Vec<f64>> {
        let mut a = Allocation::empty(self.num_ues(), self.num_rbs());
        for (n, o) in owners.iter().enumerate() {
            if let Some(u) = *o {
                a.x[u][n] = true;
            }
        }
        let ctx = RateContext::new(&self.cfg, &self.cs, &a);
        owners
            .iter()
            .enumerate()
            .map(|(n, o)| match (o, &self.grid) {
                (None, _) => Vec::new(),
                (Some(_), Grid::Fixed(v)) => v.clone(),
                (Some(u), Grid::Adaptive(g)) => {
                    let cap = power_caps(&ctx, *u, n).expect("assigned").bound();
                    adaptive_levels(cap, *g)
                }
            })
            .collect()
    }

    /// Calls `f` on every power combination of assignment `code`.
    fn for_each_in(&self, code: usize, mut f: impl FnMut(&Allocation)) {
        let owners = self.owners(code);
        let levels = self.levels(&owners);
        let assigned: Vec<usize> = (0..owners.len()).filter(|&n| owners[n].is_some()).collect();
        let mut a = Allocation::empty(self.num_ues(), self.num_rbs());
        for &n in &assigned {
            a.x[owners[n].unwrap()][n] = true;
        }
        let mut digit = vec![0usize; assigned.len()];
        loop {
            for (i, &n) in assigned.iter().enumerate() {
                a.p[owners[n].unwrap()][n] = levels[n][digit[i]];
            }
            f(&a);
            let mut i = 0;
            while i < digit.len() {
                digit[i] += 1;
                if digit[i] < levels[assigned[i]].len() {
                    break;
                }
                digit[i] = 0;
                i += 1;
            }
            if i == digit.len() {
                return;
            }
        }
    }

    fn evaluate(&self, a: &Allocation, mode: Mode) -> (bool, f64) {
        let ctx = RateContext::new(&self.cfg, &self.cs, a);
        let feasible = ctx.check_constraints(mode).hard_passes();
        let rate = (0..self.num_ues()).map(|u| ctx.ue_rate(u, mode)).sum();
        (feasible, rate)
    }
}

/// `(1 + U·G)^N`, saturating.
pub fn candidate_count(u: usize, n: usize, g: usize) -> u128 {
    let base = 1 + u as u128 * g as u128;
    (0..n).try_fold(1u128, |acc, _| acc.checked_mul(base)).unwrap_or(u128::MAX)
}

/// Zero plus `g − 1` levels log-spaced over `[cap/100, cap]`.
pub fn adaptive_levels(cap: f64, g: usize) -> Vec<f64> {
    let mut v = vec![0.0];
    match g {
        0 | 1 => {}
        2 => v.push(cap),
        _ => {
            let k = (g - 2) as f64;
            v.extend((0..g - 1).map(|i| cap * 100f64.powf(i as f64 / k - 1.0)));
        }
    }
    v.truncate(g.max(1));
    v
}

fn decode(mut code: usize, num_ues: usize, num_rbs: usize) -> Vec<Option<usize>> {
    (0..num_rbs)
        .map(|_| {
            let d = code % (num_ues + 1);
            code /= num_ues + 1;
            d.checked_sub(1)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Candidate {
    pub alloc: Allocation,
    pub feasible: bool,
    pub sum_rate: f64,
}

/// Every candidate of the instance, feasibility judged on the hard
/// constraints (QoS is reported by `check_constraints` but not enforced).
pub fn enumerate_allocations(inst: &OracleInstance, mode: Mode) -> impl Iterator<Item = Candidate> + '_ {
    (0..inst.num_assignments()).flat_map(move |code| {
        let mut out = Vec::new();
        inst.for_each_in(code, |a| {
            let (feasible, sum_rate) = inst.evaluate(a, mode);
            out.push(Candidate {
                alloc: a.clone(),
                feasible,
                sum_rate,
            });
        });
        out
    })
}

#[derive(Debug, Clone)]
pub struct OracleOptimum {
    pub sum_rate: f64,
    pub alloc: Allocation,
}

/// Best feasible sum-rate over the grid.
pub fn optimal_rate(inst: &OracleInstance, mode: Mode) -> Result<OracleOptimum> {
    let best = (0..inst.num_assignments())
        .into_par_iter()
        .filter_map(|code| {
            let mut best: Option<(f64, Allocation)> = None;
            inst.for_each_in(code, |a| {
                let (ok, r) = inst.evaluate(a, mode);
                if ok && best.as_ref().is_none_or(|b| r > b.0) {
                    best = Some((r, a.clone()));
                }
            });
            best.map(|(r, a)| (code, r, a))
        })
        .reduce_with(|x, y| if y.1 > x.1 || (y.1 == x.1 && y.0 < x.0) { y } else { x });
    best.map(|(_, sum_rate, alloc)| OracleOptimum { sum_rate, alloc })
        .ok_or(Error::Infeasible)
}

/// Every assignment of RBs to at most one UE each.
pub fn all_matchings(num_ues: usize, num_rbs: usize) -> Result<impl Iterator<Item = Matching>> {
    let size = (num_ues as u128 + 1).checked_pow(num_rbs as u32).unwrap_or(u128::MAX);
    if size > MAX_CANDIDATES {
        return Err(Error::Guard {
            size,
            limit: MAX_CANDIDATES,
        });
    }
    Ok((0..size as usize).map(move |c| Matching::from_owners(num_ues, &decode(c, num_ues, num_rbs))))
}

/// All stable matchings of the profiles under the quotas.
pub fn stable_set(prefs: &PreferenceProfiles, quota: &Quota) -> Result<Vec<Matching>> {
    Ok(all_matchings(prefs.num_ues(), prefs.num_rbs())?
        .filter(|m| verify_stable(m, prefs, quota).is_stable())
        .collect())
}

/// Matchings within the quotas under which every UE's total utility is
/// strictly higher than under `current`.
pub fn strict_improvements(util: &UtilityMatrix, current: &Matching, quota: &Quota) -> Result<Vec<Matching>> {
    let total = |m: &Matching, u: usize| m.ue_rbs[u].iter().map(|&n| util.get(u, n)).sum::<f64>();
    let base: Vec<f64> = (0..util.rows()).map(|u| total(current, u)).collect();
    Ok(all_matchings(util.rows(), util.cols())?
        .filter(|m| (0..util.rows()).all(|u| m.ue_rbs[u].len() <= quota.kappa[u]))
        .filter(|m| (0..util.rows()).all(|u| total(m, u) > base[u]))
        .collect())
}
