//! Many-to-one matching of RBs to UEs with quotas.
//!
//! Both sides rank the opposite side by the same utility matrix: UE `u`
//! ranks RBs by row `u`, RB `n` ranks UEs by column `n`. A pair is
//! acceptable when its utility is positive. RBs propose; a UE holds at most
//! κ RBs and, once full, drops every RB it likes less than its worst held one.
//!
//! ```
//! use relaymatch::allocator::UtilityMatrix;
//! use relaymatch::matching::{allocate_rbs, build_preferences, verify_stable, Quota};
//!
//! let u = UtilityMatrix::from_rows(&[vec![3.0, 1.0], vec![2.0, 4.0]]);
//! let prefs = build_preferences(&u);
//! let quota = Quota::uniform(2, 1);
//! let (m, _) = allocate_rbs(&prefs, &quota);
//! assert_eq!(m.rb_owner, vec![Some(0), Some(1)]);
//! assert!(verify_stable(&m, &prefs, &quota).is_stable());
//! ```

use std::cmp::Ordering;
use std::collections::{BinaryHeap, BTreeSet};

use serde::Serialize;

use crate::allocator::UtilityMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceProfiles {
    /// Per UE, acceptable RBs best first.
    pub ue: Vec<Vec<usize>>,
    /// Per RB, acceptable UEs best first.
    pub rb: Vec<Vec<usize>>,
}

impl PreferenceProfiles {
    pub fn num_ues(&self) -> usize {
        self.ue.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.rb.len()
    }

    /// Total profile length β.
    pub fn len(&self) -> usize {
        self.ue.iter().map(Vec::len).sum::<usize>() + self.rb.iter().map(Vec::len).sum::<usize>()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `rank[u][n]`: position of RB `n` on `u`'s list, `None` if unacceptable.
    pub fn ue_ranks(&self) -> Vec<Vec<Option<usize>>> {
        ranks(&self.ue, self.num_rbs())
    }

    pub fn rb_ranks(&self) -> Vec<Vec<Option<usize>>> {
        ranks(&self.rb, self.num_ues())
    }
}

fn ranks(lists: &[Vec<usize>], other: usize) -> Vec<Vec<Option<usize>>> {
    lists
        .iter()
        .map(|l| {
            let mut r = vec![None; other];
            for (i, &x) in l.iter().enumerate() {
                r[x] = Some(i);
            }
            r
        })
        .collect()
}

/// Descending by utility; equal utilities keep the lower index first.
fn order(vals: impl Iterator<Item = (usize, f64)>) -> Vec<usize> {
    let mut v: Vec<(usize, f64)> = vals.filter(|&(_, x)| x > 0.0).collect();
    v.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(i, _)| i).collect()
}

pub fn build_preferences(util: &UtilityMatrix) -> PreferenceProfiles {
    let (nu, nn) = (util.rows(), util.cols());
    PreferenceProfiles {
        ue: (0..nu).map(|u| order((0..nn).map(|n| (n, util.get(u, n))))).collect(),
        rb: (0..nn).map(|n| order((0..nu).map(|u| (u, util.get(u, n))))).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Quota {
    pub kappa: Vec<usize>,
    /// Set when even all RBs together cannot meet the UE's rate target.
    pub infeasible: Vec<bool>,
}

impl Quota {
    pub fn uniform(num_ues: usize, k: usize) -> Self {
        Quota {
            kappa: vec![k; num_ues],
            infeasible: vec![false; num_ues],
        }
    }
}

/// Smallest `k` whose `k` best entries of row `u` reach `q_min[u]`; capped at
/// N with the infeasible flag when the whole row falls short.
pub fn compute_quota(util: &UtilityMatrix, q_min: &[f64]) -> Quota {
    let nn = util.cols();
    let mut q = Quota::uniform(util.rows(), nn);
    for u in 0..util.rows() {
        let mut row: Vec<f64> = (0..nn).map(|n| util.get(u, n)).collect();
        row.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        let mut acc = 0.0;
        let mut k = None;
        for (i, x) in row.iter().enumerate() {
            acc += x;
            if acc >= q_min[u] {
                k = Some(i + 1);
                break;
            }
        }
        match k {
            Some(k) => q.kappa[u] = k,
            None => q.infeasible[u] = true,
        }
    }
    q
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub rb_owner: Vec<Option<usize>>,
    /// Held RBs per UE, ascending index.
    pub ue_rbs: Vec<BTreeSet<usize>>,
}

impl Matching {
    pub fn empty(num_ues: usize, num_rbs: usize) -> Self {
        Matching {
            rb_owner: vec![None; num_rbs],
            ue_rbs: vec![BTreeSet::new(); num_ues],
        }
    }

    pub fn from_owners(num_ues: usize, owners: &[Option<usize>]) -> Self {
        let mut m = Matching::empty(num_ues, owners.len());
        for (n, o) in owners.iter().enumerate() {
            if let Some(u) = *o {
                m.rb_owner[n] = Some(u);
                m.ue_rbs[u].insert(n);
            }
        }
        m
    }

    pub fn is_consistent(&self) -> bool {
        self.rb_owner
            .iter()
            .enumerate()
            .all(|(n, o)| o.is_none_or(|u| self.ue_rbs[u].contains(&n)))
            && self
                .ue_rbs
                .iter()
                .enumerate()
                .all(|(u, s)| s.iter().all(|&n| self.rb_owner[n] == Some(u)))
    }

    pub fn matched_pairs(&self) -> usize {
        self.rb_owner.iter().flatten().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AllocStats {
    /// Tentative RB → UE assignments made.
    pub proposals: usize,
    /// UEs left holding fewer than κ RBs.
    pub unmet_quota: Vec<usize>,
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct Held {
    rank: usize,
    rb: usize,
}

/// RB-proposing deferred acceptance with quotas and profile pruning.
///
/// Free RBs propose lowest index first. Each RB moves down its own list and
/// never proposes to the same UE twice, so the proposal count is at most N·U.
pub fn allocate_rbs(prefs: &PreferenceProfiles, quota: &Quota) -> (Matching, AllocStats) {
    let (nu, nn) = (prefs.num_ues(), prefs.num_rbs());
    // rank of RB n on u's list at [u·N + n], u32::MAX if unacceptable
    let mut ue_rank = vec![u32::MAX; nu * nn];
    for (u, list) in prefs.ue.iter().enumerate() {
        for (r, &n) in list.iter().enumerate() {
            ue_rank[u * nn + n] = r as u32;
        }
    }
    let mut next = vec![0usize; nn];
    // worst rank each UE still accepts; successors of it are pruned
    let mut cutoff: Vec<usize> = vec![usize::MAX; nu];
    let mut held: Vec<BinaryHeap<Held>> = (0..nu).map(|_| BinaryHeap::new()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; nn];
    let mut free: BinaryHeap<std::cmp::Reverse<usize>> = (0..nn).map(std::cmp::Reverse).collect();
    let mut proposals = 0;

    while let Some(std::cmp::Reverse(n)) = free.pop() {
        let list = &prefs.rb[n];
        let mut target = None;
        while next[n] < list.len() {
            let u = list[next[n]];
            next[n] += 1;
            let r = ue_rank[u * nn + n];
            if r != u32::MAX && r as usize <= cutoff[u] {
                target = Some((u, r as usize));
                break;
            }
        }
        let Some((u, r)) = target else { continue };
        proposals += 1;
        owner[n] = Some(u);
        held[u].push(Held { rank: r, rb: n });
        if held[u].len() > quota.kappa[u] {
            let worst = held[u].pop().expect("over quota implies non-empty");
            owner[worst.rb] = None;
            free.push(std::cmp::Reverse(worst.rb));
        }
        if held[u].len() == quota.kappa[u] {
            cutoff[u] = held[u].peek().map_or(usize::MAX, |h| h.rank);
        }
    }

    let m = Matching::from_owners(nu, &owner);
    let unmet_quota = (0..nu).filter(|&u| m.ue_rbs[u].len() < quota.kappa[u]).collect();
    (
        m,
        AllocStats {
            proposals,
            unmet_quota,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    /// `(ue, rb)` prefer each other to what the matching gives them.
    Blocking { ue: usize, rb: usize },
    /// A matched pair that one side finds unacceptable.
    Unacceptable { ue: usize, rb: usize },
    /// A UE holding more than κ RBs.
    OverQuota { ue: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct StabilityReport {
    pub violations: Vec<Violation>,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn blocking_pairs(&self) -> Vec<(usize, usize)> {
        self.violations
            .iter()
            .filter_map(|v| match *v {
                Violation::Blocking { ue, rb } => Some((ue, rb)),
                _ => None,
            })
            .collect()
    }
}

/// Lists every blocking pair and individual-rationality violation.
pub fn verify_stable(m: &Matching, prefs: &PreferenceProfiles, quota: &Quota) -> StabilityReport {
    let ue_rank = prefs.ue_ranks();
    let rb_rank = prefs.rb_ranks();
    let mut out = Vec::new();
    for (u, rbs) in m.ue_rbs.iter().enumerate() {
        if rbs.len() > quota.kappa[u] {
            out.push(Violation::OverQuota { ue: u });
        }
        for &n in rbs {
            if ue_rank[u][n].is_none() || rb_rank[n][u].is_none() {
                out.push(Violation::Unacceptable { ue: u, rb: n });
            }
        }
    }
    for u in 0..prefs.num_ues() {
        let worst_held = m.ue_rbs[u].iter().filter_map(|&n| ue_rank[u][n]).max();
        for n in 0..prefs.num_rbs() {
            if m.rb_owner[n] == Some(u) {
                continue;
            }
            let (Some(ru), Some(rn)) = (ue_rank[u][n], rb_rank[n][u]) else {
                continue;
            };
            let rb_wants = match m.rb_owner[n] {
                None => true,
                Some(o) => rb_rank[n][o].is_none_or(|ro| rn < ro),
            };
            let ue_wants = m.ue_rbs[u].len() < quota.kappa[u] || worst_held.is_some_and(|w| ru < w);
            if rb_wants && ue_wants {
                out.push(Violation::Blocking { ue: u, rb: n });
            }
        }
    }
    StabilityReport { violations: out }
}
