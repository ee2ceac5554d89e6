//! SINRs, per-RB and end-to-end rates, the direct D2D rate, and feasibility
//! reports for the nominal and worst-case constraint sets.
//!
//! Second-hop power is never stored: it is `H·P` with `H = h₁/h₂`, which
//! equalizes the two hops in the interference-free case and turns the
//! two-hop rate `½·min(r₁, r₂)` into `½·B·log₂(1 + P·γ₁)`.

use serde::Serialize;

use crate::channel::{ChannelState, Hop, Perturbed};
use crate::scenario::NetworkConfig;
use crate::{Error, Result};

/// Binary RB indicator and first-hop power, both `[u][n]` over global UE ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub x: Vec<Vec<bool>>,
    pub p: Vec<Vec<f64>>,
}

impl Allocation {
    pub fn empty(num_ues: usize, num_rbs: usize) -> Self {
        Allocation {
            x: vec![vec![false; num_rbs]; num_ues],
            p: vec![vec![0.0; num_rbs]; num_ues],
        }
    }

    /// `S = x·P`, the power actually radiated.
    pub fn s(&self, u: usize, n: usize) -> f64 {
        if self.x[u][n] {
            self.p[u][n]
        } else {
            0.0
        }
    }

    pub fn rb_count_of(&self, u: usize) -> usize {
        self.x[u].iter().filter(|&&b| b).count()
    }

    pub fn assign(&mut self, u: usize, n: usize, p: f64) {
        self.x[u][n] = true;
        self.p[u][n] = p;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RateContext<'a> {
    pub cfg: &'a NetworkConfig,
    pub cs: &'a ChannelState,
    pub alloc: &'a Allocation,
}

pub fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// `½·min(r₁, r₂)`.
pub fn two_hop(r1: f64, r2: f64) -> f64 {
    0.5 * r1.min(r2)
}

pub fn q_min(cfg: &NetworkConfig, cs: &ChannelState, u: usize) -> f64 {
    if cs.layout.is_d2d(u) {
        cfg.q_min_d2d_bps
    } else {
        cfg.q_min_cue_bps
    }
}

impl<'a> RateContext<'a> {
    pub fn new(cfg: &'a NetworkConfig, cs: &'a ChannelState, alloc: &'a Allocation) -> Self {
        RateContext { cfg, cs, alloc }
    }

    fn b(&self) -> f64 {
        self.cfg.rb_bandwidth_hz
    }

    /// Hop-1 interference at `u`'s relay on RB `n` from other relays' UEs.
    pub fn interference1(&self, u: usize, n: usize) -> f64 {
        let l = self.cs.relay_of(u);
        self.cs
            .interferers(u)
            .map(|v| self.alloc.s(v, n) * self.cs.ue_relay[v][l][n])
            .sum()
    }

    fn p2(&self, v: usize, n: usize) -> f64 {
        self.cs.hop_ratio(v, n) * self.alloc.s(v, n)
    }

    /// Hop-2 interference at `u`'s destination on RB `n`.
    pub fn interference2(&self, u: usize, n: usize) -> f64 {
        let cs = self.cs;
        let l = cs.relay_of(u);
        let others = (0..cs.layout.num_ues()).filter(|&v| cs.relay_of(v) != l);
        match cs.layout.pair(u) {
            // relays forwarding CUE traffic to the eNB use orthogonal channels
            None => others
                .filter(|&v| cs.layout.is_d2d(v))
                .map(|v| self.p2(v, n) * cs.relay_enb[cs.relay_of(v)][n])
                .sum(),
            Some(k) => others.map(|v| self.p2(v, n) * cs.relay_rx[cs.relay_of(v)][k][n]).sum(),
        }
    }

    /// Unit-power SINR in 1/W.
    pub fn unit_sinr(&self, u: usize, n: usize, hop: Hop) -> f64 {
        let s2 = self.cfg.sigma2();
        match hop {
            Hop::One => self.cs.h1(u, n) / (self.interference1(u, n) + s2),
            Hop::Two => self.cs.h2(u, n) / (self.interference2(u, n) + s2),
        }
    }

    /// Closed-form end-to-end rate at first-hop power `p`.
    pub fn e2e_rate_at(&self, u: usize, n: usize, p: f64) -> f64 {
        0.5 * self.b() * log2_1p(p * self.unit_sinr(u, n, Hop::One))
    }

    /// `½·min(r₁, r₂)` with explicit per-hop powers.
    pub fn raw_rate(&self, u: usize, n: usize, p1: f64, p2: f64) -> f64 {
        let r1 = self.b() * log2_1p(p1 * self.unit_sinr(u, n, Hop::One));
        let r2 = self.b() * log2_1p(p2 * self.unit_sinr(u, n, Hop::Two));
        two_hop(r1, r2)
    }

    /// Nominal end-to-end rate at the allocated power.
    pub fn e2e_rb_rate(&self, u: usize, n: usize) -> f64 {
        self.e2e_rate_at(u, n, self.alloc.s(u, n))
    }

    /// Worst-case hop-1 interference plus noise at `u`'s relay on RB `n`.
    pub fn robust_denominator(&self, u: usize, n: usize) -> f64 {
        let cs = self.cs;
        let l = cs.relay_of(u);
        let (mut lin, mut sq) = (0.0, 0.0);
        for v in cs.interferers(u) {
            let s = self.alloc.s(v, n);
            lin += s * cs.ue_relay[v][l][n];
            sq += s * s;
        }
        lin + cs.h1(u, n) * cs.uncertainty().r1[u][n] * sq.sqrt() + self.cfg.sigma2()
    }

    /// Worst-case rate at power `p` over the normalized-gain ellipsoid.
    pub fn robust_rate_at(&self, u: usize, n: usize, p: f64) -> f64 {
        0.5 * self.b() * log2_1p(p * self.cs.h1(u, n) / self.robust_denominator(u, n))
    }

    pub fn robust_rb_rate(&self, u: usize, n: usize) -> f64 {
        self.robust_rate_at(u, n, self.alloc.s(u, n))
    }

    /// Rate at power `p` when the normalized gains take the realized values in `pert`.
    pub fn realized_rate_at(&self, pert: &Perturbed, u: usize, n: usize, p: f64) -> f64 {
        let cs = self.cs;
        let lin: f64 = cs.interferers(u).map(|v| pert.f[u][v][n] * self.alloc.s(v, n)).sum();
        let sigma_t = self.cfg.sigma2() / cs.h1(u, n);
        0.5 * self.b() * log2_1p(p / (lin + sigma_t))
    }

    /// Direct single-hop rate of a D2D transmitter at power `p` with the
    /// listed co-RB UE transmitters `(ue, power)` as interferers.
    pub fn direct_d2d_rate(&self, u: usize, n: usize, p: f64, co_tx: &[(usize, f64)]) -> Result<f64> {
        let cs = self.cs;
        let k = cs
            .layout
            .pair(u)
            .ok_or_else(|| Error::Domain(format!("UE {u} is not a D2D transmitter")))?;
        let i: f64 = co_tx.iter().filter(|(v, _)| *v != u).map(|&(v, pv)| pv * cs.ue_rx[v][k][n]).sum();
        let gamma = cs.ue_rx[u][k][n] / (i + self.cfg.sigma2());
        Ok(self.b() * log2_1p(p * gamma))
    }

    /// Per-UE sum over allocated RBs of the nominal (or worst-case) rate.
    pub fn ue_rate(&self, u: usize, mode: Mode) -> f64 {
        (0..self.cs.rb_count)
            .filter(|&n| self.alloc.x[u][n])
            .map(|n| match mode {
                Mode::Nominal => self.e2e_rb_rate(u, n),
                Mode::Robust => self.robust_rb_rate(u, n),
            })
            .sum()
    }

    pub fn check_constraints(&self, mode: Mode) -> FeasibilityReport {
        let cs = self.cs;
        let unc = cs.uncertainty();
        let robust = mode == Mode::Robust;
        let nom = Perturbed::nominal(cs);
        let w = |r: f64| if robust { r } else { 0.0 };
        self.report(
            &nom,
            |l| w(unc.r2[l]),
            |l, n| w(unc.r3[l][n]),
            |l, n| w(unc.r4[l][n]),
            |u| self.ue_rate(u, mode),
        )
    }

    /// Nominal constraint formulas evaluated at a realized perturbation.
    pub fn check_realized(&self, pert: &Perturbed) -> FeasibilityReport {
        let rate = |u: usize| {
            (0..self.cs.rb_count)
                .filter(|&n| self.alloc.x[u][n])
                .map(|n| self.realized_rate_at(pert, u, n, self.alloc.p[u][n]))
                .sum()
        };
        self.report(pert, |_| 0.0, |_, _| 0.0, |_, _| 0.0, rate)
    }

    fn report(
        &self,
        q: &Perturbed,
        r2: impl Fn(usize) -> f64,
        r3: impl Fn(usize, usize) -> f64,
        r4: impl Fn(usize, usize) -> f64,
        rate: impl Fn(usize) -> f64,
    ) -> FeasibilityReport {
        let cs = self.cs;
        let a = self.alloc;
        let unc = cs.uncertainty();
        let nn = cs.rb_count;
        let mut checks = Vec::new();
        let mut put = |family, index, rb, lhs, rhs| {
            checks.push(Check {
                family,
                index,
                rb,
                lhs,
                rhs,
            })
        };
        for l in 0..cs.layout.num_relays {
            let m = cs.layout.members(l);
            for n in 0..nn {
                let owners = m.iter().filter(|&&u| a.x[u][n]).count();
                put(Family::Exclusivity, l, Some(n), owners as f64, 1.0);
            }
            let (mut lin, mut sq) = (0.0, 0.0);
            for &u in &m {
                for n in 0..nn {
                    let s = a.s(u, n);
                    lin += q.h[u][n] * s;
                    sq += s * s;
                }
            }
            put(Family::RelayPower, l, None, lin + r2(l) * sq.sqrt(), self.cfg.p_max_relay());
            for n in 0..nn {
                let sq: f64 = m.iter().map(|&u| a.s(u, n).powi(2)).sum::<f64>().sqrt();
                if m.iter().any(|&u| unc.ref1[u][n].is_some()) {
                    let sq1: f64 = m
                        .iter()
                        .filter(|&&u| unc.ref1[u][n].is_some())
                        .map(|&u| a.s(u, n).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let lin: f64 = m.iter().map(|&u| q.g1[u][n] * a.s(u, n)).sum();
                    put(Family::Interference1, l, Some(n), lin + r3(l, n) * sq1, self.cfg.i_th1());
                }
                if unc.ref2[l][n].is_some() {
                    let lin: f64 = m.iter().map(|&u| q.hg2[u][n] * a.s(u, n)).sum();
                    put(Family::Interference2, l, Some(n), lin + r4(l, n) * sq, self.cfg.i_th2());
                }
            }
        }
        for u in 0..cs.layout.num_ues() {
            let total: f64 = (0..nn).map(|n| a.s(u, n)).sum();
            put(Family::UePower, u, None, total, self.cfg.p_max_ue());
            put(Family::Qos, u, None, q_min(self.cfg, cs, u), rate(u));
            for n in 0..nn {
                put(Family::NonNegative, u, Some(n), -a.p[u][n], 0.0);
            }
        }
        FeasibilityReport { checks }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    Nominal,
    Robust,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    /// One UE per RB within a relay.
    Exclusivity,
    /// Per-UE transmit budget.
    UePower,
    /// Per-relay forwarding budget.
    RelayPower,
    /// Interference at the hop-1 reference user.
    Interference1,
    /// Interference at the hop-2 reference user.
    Interference2,
    /// Minimum rate per UE.
    Qos,
    NonNegative,
}

/// One `lhs ≤ rhs` row of a feasibility report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub family: Family,
    /// Relay id for per-relay families, UE id otherwise.
    pub index: usize,
    pub rb: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

const REL_TOL: f64 = 1e-9;

impl Check {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    pub fn pass(&self) -> bool {
        self.lhs <= self.rhs + REL_TOL * self.rhs.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub checks: Vec<Check>,
}

impl FeasibilityReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(Check::pass)
    }

    /// Everything except the QoS family, which the quota mechanism can only
    /// pursue, not guarantee.
    pub fn hard_passes(&self) -> bool {
        self.checks.iter().filter(|c| c.family != Family::Qos).all(Check::pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass())
    }

    pub fn family(&self, f: Family) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(move |c| c.family == f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Layout;

    /// Two relays, one CUE each, one RB, unit noise.
    fn pair(h: f64, g: f64) -> (NetworkConfig, ChannelState) {
        let mut cfg = NetworkConfig::default();
        cfg.rb_bandwidth_hz = 180e3;
        cfg.noise_psd = 30.0 - 10.0 * cfg.rb_bandwidth_hz.log10();
        let layout = Layout {
            num_relays: 2,
            num_cues: 2,
            relay_of: vec![0, 1],
        };
        let mut cs = ChannelState::uniform(layout, 1, 1.0, [0.0; 4]);
        cs.ue_relay[0][0][0] = h;
        cs.ue_relay[1][0][0] = g;
        cs.refresh();
        (cfg, cs)
    }

    #[test]
    fn noise_only_unit_sinr() {
        let (cfg, cs) = pair(1.0, 1.0);
        assert!((cfg.sigma2() - 1.0).abs() < 1e-12);
        let a = Allocation::empty(2, 1);
        let ctx = RateContext::new(&cfg, &cs, &a);
        assert!((ctx.unit_sinr(0, 0, Hop::One) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_interferer_unit_sinr() {
        let (cfg, cs) = pair(1.0, 0.6);
        let mut a = Allocation::empty(2, 1);
        a.assign(1, 0, 2.0);
        let ctx = RateContext::new(&cfg, &cs, &a);
        let got = ctx.unit_sinr(0, 0, Hop::One);
        let expect = 1.0 / (2.0 * 0.6 + 1.0);
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 0.4545).abs() < 1e-4);
        let (cfg2, cs2) = pair(2.0, 0.6);
        let ctx2 = RateContext::new(&cfg2, &cs2, &a);
        assert!((ctx2.unit_sinr(0, 0, Hop::One) / got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unit_snr_gives_half_rb() {
        let (cfg, cs) = pair(1.0, 1.0);
        let a = Allocation::empty(2, 1);
        let ctx = RateContext::new(&cfg, &cs, &a);
        assert!((ctx.e2e_rate_at(0, 0, 1.0) - 90e3).abs() < 1e-6);
        assert_eq!(two_hop(2e6, 4e6), 1e6);
    }

    #[test]
    fn robust_hand_example() {
        // h̄ = 1, P = 1, one interferer S = 2 with ḡ = 0.5, absolute ξ₁ = 0.1
        let (cfg, cs) = pair(1.0, 0.5);
        // relative ξ₁ = 0.1/‖F̄‖ gives an absolute radius of 0.1
        let cs = cs.with_xi([0.1 / 0.5, 0.0, 0.0, 0.0]);
        let mut a = Allocation::empty(2, 1);
        a.assign(1, 0, 2.0);
        let ctx = RateContext::new(&cfg, &cs, &a);
        let sinr: f64 = 1.0 / (1.0 + 0.2 + 1.0);
        assert!((sinr - 0.4545).abs() < 1e-4);
        let r = ctx.robust_rate_at(0, 0, 1.0);
        assert!((r - 0.5 * 180e3 * (1.0 + sinr).log2()).abs() < 1e-6);
        assert!((r / 180e3 - 0.2703).abs() < 1e-4);
    }

    #[test]
    fn direct_rate_has_no_half_factor() {
        let layout = Layout {
            num_relays: 1,
            num_cues: 0,
            relay_of: vec![0],
        };
        let (cfg, _) = pair(1.0, 1.0);
        let cs = ChannelState::uniform(layout, 1, 1.0, [0.0; 4]);
        let a = Allocation::empty(1, 1);
        let ctx = RateContext::new(&cfg, &cs, &a);
        assert!((ctx.direct_d2d_rate(0, 0, 1.0, &[]).unwrap() - 180e3).abs() < 1e-6);
    }

    #[test]
    fn direct_rate_rejects_cue() {
        let (cfg, cs) = pair(1.0, 1.0);
        let a = Allocation::empty(2, 1);
        let ctx = RateContext::new(&cfg, &cs, &a);
        assert!(matches!(ctx.direct_d2d_rate(0, 0, 1.0, &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn budget_boundary_passes_with_zero_slack() {
        let (cfg, cs) = pair(1.0, 1.0);
        let mut a = Allocation::empty(2, 1);
        a.assign(0, 0, cfg.p_max_ue());
        let ctx = RateContext::new(&cfg, &cs, &a);
        let rep = ctx.check_constraints(Mode::Nominal);
        let c = rep.family(Family::UePower).find(|c| c.index == 0).unwrap();
        assert!(c.pass());
        assert_eq!(c.slack(), 0.0);
    }
}
