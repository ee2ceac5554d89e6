//! Per-RB power caps and the target-rate power update.
//!
//! A UE tracks the power `Λ` that would bring its per-RB rate to the target
//! if interference stayed put. When `Λ` exceeds the budget cap the UE falls
//! back to `min(P̃, p̂max, ϖ)` with `P̃ = p̂max`. `Λ` is additionally clamped to
//! the interference cap `ϖ` so that both branches keep the worst-case
//! interference constraints satisfied.

use serde::Serialize;

use crate::rates::RateContext;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Caps {
    /// Budget cap from the UE and relay power limits.
    pub p_hat_max: f64,
    /// Interference cap at the reference users; infinite when there is none.
    pub varpi: f64,
}

impl Caps {
    pub fn bound(&self) -> f64 {
        self.p_hat_max.min(self.varpi)
    }
}

/// Caps for `ue` on `rb` under the current allocation, or `None` when the UE
/// holds no RB (it does not transmit).
pub fn power_caps(ctx: &RateContext, ue: usize, rb: usize) -> Option<Caps> {
    let held = ctx.alloc.rb_count_of(ue);
    if held == 0 {
        return None;
    }
    let l = ctx.cs.relay_of(ue);
    let total: usize = ctx.cs.layout.members(l).iter().map(|&v| ctx.alloc.rb_count_of(v)).sum();
    Some(caps_for_counts(ctx, ue, rb, held, total))
}

/// Caps as if `ue` held `held` RBs and its relay served `relay_total` in all.
pub fn caps_for_counts(ctx: &RateContext, ue: usize, rb: usize, held: usize, relay_total: usize) -> Caps {
    let cs = ctx.cs;
    let cfg = ctx.cfg;
    let l = cs.relay_of(ue);
    let unc = cs.uncertainty();
    let h = cs.hop_ratio(ue, rb);
    let p_hat_max =
        (cfg.p_max_ue() / held as f64).min(cfg.p_max_relay() / ((h + unc.r2[l]) * relay_total as f64));
    let t1 = unc.ref1[ue][rb].map_or(f64::INFINITY, |r| cfg.i_th1() / (r.gain + unc.r3[l][rb]));
    let t2 = unc.ref2[l][rb].map_or(f64::INFINITY, |r| cfg.i_th2() / (h * r.gain + unc.r4[l][rb]));
    Caps {
        p_hat_max,
        varpi: t1.min(t2),
    }
}

/// Power that moves a link from spectral efficiency `r` to `q` (both in
/// bit/s/Hz) at fixed interference: `(2^q − 1)/(2^r − 1)·p`.
pub fn lambda(q: f64, r: f64, p: f64) -> f64 {
    (q.exp2() - 1.0) / (r.exp2() - 1.0) * p
}

/// Next power for an allocated RB. `q` and `prev_rate` are per-RB spectral
/// efficiencies; a zero previous rate leaves `Λ` undefined and takes the
/// capped branch.
pub fn update_power(q: f64, prev_rate: f64, prev_p: f64, caps: Caps) -> f64 {
    let fallback = caps.p_hat_max.min(caps.bound());
    if prev_rate <= 0.0 || prev_p <= 0.0 {
        return fallback;
    }
    let l = lambda(q, prev_rate, prev_p);
    if l <= caps.p_hat_max {
        l.min(caps.varpi)
    } else {
        fallback
    }
}
