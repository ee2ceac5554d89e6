//! Link gains, normalized gains, reference users and bounded perturbations.
//!
//! Gains are linear power gains: log-distance path loss times log-normal
//! shadowing (one draw per node pair) times unit-mean exponential Rayleigh
//! power (one draw per RB). Uncertainty bounds are relative: a bound `ξ`
//! gives an ellipsoid whose radius is `ξ` times the norm of the nominal
//! vector it perturbs.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scenario::{NetworkConfig, Point, Topology, UeKind};
use crate::{Error, Result};

/// Who is served by whom; copied out of the [`Topology`] so channel-level
/// computations are self-contained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub num_relays: usize,
    pub num_cues: usize,
    pub relay_of: Vec<usize>,
}

impl Layout {
    pub fn from_topology(t: &Topology) -> Self {
        Layout {
            num_relays: t.num_relays(),
            num_cues: t.ues.iter().filter(|u| u.kind == UeKind::Cue).count(),
            relay_of: t.ues.iter().map(|u| u.relay).collect(),
        }
    }

    pub fn num_ues(&self) -> usize {
        self.relay_of.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.num_ues() - self.num_cues
    }

    pub fn is_d2d(&self, u: usize) -> bool {
        u >= self.num_cues
    }

    /// Pair index of a D2D transmitter.
    pub fn pair(&self, u: usize) -> Option<usize> {
        self.is_d2d(u).then(|| u - self.num_cues)
    }

    pub fn members(&self, relay: usize) -> Vec<usize> {
        (0..self.num_ues()).filter(|&u| self.relay_of[u] == relay).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hop {
    One,
    Two,
}

/// Worst-case interference victim for a UE on an RB: a relay id for hop 1,
/// a D2D transmitter's UE id (standing for its receiver) for hop 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefUser {
    pub id: usize,
    pub gain: f64,
}

/// Absolute ellipsoid radii and reference users derived from the nominal
/// gains and the relative bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Uncertainty {
    /// `[u][n]` radius of the normalized-gain ellipsoid.
    pub r1: Vec<Vec<f64>>,
    /// `[l]` radius of the hop-ratio ellipsoid.
    pub r2: Vec<f64>,
    /// `[l][n]` radius of the hop-1 reference-gain ellipsoid.
    pub r3: Vec<Vec<f64>>,
    /// `[l][n]` radius of the hop-2 reference-gain ellipsoid.
    pub r4: Vec<Vec<f64>>,
    pub ref1: Vec<Vec<Option<RefUser>>>,
    pub ref2: Vec<Vec<Option<RefUser>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub layout: Layout,
    pub rb_count: usize,
    /// `[u][l][n]` UE → relay, hop 1. The serving relay entry is `h`.
    pub ue_relay: Vec<Vec<Vec<f64>>>,
    /// `[l][n]` relay → eNB, hop 2.
    pub relay_enb: Vec<Vec<f64>>,
    /// `[l][k][n]` relay → receiver of pair `k`, hop 2.
    pub relay_rx: Vec<Vec<Vec<f64>>>,
    /// `[u][k][n]` UE → receiver of pair `k`; `ue_rx[C+k][k]` is the direct D2D link.
    pub ue_rx: Vec<Vec<Vec<f64>>>,
    /// Relative bounds ξ₁..ξ₄.
    pub xi: [f64; 4],
    unc: Uncertainty,
}

impl ChannelState {
    /// All gains set to `fill`; callers overwrite what they need and then call
    /// [`ChannelState::refresh`].
    pub fn uniform(layout: Layout, rb_count: usize, fill: f64, xi: [f64; 4]) -> Self {
        let (u, l, k, n) = (layout.num_ues(), layout.num_relays, layout.num_pairs(), rb_count);
        let mut cs = ChannelState {
            ue_relay: vec![vec![vec![fill; n]; l]; u],
            relay_enb: vec![vec![fill; n]; l],
            relay_rx: vec![vec![vec![fill; n]; k]; l],
            ue_rx: vec![vec![vec![fill; n]; k]; u],
            layout,
            rb_count,
            xi,
            unc: Uncertainty::default(),
        };
        cs.refresh();
        cs
    }

    /// Recomputes reference users and ellipsoid radii after gains or bounds change.
    pub fn refresh(&mut self) {
        self.unc = compute_uncertainty(self);
    }

    pub fn with_xi(mut self, xi: [f64; 4]) -> Self {
        self.xi = xi;
        self.refresh();
        self
    }

    pub fn uncertainty(&self) -> &Uncertainty {
        &self.unc
    }

    pub fn relay_of(&self, u: usize) -> usize {
        self.layout.relay_of[u]
    }

    /// Direct hop-1 gain `h_{u,l,1}`.
    pub fn h1(&self, u: usize, n: usize) -> f64 {
        self.ue_relay[u][self.relay_of(u)][n]
    }

    /// Direct hop-2 gain: relay → eNB for a CUE, relay → receiver for a D2D UE.
    pub fn h2(&self, u: usize, n: usize) -> f64 {
        let l = self.relay_of(u);
        match self.layout.pair(u) {
            Some(k) => self.relay_rx[l][k][n],
            None => self.relay_enb[l][n],
        }
    }

    /// Hop power ratio `H = h₁/h₂`.
    pub fn hop_ratio(&self, u: usize, n: usize) -> f64 {
        self.h1(u, n) / self.h2(u, n)
    }

    /// Direct transmitter → receiver gain of a D2D UE.
    pub fn direct(&self, u: usize, n: usize) -> Option<f64> {
        self.layout.pair(u).map(|k| self.ue_rx[u][k][n])
    }

    /// UEs served by relays other than `u`'s.
    pub fn interferers(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let l = self.relay_of(u);
        (0..self.layout.num_ues()).filter(move |&v| self.relay_of(v) != l)
    }

    pub fn all_gains_positive(&self) -> bool {
        let pos = |v: &f64| *v > 0.0 && v.is_finite();
        self.ue_relay.iter().flatten().flatten().all(pos)
            && self.relay_enb.iter().flatten().all(pos)
            && self.relay_rx.iter().flatten().flatten().all(pos)
            && self.ue_rx.iter().flatten().flatten().all(pos)
    }
}

/// Linear path gain for a link of length `d` metres.
pub fn path_gain(d: f64, exponent: f64, ref_db: f64) -> f64 {
    let loss_db = ref_db + 10.0 * exponent * d.max(1.0).log10();
    10f64.powf(-loss_db / 10.0)
}

pub fn sample_link_gains(topo: &Topology, cfg: &NetworkConfig, seed: u64) -> ChannelState {
    let layout = Layout::from_topology(topo);
    let n = cfg.rb_count;
    let mut cs = ChannelState::uniform(layout, n, 0.0, cfg.xi());
    let mut rng = crate::rng(seed, 1);
    let shadow = Normal::new(0.0, cfg.shadowing_db).expect("shadowing std is finite");
    let link = |rng: &mut rand_chacha::ChaCha8Rng, a: Point, b: Point, exp: f64| -> Vec<f64> {
        let large = path_gain(a.dist(&b), exp, cfg.pathloss_ref_db) * 10f64.powf(shadow.sample(rng) / 10.0);
        (0..n)
            .map(|_| {
                let f: f64 = Exp1.sample(rng);
                (large * f).max(f64::MIN_POSITIVE)
            })
            .collect()
    };

    let rx: Vec<Point> = (0..topo.num_ues()).filter_map(|u| topo.d2d_rx(u)).collect();
    for (u, ue) in topo.ues.iter().enumerate() {
        for (l, r) in topo.relay_positions.iter().enumerate() {
            cs.ue_relay[u][l] = link(&mut rng, ue.position, *r, cfg.pathloss_exp_ue);
        }
        for (k, p) in rx.iter().enumerate() {
            cs.ue_rx[u][k] = link(&mut rng, ue.position, *p, cfg.pathloss_exp_ue);
        }
    }
    for (l, r) in topo.relay_positions.iter().enumerate() {
        cs.relay_enb[l] = link(&mut rng, *r, topo.enb, cfg.pathloss_exp_relay);
        for (k, p) in rx.iter().enumerate() {
            cs.relay_rx[l][k] = link(&mut rng, *r, *p, cfg.pathloss_exp_ue);
        }
    }
    cs.refresh();
    cs
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGain {
    /// `[u][v][n]` = ḡ_{v,l,1}/h̄_{u,l,1} for interferers `v`; zero for same-relay UEs.
    pub f_bar: Vec<Vec<Vec<f64>>>,
    /// `[u][n]` = σ²/h̄_{u,l,1}.
    pub sigma_t: Vec<Vec<f64>>,
}

pub fn normalized_gain(cs: &ChannelState, sigma2: f64) -> Result<NormalizedGain> {
    let (nu, nn) = (cs.layout.num_ues(), cs.rb_count);
    let mut f_bar = vec![vec![vec![0.0; nn]; nu]; nu];
    let mut sigma_t = vec![vec![0.0; nn]; nu];
    for u in 0..nu {
        let l = cs.relay_of(u);
        for n in 0..nn {
            let h = cs.h1(u, n);
            if h <= 0.0 {
                return Err(Error::DegenerateChannel { ue: u, rb: n });
            }
            sigma_t[u][n] = sigma2 / h;
            for v in cs.interferers(u) {
                f_bar[u][v][n] = cs.ue_relay[v][l][n] / h;
            }
        }
    }
    Ok(NormalizedGain { f_bar, sigma_t })
}

pub fn reference_user(cs: &ChannelState, relay: usize, ue: usize, hop: Hop, rb: usize) -> Option<RefUser> {
    let cands: Vec<RefUser> = match hop {
        Hop::One => (0..cs.layout.num_relays)
            .filter(|&j| j != relay)
            .map(|j| RefUser {
                id: j,
                gain: cs.ue_relay[ue][j][rb],
            })
            .collect(),
        Hop::Two => (0..cs.layout.num_ues())
            .filter(|&v| cs.layout.is_d2d(v) && cs.relay_of(v) != relay)
            .map(|v| RefUser {
                id: v,
                gain: cs.relay_rx[relay][v - cs.layout.num_cues][rb],
            })
            .collect(),
    };
    argmax(&cands)
}

fn argmax(c: &[RefUser]) -> Option<RefUser> {
    let mut best: Option<RefUser> = None;
    for r in c {
        if best.is_none_or(|b| r.gain > b.gain) {
            best = Some(*r);
        }
    }
    best
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

fn compute_uncertainty(cs: &ChannelState) -> Uncertainty {
    let lay = &cs.layout;
    let (nu, nl, nn) = (lay.num_ues(), lay.num_relays, cs.rb_count);
    let [x1, x2, x3, x4] = cs.xi;
    let ref1: Vec<Vec<_>> = (0..nu)
        .map(|u| (0..nn).map(|n| reference_user(cs, cs.relay_of(u), u, Hop::One, n)).collect())
        .collect();
    let ref2: Vec<Vec<_>> = (0..nl)
        .map(|l| (0..nn).map(|n| reference_user(cs, l, 0, Hop::Two, n)).collect())
        .collect();
    let r1 = (0..nu)
        .map(|u| {
            let l = cs.relay_of(u);
            (0..nn)
                .map(|n| x1 * norm(cs.interferers(u).map(|v| cs.ue_relay[v][l][n])) / cs.h1(u, n))
                .collect()
        })
        .collect();
    let members: Vec<Vec<usize>> = (0..nl).map(|l| lay.members(l)).collect();
    let r2 = members
        .iter()
        .map(|m| x2 * norm(m.iter().flat_map(|&u| (0..nn).map(move |n| cs.hop_ratio(u, n)))))
        .collect();
    let r3 = members
        .iter()
        .map(|m| {
            (0..nn)
                .map(|n| x3 * norm(m.iter().filter_map(|&u| ref1[u][n].map(|r| r.gain))))
                .collect()
        })
        .collect();
    let r4 = members
        .iter()
        .enumerate()
        .map(|(l, m)| {
            (0..nn)
                .map(|n| match ref2[l][n] {
                    Some(r) => x4 * norm(m.iter().map(|&u| cs.hop_ratio(u, n) * r.gain)),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    Uncertainty {
        r1,
        r2,
        r3,
        r4,
        ref1,
        ref2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spread {
    /// Uniform inside each ellipsoid.
    Interior,
    /// On the surface of each ellipsoid (before clipping at zero gain).
    Boundary,
}

/// One realization of the uncertain quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    /// `[u][v][n]` realized normalized gains F = F̄ + ΔF.
    pub f: Vec<Vec<Vec<f64>>>,
    /// `[u][n]` realized hop ratio H̄ + ΔH.
    pub h: Vec<Vec<f64>>,
    /// `[u][n]` realized hop-1 reference gain; zero when there is no victim.
    pub g1: Vec<Vec<f64>>,
    /// `[u][n]` realized hop-2 reference coefficient H̄ḡ* + Δ(Hg*); zero without victim.
    pub hg2: Vec<Vec<f64>>,
}

impl Perturbed {
    pub fn nominal(cs: &ChannelState) -> Self {
        let lay = &cs.layout;
        let (nu, nn) = (lay.num_ues(), cs.rb_count);
        let unc = cs.uncertainty();
        let mut f = vec![vec![vec![0.0; nn]; nu]; nu];
        for (u, fu) in f.iter_mut().enumerate() {
            let l = cs.relay_of(u);
            for v in cs.interferers(u) {
                for n in 0..nn {
                    fu[v][n] = cs.ue_relay[v][l][n] / cs.h1(u, n);
                }
            }
        }
        let h = (0..nu).map(|u| (0..nn).map(|n| cs.hop_ratio(u, n)).collect()).collect();
        let g1 = (0..nu)
            .map(|u| (0..nn).map(|n| unc.ref1[u][n].map_or(0.0, |r| r.gain)).collect())
            .collect();
        let hg2 = (0..nu)
            .map(|u| {
                let l = cs.relay_of(u);
                (0..nn)
                    .map(|n| unc.ref2[l][n].map_or(0.0, |r| r.gain * cs.hop_ratio(u, n)))
                    .collect()
            })
            .collect();
        Perturbed { f, h, g1, hg2 }
    }
}

/// Random vector of length `k` inside (or on) the ball of radius `r`.
fn ball<R: Rng>(rng: &mut R, k: usize, r: f64, spread: Spread) -> Vec<f64> {
    if k == 0 || r == 0.0 {
        return vec![0.0; k];
    }
    let mut v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let len = norm(v.iter().copied());
    let radius = match spread {
        Spread::Interior => r * rng.random::<f64>().powf(1.0 / k as f64),
        Spread::Boundary => r,
    };
    for x in v.iter_mut() {
        *x *= radius / len;
    }
    v
}

/// Adds `d` to `nominal` without letting the realized value go negative.
/// Clipping only shrinks a component, so the vector stays in its ellipsoid.
fn clip_add(nominal: f64, d: f64) -> f64 {
    (nominal + d).max(0.0)
}

pub fn sample_perturbation(cs: &ChannelState, seed: u64, spread: Spread) -> Perturbed {
    let mut p = Perturbed::nominal(cs);
    let mut rng = crate::rng(seed, 2);
    let lay = &cs.layout;
    let unc = cs.uncertainty();
    let nn = cs.rb_count;

    for u in 0..lay.num_ues() {
        let vs: Vec<usize> = cs.interferers(u).collect();
        for n in 0..nn {
            let d = ball(&mut rng, vs.len(), unc.r1[u][n], spread);
            for (i, &v) in vs.iter().enumerate() {
                p.f[u][v][n] = clip_add(p.f[u][v][n], d[i]);
            }
        }
    }
    for l in 0..lay.num_relays {
        let m = lay.members(l);
        let d = ball(&mut rng, m.len() * nn, unc.r2[l], spread);
        for (i, &u) in m.iter().enumerate() {
            for n in 0..nn {
                p.h[u][n] = clip_add(p.h[u][n], d[i * nn + n]);
            }
        }
        for n in 0..nn {
            let with_victim: Vec<usize> = m.iter().copied().filter(|&u| unc.ref1[u][n].is_some()).collect();
            let d = ball(&mut rng, with_victim.len(), unc.r3[l][n], spread);
            for (i, &u) in with_victim.iter().enumerate() {
                p.g1[u][n] = clip_add(p.g1[u][n], d[i]);
            }
            if unc.ref2[l][n].is_some() {
                let d = ball(&mut rng, m.len(), unc.r4[l][n], spread);
                for (i, &u) in m.iter().enumerate() {
                    p.hg2[u][n] = clip_add(p.hg2[u][n], d[i]);
                }
            }
        }
    }
    p
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpRow {
    link: String,
    hop: u8,
    rb: usize,
    gain: f64,
}

#[derive(Serialize, Deserialize)]
struct DumpHeader {
    #[serde(flatten)]
    layout: Layout,
    rb_count: usize,
}

/// Writes every nominal gain as `link,hop,rb,gain` rows. Hop 0 marks the
/// single-hop UE → D2D-receiver links. A leading `#` line carries the layout
/// as JSON so the dump can be replayed on its own.
pub fn dump_channel(cs: &ChannelState, path: &Path) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let header = DumpHeader {
        layout: cs.layout.clone(),
        rb_count: cs.rb_count,
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::format(path, e))?;
    writeln!(file, "# {json}").map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut put = |link: String, hop: u8, gains: &[f64]| -> Result<()> {
        for (rb, &gain) in gains.iter().enumerate() {
            w.serialize(DumpRow {
                link: link.clone(),
                hop,
                rb,
                gain,
            })
            .map_err(|e| Error::format(path, e))?;
        }
        Ok(())
    };
    for (u, per_relay) in cs.ue_relay.iter().enumerate() {
        for (l, g) in per_relay.iter().enumerate() {
            put(format!("ue{u}>relay{l}"), 1, g)?;
        }
    }
    for (l, g) in cs.relay_enb.iter().enumerate() {
        put(format!("relay{l}>enb"), 2, g)?;
    }
    for (l, per_pair) in cs.relay_rx.iter().enumerate() {
        for (k, g) in per_pair.iter().enumerate() {
            put(format!("relay{l}>rx{k}"), 2, g)?;
        }
    }
    for (u, per_pair) in cs.ue_rx.iter().enumerate() {
        for (k, g) in per_pair.iter().enumerate() {
            put(format!("ue{u}>rx{k}"), 0, g)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_id(s: &str, prefix: &str) -> Option<usize> {
    s.strip_prefix(prefix)?.parse().ok()
}

/// Reads a dump written by [`dump_channel`]. Every gain of the recorded
/// layout must be present.
pub fn load_channel(path: &Path, xi: [f64; 4]) -> Result<ChannelState> {
    let bad = |m: String| Error::format(path, m);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let json = first.strip_prefix("# ").ok_or_else(|| bad("missing layout line".into()))?;
    let DumpHeader { layout, rb_count } = serde_json::from_str(json).map_err(|e| Error::format(path, e))?;
    if layout.num_cues > layout.num_ues() || layout.relay_of.iter().any(|&l| l >= layout.num_relays) {
        return Err(bad("inconsistent layout line".into()));
    }
    let mut cs = ChannelState::uniform(layout, rb_count, f64::NAN, xi);
    let mut r = csv::Reader::from_reader(rest.as_bytes());
    for row in r.deserialize() {
        let row: DumpRow = row.map_err(|e| Error::format(path, e))?;
        let (a, b) = row
            .link
            .split_once('>')
            .ok_or_else(|| bad(format!("malformed link id {}", row.link)))?;
        if row.rb >= rb_count {
            return Err(bad(format!("rb {} out of range", row.rb)));
        }
        let slot = match (parse_id(a, "ue"), parse_id(a, "relay")) {
            (Some(u), _) => match (parse_id(b, "relay"), parse_id(b, "rx")) {
                (Some(l), _) => cs.ue_relay.get_mut(u).and_then(|x| x.get_mut(l)),
                (_, Some(k)) => cs.ue_rx.get_mut(u).and_then(|x| x.get_mut(k)),
                _ => None,
            },
            (_, Some(l)) if b == "enb" => cs.relay_enb.get_mut(l),
            (_, Some(l)) => parse_id(b, "rx").and_then(|k| cs.relay_rx.get_mut(l).and_then(|x| x.get_mut(k))),
            _ => None,
        };
        let slot = slot.ok_or_else(|| bad(format!("link {} does not fit the layout", row.link)))?;
        slot[row.rb] = row.gain;
    }
    let complete = cs.ue_relay.iter().flatten().flatten().all(|g| !g.is_nan())
        && cs.relay_enb.iter().flatten().all(|g| !g.is_nan())
        && cs.relay_rx.iter().flatten().flatten().all(|g| !g.is_nan())
        && cs.ue_rx.iter().flatten().flatten().all(|g| !g.is_nan());
    if !complete {
        return Err(bad("dump does not cover every link of the layout".into()));
    }
    cs.refresh();
    Ok(cs)
}
