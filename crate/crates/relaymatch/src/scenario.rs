//! Experiment configuration and reproducible network layouts.
//!
//! The cell is a `cell_side_m` square with the eNB at its center. Relays sit
//! evenly spaced on a circle of radius `cell_side_m / 4`, CUEs are uniform in
//! the cell, D2D transmitters are uniform in a disc of radius `d_rd_m` around
//! a relay and each receiver lies on the circle of radius `d_dd_m` around its
//! transmitter. UEs are then associated to the nearest relay.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Keys that must be present in every configuration document.
pub const REQUIRED_KEYS: [&str; 3] = ["num_cues", "num_d2d_pairs", "rb_count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub cell_side_m: f64,
    pub num_relays: usize,
    pub num_cues: usize,
    pub num_d2d_pairs: usize,
    pub d_rd_m: f64,
    pub d_dd_m: f64,
    pub rb_count: usize,
    pub rb_bandwidth_hz: f64,
    /// Thermal noise density in dBm/Hz.
    pub noise_psd: f64,
    pub p_max_ue_dbm: f64,
    pub p_max_relay_dbm: f64,
    pub i_th1_dbm: f64,
    pub i_th2_dbm: f64,
    pub q_min_cue_bps: f64,
    pub q_min_d2d_bps: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub xi3: f64,
    pub xi4: f64,
    pub t_max: usize,
    /// Convergence threshold on per-relay sum-rate change, bit/s.
    pub epsilon: f64,
    pub realizations: usize,
    pub seed: u64,
    pub pathloss_exp_ue: f64,
    pub pathloss_exp_relay: f64,
    /// Path loss at 1 m, dB.
    pub pathloss_ref_db: f64,
    pub shadowing_db: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            cell_side_m: 700.0,
            num_relays: 3,
            num_cues: 15,
            num_d2d_pairs: 9,
            d_rd_m: 50.0,
            d_dd_m: 50.0,
            rb_count: 12,
            rb_bandwidth_hz: 180e3,
            noise_psd: -174.0,
            p_max_ue_dbm: 23.0,
            p_max_relay_dbm: 30.0,
            i_th1_dbm: -70.0,
            i_th2_dbm: -70.0,
            q_min_cue_bps: 128e3,
            q_min_d2d_bps: 128e3,
            xi1: 0.0,
            xi2: 0.0,
            xi3: 0.0,
            xi4: 0.0,
            t_max: 50,
            epsilon: 100.0,
            realizations: 200,
            seed: 1,
            pathloss_exp_ue: 3.5,
            pathloss_exp_relay: 3.0,
            pathloss_ref_db: 38.5,
            shadowing_db: 8.0,
        }
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl NetworkConfig {
    pub fn num_ues(&self) -> usize {
        self.num_cues + self.num_d2d_pairs
    }

    /// σ² = N₀·B_RB in watts.
    pub fn sigma2(&self) -> f64 {
        dbm_to_w(self.noise_psd) * self.rb_bandwidth_hz
    }

    pub fn p_max_ue(&self) -> f64 {
        dbm_to_w(self.p_max_ue_dbm)
    }

    pub fn p_max_relay(&self) -> f64 {
        dbm_to_w(self.p_max_relay_dbm)
    }

    pub fn i_th1(&self) -> f64 {
        dbm_to_w(self.i_th1_dbm)
    }

    pub fn i_th2(&self) -> f64 {
        dbm_to_w(self.i_th2_dbm)
    }

    pub fn xi(&self) -> [f64; 4] {
        [self.xi1, self.xi2, self.xi3, self.xi4]
    }

    /// Sets all four uncertainty bounds to `xi`.
    pub fn set_xi(&mut self, xi: f64) {
        self.xi1 = xi;
        self.xi2 = xi;
        self.xi3 = xi;
        self.xi4 = xi;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        for (name, v) in [
            ("num_relays", self.num_relays),
            ("rb_count", self.rb_count),
            ("t_max", self.t_max),
            ("realizations", self.realizations),
        ] {
            if v < 1 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.num_ues() < 1 {
            return bad("at least one UE is required".into());
        }
        for (name, v) in [
            ("cell_side_m", self.cell_side_m),
            ("rb_bandwidth_hz", self.rb_bandwidth_hz),
            ("d_dd_m", self.d_dd_m),
            ("epsilon", self.epsilon),
            ("pathloss_exp_ue", self.pathloss_exp_ue),
            ("pathloss_exp_relay", self.pathloss_exp_relay),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("d_rd_m", self.d_rd_m),
            ("q_min_cue_bps", self.q_min_cue_bps),
            ("q_min_d2d_bps", self.q_min_d2d_bps),
            ("shadowing_db", self.shadowing_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("noise_psd", self.noise_psd),
            ("p_max_ue_dbm", self.p_max_ue_dbm),
            ("p_max_relay_dbm", self.p_max_relay_dbm),
            ("i_th1_dbm", self.i_th1_dbm),
            ("i_th2_dbm", self.i_th2_dbm),
            ("pathloss_ref_db", self.pathloss_ref_db),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        for (i, x) in self.xi().iter().enumerate() {
            if !(0.0..1.0).contains(x) {
                return bad(format!("xi{} must lie in [0, 1), got {x}", i + 1));
            }
        }
        Ok(())
    }
}

/// Parses and validates a TOML configuration document.
pub fn load_config(source: &str) -> Result<NetworkConfig> {
    let table: toml::Table = source.parse().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    for key in REQUIRED_KEYS {
        if !table.contains_key(key) {
            return Err(Error::MissingKey(key));
        }
    }
    let cfg: NetworkConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: &Path) -> Result<NetworkConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_config(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum UeKind {
    Cue,
    D2d { rx: Point },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeRecord {
    pub kind: UeKind,
    pub position: Point,
    pub relay: usize,
}

/// UEs are indexed CUEs first, then D2D transmitters; D2D pair `k` is UE
/// `num_cues + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cell_side_m: f64,
    pub enb: Point,
    pub relay_positions: Vec<Point>,
    pub ues: Vec<UeRecord>,
}

impl Topology {
    pub fn num_relays(&self) -> usize {
        self.relay_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    /// Global UE ids served by `relay`, ascending.
    pub fn members(&self, relay: usize) -> Vec<usize> {
        (0..self.ues.len()).filter(|&u| self.ues[u].relay == relay).collect()
    }

    pub fn d2d_rx(&self, ue: usize) -> Option<Point> {
        match self.ues[ue].kind {
            UeKind::D2d { rx } => Some(rx),
            UeKind::Cue => None,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.cell_side_m).contains(&p.x) && (0.0..=self.cell_side_m).contains(&p.y)
    }
}

pub fn relay_positions(cfg: &NetworkConfig) -> Vec<Point> {
    let c = cfg.cell_side_m / 2.0;
    let r = cfg.cell_side_m / 4.0;
    (0..cfg.num_relays)
        .map(|l| {
            let a = 2.0 * PI * l as f64 / cfg.num_relays as f64 + PI / 2.0;
            Point::new(c + r * a.cos(), c + r * a.sin())
        })
        .collect()
}

const MAX_TRIES: usize = 10_000;

pub fn generate_topology(cfg: &NetworkConfig, seed: u64) -> Result<Topology> {
    cfg.validate()?;
    let mut rng = crate::rng(seed, 0);
    let side = cfg.cell_side_m;
    let relays = relay_positions(cfg);
    let mut topo = Topology {
        cell_side_m: side,
        enb: Point::new(side / 2.0, side / 2.0),
        relay_positions: relays.clone(),
        ues: Vec::with_capacity(cfg.num_ues()),
    };

    for _ in 0..cfg.num_cues {
        let p = Point::new(rng.random_range(0.0..side), rng.random_range(0.0..side));
        topo.ues.push(UeRecord {
            kind: UeKind::Cue,
            position: p,
            relay: 0,
        });
    }

    for k in 0..cfg.num_d2d_pairs {
        let centre = relays[k % relays.len()];
        let tx = sample_until(&topo, &mut rng, |rng| {
            let r = cfg.d_rd_m * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..2.0 * PI);
            Point::new(centre.x + r * a.cos(), centre.y + r * a.sin())
        })
        .ok_or_else(|| Error::Invalid(format!("D2D transmitter {k} cannot be placed inside the cell")))?;
        let rx = sample_until(&topo, &mut rng, |rng| {
            let a = rng.random_range(0.0..2.0 * PI);
            Point::new(tx.x + cfg.d_dd_m * a.cos(), tx.y + cfg.d_dd_m * a.sin())
        })
        .ok_or_else(|| Error::Invalid(format!("D2D receiver {k} cannot be placed inside the cell")))?;
        topo.ues.push(UeRecord {
            kind: UeKind::D2d { rx },
            position: tx,
            relay: 0,
        });
    }

    for ue in topo.ues.iter_mut() {
        ue.relay = nearest(&relays, &ue.position);
    }
    Ok(topo)
}

fn sample_until<R: Rng>(topo: &Topology, rng: &mut R, mut draw: impl FnMut(&mut R) -> Point) -> Option<Point> {
    (0..MAX_TRIES).map(|_| draw(rng)).find(|p| topo.contains(p))
}

/// Strongest average hop-1 link under a common path-loss law is the nearest
/// relay; ties go to the lower index.
fn nearest(relays: &[Point], p: &Point) -> usize {
    let mut best = 0;
    for (l, r) in relays.iter().enumerate() {
        if r.dist(p) < relays[best].dist(p) {
            best = l;
        }
    }
    best
}
