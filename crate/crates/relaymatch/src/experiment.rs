//! Sweeps over realizations and parameters, and result files.
//!
//! Every realization `r` of every sweep value uses seed `seed + r`, so the
//! same topologies and fading draws recur across sweep values and modes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{run_network, run_reference, ReferenceCsi};
use crate::channel::{sample_link_gains, ChannelState};
use crate::metrics::{efficiency, mean_std, rate_gain, MetricsReport};
use crate::oracle::{self, Grid, OracleInstance};
use crate::rates::Mode;
use crate::scenario::{generate_topology, NetworkConfig};
use crate::{Error, Result};

/// Grid levels used by the oracle mode.
pub const ORACLE_LEVELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DDdM,
    DRdM,
    Xi,
    NumUes,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DDdM => "d_dd_m",
            SweepAxis::DRdM => "d_rd_m",
            SweepAxis::Xi => "xi",
            SweepAxis::NumUes => "num_ues",
        }
    }

    /// Whether the axis changes positions or UE counts.
    pub fn is_geometric(self) -> bool {
        self != SweepAxis::Xi
    }

    /// `cfg` with the axis set to `v`. `num_ues` keeps the CUE : D2D ratio.
    pub fn apply(self, cfg: &NetworkConfig, v: f64) -> Result<NetworkConfig> {
        let mut c = cfg.clone();
        match self {
            SweepAxis::DDdM => c.d_dd_m = v,
            SweepAxis::DRdM => c.d_rd_m = v,
            SweepAxis::Xi => c.set_xi(v),
            SweepAxis::NumUes => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Invalid(format!("num_ues must be a positive integer, got {v}")));
                }
                let total = v as usize;
                let share = cfg.num_d2d_pairs as f64 / cfg.num_ues() as f64;
                c.num_d2d_pairs = (total as f64 * share).round() as usize;
                c.num_cues = total - c.num_d2d_pairs;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "d_dd_m" => SweepAxis::DDdM,
            "d_rd_m" => SweepAxis::DRdM,
            "xi" => SweepAxis::Xi,
            "num_ues" => SweepAxis::NumUes,
            _ => return Err(Error::Parse(format!("unknown sweep axis {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

impl FromStr for Sweep {
    type Err = Error;
    /// `axis=v1,v2,...`
    fn from_str(s: &str) -> Result<Self> {
        let (axis, list) = s
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("sweep {s:?} is not axis=v1,v2,...")))?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("sweep value {v:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Parse("empty sweep".into()));
        }
        Ok(Sweep {
            axis: axis.trim().parse()?,
            values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Proposed,
    Reference,
    Oracle,
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Proposed => "proposed",
            RunMode::Reference => "reference",
            RunMode::Oracle => "oracle",
        })
    }
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "proposed" => RunMode::Proposed,
            "reference" | "reference-direct" => RunMode::Reference,
            "oracle" | "oracle-on-tiny" => RunMode::Oracle,
            _ => return Err(Error::Parse(format!("unknown mode {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Parse(format!("unknown format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub config: NetworkConfig,
    pub sweep: Option<Sweep>,
    pub modes: Vec<RunMode>,
    pub realizations: usize,
    pub seed: u64,
    pub reference_csi: ReferenceCsi,
    /// Replays this channel in every run instead of sampling topologies.
    pub channel: Option<ChannelState>,
}

impl ExperimentSpec {
    pub fn new(config: NetworkConfig) -> Self {
        ExperimentSpec {
            realizations: config.realizations,
            seed: config.seed,
            config,
            sweep: None,
            modes: vec![RunMode::Proposed],
            reference_csi: ReferenceCsi::default(),
            channel: None,
        }
    }

    /// `(sweep value, config)` for every point of the sweep.
    pub fn points(&self) -> Result<Vec<(Option<f64>, NetworkConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.config.clone())]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(v), s.axis.apply(&self.config, v)?)))
                .collect(),
        }
    }

    /// Checks everything that can fail before any run starts.
    pub fn validate(&self) -> Result<Vec<(Option<f64>, NetworkConfig)>> {
        if self.modes.is_empty() {
            return Err(Error::Invalid("no modes selected".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Invalid("realizations must be at least 1".into()));
        }
        let points = self.points()?;
        if let (Some(cs), Some(s)) = (&self.channel, &self.sweep) {
            if s.axis.is_geometric() {
                return Err(Error::Invalid(format!(
                    "a loaded channel cannot be swept over {}",
                    s.axis.name()
                )));
            }
            let _ = cs;
        }
        if self.modes.contains(&RunMode::Oracle) {
            for (_, c) in &points {
                let (u, n) = match &self.channel {
                    Some(cs) => (cs.layout.num_ues(), cs.rb_count),
                    None => (c.num_ues(), c.rb_count),
                };
                let relays = self.channel.as_ref().map_or(c.num_relays, |cs| cs.layout.num_relays);
                if relays != 1 || u > oracle::MAX_UES || n > oracle::MAX_RBS {
                    return Err(Error::Guard {
                        size: oracle::candidate_count(u, n, ORACLE_LEVELS),
                        limit: oracle::MAX_CANDIDATES,
                    });
                }
            }
        }
        Ok(points)
    }
}

/// One emitted line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_value: Option<f64>,
    pub mode: RunMode,
    pub realization: usize,
    pub r_avg_bps: f64,
    pub r_sum_bps: f64,
    pub rate_gain_pct: Option<f64>,
    pub efficiency: Option<f64>,
    pub iterations: usize,
    pub messages_matching: usize,
    pub messages_x2: usize,
}

/// A row plus what the summary needs beyond the emitted columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub sweep_value: Option<f64>,
    pub realization: usize,
    pub mode: RunMode,
    pub report: MetricsReport,
    /// Aggregate rate of the D2D UEs.
    pub d2d_sum_bps: f64,
    /// Per-UE rates behind the report.
    pub ue_rates: Vec<f64>,
}

impl Outcome {
    pub fn row(&self) -> ResultRow {
        let r = &self.report;
        ResultRow {
            sweep_value: self.sweep_value,
            mode: self.mode,
            realization: self.realization,
            r_avg_bps: r.r_avg_bps,
            r_sum_bps: r.r_sum_bps,
            rate_gain_pct: r.rate_gain_pct,
            efficiency: r.efficiency,
            iterations: r.iterations,
            messages_matching: r.messages_matching,
            messages_x2: r.messages_x2,
        }
    }
}

/// Channel of realization `r` at one sweep point.
pub fn realization_channel(cfg: &NetworkConfig, seed: u64, r: usize) -> Result<ChannelState> {
    let s = seed.wrapping_add(r as u64);
    let topo = generate_topology(cfg, s)?;
    Ok(sample_link_gains(&topo, cfg, s))
}

fn run_one(spec: &ExperimentSpec, value: Option<f64>, cfg: &NetworkConfig, r: usize) -> Result<Vec<Outcome>> {
    let cs = match &spec.channel {
        Some(cs) => cs.clone().with_xi(cfg.xi()),
        None => realization_channel(cfg, spec.seed, r)?,
    };
    let d2d_sum = |rates: &[f64]| -> f64 {
        rates
            .iter()
            .enumerate()
            .filter(|&(u, _)| cs.layout.is_d2d(u))
            .map(|(_, x)| x)
            .sum()
    };
    let mut out: BTreeMap<RunMode, Outcome> = BTreeMap::new();
    let mut put = |mode, report: MetricsReport, rates: Vec<f64>| {
        out.insert(
            mode,
            Outcome {
                sweep_value: value,
                realization: r,
                mode,
                d2d_sum_bps: d2d_sum(&rates),
                report,
                ue_rates: rates,
            },
        );
    };
    for &mode in &spec.modes {
        match mode {
            RunMode::Proposed => {
                let run = run_network(cfg, &cs);
                let rates = run.ue_rates(cfg, &cs, Mode::Robust);
                let rep =
                    MetricsReport::from_rates(&rates, run.iterations(), run.messages_matching(), run.messages_x2());
                put(mode, rep, rates);
            }
            RunMode::Reference => {
                let run = run_reference(cfg, &cs, spec.reference_csi);
                let c = &run.cue_run;
                let rep = MetricsReport::from_rates(&run.ue_rates, c.iterations(), c.messages_matching(), c.messages_x2());
                put(mode, rep, run.ue_rates);
            }
            RunMode::Oracle => {
                let inst = OracleInstance::new(cfg.clone(), cs.clone(), Grid::Adaptive(ORACLE_LEVELS))?;
                let opt = oracle::optimal_rate(&inst, Mode::Robust)?;
                let ctx = crate::rates::RateContext::new(cfg, &cs, &opt.alloc);
                let rates: Vec<f64> = (0..cs.layout.num_ues()).map(|u| ctx.ue_rate(u, Mode::Robust)).collect();
                put(mode, MetricsReport::from_rates(&rates, 0, 0, 0), rates);
            }
        }
    }
    let reference_d2d = out.get(&RunMode::Reference).map(|o| o.d2d_sum_bps);
    let optimum = out.get(&RunMode::Oracle).map(|o| o.report.r_sum_bps);
    for o in out.values_mut() {
        if o.mode == RunMode::Proposed {
            o.report.rate_gain_pct = reference_d2d.and_then(|rf| rate_gain(o.d2d_sum_bps, rf).ok());
        }
        o.report.efficiency = optimum.and_then(|opt| efficiency(o.report.r_sum_bps, opt).ok());
    }
    Ok(spec.modes.iter().filter_map(|m| out.remove(m)).collect())
}

/// Runs every realization of every sweep point. Rows come out ordered by
/// sweep point, then realization, then mode in `spec.modes` order.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Outcome>> {
    let points = spec.validate()?;
    let reals = if spec.channel.is_some() { 1 } else { spec.realizations };
    let mut all = Vec::new();
    for (value, cfg) in &points {
        let chunk: Vec<Vec<Outcome>> = (0..reals)
            .into_par_iter()
            .map(|r| run_one(spec, *value, cfg, r))
            .collect::<Result<_>>()?;
        all.extend(chunk.into_iter().flatten());
    }
    Ok(all)
}

/// Per sweep point and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub sweep_value: Option<f64>,
    pub mode: RunMode,
    pub realizations: usize,
    pub r_avg_mean_bps: f64,
    pub r_avg_std_bps: f64,
    pub r_sum_mean_bps: f64,
    pub r_sum_std_bps: f64,
    pub d2d_sum_mean_bps: f64,
    pub efficiency_mean: Option<f64>,
}

/// Proposed against reference at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub sweep_value: Option<f64>,
    /// Gain of the mean D2D aggregates.
    pub rate_gain_pct: Option<f64>,
    /// Realizations where relaying gave the D2D UEs more / less in total.
    pub wins: usize,
    pub losses: usize,
}

impl GainSummary {
    /// Sign of the majority vote.
    pub fn majority(&self) -> i8 {
        match self.wins.cmp(&self.losses) {
            std::cmp::Ordering::Greater => 1,
            std::cmp::Ordering::Less => -1,
            std::cmp::Ordering::Equal => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub modes: Vec<ModeSummary>,
    pub gains: Vec<GainSummary>,
    /// Smallest sweep value whose majority vote favours relaying.
    pub crossover: Option<f64>,
    /// Sign changes along the majority-vote sequence.
    pub sign_changes: usize,
}

fn key(v: Option<f64>) -> u64 {
    v.map_or(0, |x| x.to_bits() ^ (1 << 63))
}

fn grouped(outcomes: &[Outcome]) -> (Vec<Option<f64>>, BTreeMap<(u64, RunMode), Vec<&Outcome>>) {
    let mut order: Vec<Option<f64>> = Vec::new();
    let mut groups: BTreeMap<(u64, RunMode), Vec<&Outcome>> = BTreeMap::new();
    for o in outcomes {
        if !order.iter().any(|&v| key(v) == key(o.sweep_value)) {
            order.push(o.sweep_value);
        }
        groups.entry((key(o.sweep_value), o.mode)).or_default().push(o);
    }
    order.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    (order, groups)
}

/// Mean and standard deviation per sweep point and mode.
pub fn mode_summary(outcomes: &[Outcome]) -> Vec<ModeSummary> {
    let (order, groups) = grouped(outcomes);
    let mut modes = Vec::new();
    for &v in &order {
        for mode in [RunMode::Proposed, RunMode::Reference, RunMode::Oracle] {
            let Some(g) = groups.get(&(key(v), mode)) else { continue };
            let avg: Vec<f64> = g.iter().map(|o| o.report.r_avg_bps).collect();
            let sum: Vec<f64> = g.iter().map(|o| o.report.r_sum_bps).collect();
            let eff: Vec<f64> = g.iter().filter_map(|o| o.report.efficiency).collect();
            let (am, asd) = mean_std(&avg);
            let (sm, ssd) = mean_std(&sum);
            modes.push(ModeSummary {
                sweep_value: v,
                mode,
                realizations: g.len(),
                r_avg_mean_bps: am,
                r_avg_std_bps: asd,
                r_sum_mean_bps: sm,
                r_sum_std_bps: ssd,
                d2d_sum_mean_bps: g.iter().map(|o| o.d2d_sum_bps).sum::<f64>() / g.len() as f64,
                efficiency_mean: (!eff.is_empty()).then(|| mean_std(&eff).0),
            });
        }
    }
    modes
}

/// Per-point statistics plus the proposed-vs-reference comparison, which
/// needs both modes at every sweep point.
pub fn sweep_summary(outcomes: &[Outcome]) -> Result<SweepSummary> {
    let modes = mode_summary(outcomes);
    let (order, groups) = grouped(outcomes);
    let mut gains = Vec::new();
    for &v in &order {
        let (Some(p), Some(r)) = (groups.get(&(key(v), RunMode::Proposed)), groups.get(&(key(v), RunMode::Reference)))
        else {
            return Err(Error::Invalid(format!(
                "gain summary needs proposed and reference outcomes at sweep value {v:?}"
            )));
        };
        let by_real: BTreeMap<usize, f64> = r.iter().map(|o| (o.realization, o.d2d_sum_bps)).collect();
        let (mut wins, mut losses) = (0, 0);
        for o in p {
            if let Some(&rf) = by_real.get(&o.realization) {
                if o.d2d_sum_bps > rf {
                    wins += 1;
                } else if o.d2d_sum_bps < rf {
                    losses += 1;
                }
            }
        }
        let mp = p.iter().map(|o| o.d2d_sum_bps).sum::<f64>() / p.len() as f64;
        let mr = r.iter().map(|o| o.d2d_sum_bps).sum::<f64>() / r.len() as f64;
        gains.push(GainSummary {
            sweep_value: v,
            rate_gain_pct: rate_gain(mp, mr).ok(),
            wins,
            losses,
        });
    }
    let signs: Vec<i8> = gains.iter().map(GainSummary::majority).filter(|&s| s != 0).collect();
    let sign_changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
    let crossover = gains.iter().find(|g| g.majority() > 0).and_then(|g| g.sweep_value);
    Ok(SweepSummary {
        modes,
        gains,
        crossover,
        sign_changes,
    })
}

/// Writes rows as CSV (header always present) or as a JSON array.
pub fn emit_results(rows: &[ResultRow], format: Format, path: &Path) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_path(path)
                .map_err(|e| Error::format(path, e))?;
            w.write_record(CSV_COLUMNS).map_err(|e| Error::format(path, e))?;
            for r in rows {
                w.serialize(r).map_err(|e| Error::format(path, e))?;
            }
            w.flush().map_err(|e| Error::io(path, e))
        }
        Format::Json => {
            let text = serde_json::to_string_pretty(rows).map_err(|e| Error::format(path, e))?;
            std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
        }
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "sweep_value",
    "mode",
    "realization",
    "r_avg_bps",
    "r_sum_bps",
    "rate_gain_pct",
    "efficiency",
    "iterations",
    "messages_matching",
    "messages_x2",
];

/// Reads rows written by [`emit_results`].
pub fn read_results(format: Format, path: &Path) -> Result<Vec<ResultRow>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
            r.deserialize()
                .map(|x| x.map_err(|e| Error::format(path, e)))
                .collect()
        }
        Format::Json => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::format(path, e))
        }
    }
}

pub fn write_summary(summary: &SweepSummary, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::format(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
