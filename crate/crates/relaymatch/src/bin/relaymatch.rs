//! Batch experiment driver.
//!
//! ```text
//! relaymatch --config configs/relaying.toml --sweep d_dd_m=10,20,30 \
//!     --modes proposed,reference --out gain.csv
//! ```
//!
//! Writes one row per (sweep value, realization, mode) to `--out` and the
//! per-point means, standard deviations and crossover to `<out>.summary.json`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use relaymatch::allocator::ReferenceCsi;
use relaymatch::channel::{dump_channel, load_channel};
use relaymatch::experiment::{
    emit_results, mode_summary, realization_channel, run_experiment, sweep_summary, write_summary, ExperimentSpec,
    Format, RunMode, Sweep, SweepSummary,
};
use relaymatch::scenario::{load_config_file, NetworkConfig};

#[derive(Parser, Debug)]
#[command(version, about = "Relay-aided D2D RB and power allocation experiments")]
struct Args {
    /// TOML network configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Parameter sweep, e.g. `d_dd_m=10,20,30` (axes: d_dd_m, d_rd_m, xi, num_ues).
    #[arg(long)]
    sweep: Option<Sweep>,
    /// Comma-separated modes: proposed, reference, oracle.
    #[arg(long, value_delimiter = ',', default_value = "proposed")]
    modes: Vec<RunMode>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// csv or json; guessed from the `--out` extension when omitted.
    #[arg(long)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<usize>,
    /// CSI the reference scheme allocates with: nominal or robust.
    #[arg(long, default_value = "nominal")]
    reference_csi: String,
    /// Write the channel of the first realization here before running.
    #[arg(long)]
    channel_dump: Option<PathBuf>,
    /// Replay a dumped channel instead of sampling realizations.
    #[arg(long)]
    channel_load: Option<PathBuf>,
}

fn run(args: Args) -> relaymatch::Result<()> {
    let config = match &args.config {
        Some(p) => load_config_file(p)?,
        None => NetworkConfig::default(),
    };
    let mut spec = ExperimentSpec::new(config);
    spec.sweep = args.sweep;
    spec.modes = args.modes;
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(r) = args.realizations {
        spec.realizations = r;
    }
    spec.reference_csi = match args.reference_csi.as_str() {
        "nominal" => ReferenceCsi::Nominal,
        "robust" => ReferenceCsi::Robust,
        other => return Err(relaymatch::Error::Parse(format!("unknown reference CSI {other:?}"))),
    };
    if let Some(p) = &args.channel_load {
        spec.channel = Some(load_channel(p, spec.config.xi())?);
    }
    let points = spec.validate()?;
    if let Some(p) = &args.channel_dump {
        let cs = match &spec.channel {
            Some(cs) => cs.clone(),
            None => realization_channel(&points[0].1, spec.seed, 0)?,
        };
        dump_channel(&cs, p)?;
    }

    let format = args.format.unwrap_or(match args.out.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    });
    let outcomes = run_experiment(&spec)?;
    let rows: Vec<_> = outcomes.iter().map(|o| o.row()).collect();
    emit_results(&rows, format, &args.out)?;

    let summary = if spec.modes.contains(&RunMode::Proposed) && spec.modes.contains(&RunMode::Reference) {
        sweep_summary(&outcomes)?
    } else {
        SweepSummary {
            modes: mode_summary(&outcomes),
            gains: Vec::new(),
            crossover: None,
            sign_changes: 0,
        }
    };
    let mut summary_path = args.out.clone().into_os_string();
    summary_path.push(".summary.json");
    write_summary(&summary, &PathBuf::from(summary_path))?;

    for m in &summary.modes {
        let v = m.sweep_value.map_or("-".to_string(), |v| v.to_string());
        println!(
            "{v:>8} {:<10} R_avg {:>12.1} ± {:>10.1} bit/s",
            m.mode.to_string(),
            m.r_avg_mean_bps,
            m.r_avg_std_bps
        );
    }
    for g in &summary.gains {
        let v = g.sweep_value.map_or("-".to_string(), |v| v.to_string());
        let gain = g.rate_gain_pct.map_or("undefined".to_string(), |x| format!("{x:+.1}%"));
        println!("{v:>8} gain {gain} ({} wins, {} losses)", g.wins, g.losses);
    }
    if let Some(c) = summary.crossover {
        println!("crossover at {c}");
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
