//! Relaying against direct D2D over the pair distance, as the CLI would run
//! it, with CSV output and the crossover distance.

use relaymatch::experiment::{emit_results, run_experiment, sweep_summary, ExperimentSpec, Format, RunMode, Sweep};
use relaymatch::scenario::NetworkConfig;

fn main() -> relaymatch::Result<()> {
    let mut cfg = NetworkConfig::default();
    cfg.q_min_d2d_bps = 400e3;
    let mut spec = ExperimentSpec::new(cfg);
    spec.sweep = Some("d_dd_m=10,20,30,40,50,60,70,80,90,100".parse::<Sweep>()?);
    spec.modes = vec![RunMode::Proposed, RunMode::Reference];
    spec.realizations = 50;

    let outcomes = run_experiment(&spec)?;
    let rows: Vec<_> = outcomes.iter().map(|o| o.row()).collect();
    let path = std::env::temp_dir().join("relaymatch-sweep.csv");
    emit_results(&rows, Format::Csv, &path)?;
    println!("{} rows written to {}", rows.len(), path.display());

    let summary = sweep_summary(&outcomes)?;
    println!("\n d_dd   gain    wins/losses");
    for g in &summary.gains {
        println!(
            "{:5.0}  {:+6.1}%  {}/{}",
            g.sweep_value.unwrap_or(f64::NAN),
            g.rate_gain_pct.unwrap_or(f64::NAN),
            g.wins,
            g.losses
        );
    }
    match summary.crossover {
        Some(d) => println!("relaying pays off from {d} m"),
        None => println!("relaying never wins on this sweep"),
    }
    Ok(())
}
