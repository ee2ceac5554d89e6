mod common;

use std::process::Command;

use relaymatch::allocator::run_network;
use relaymatch::channel::{dump_channel, load_channel};
use relaymatch::experiment::{
    emit_results, read_results, realization_channel, run_experiment, ExperimentSpec, Format, ResultRow, RunMode,
    CSV_COLUMNS,
};
use relaymatch::scenario::{dbm_to_w, load_config, NetworkConfig};

fn small_spec() -> ExperimentSpec {
    let mut cfg = NetworkConfig::default();
    cfg.num_cues = 6;
    cfg.num_d2d_pairs = 3;
    cfg.rb_count = 6;
    let mut spec = ExperimentSpec::new(cfg);
    spec.realizations = 4;
    spec.modes = vec![RunMode::Proposed, RunMode::Reference];
    spec.sweep = Some("d_dd_m=20,60".parse().unwrap());
    spec
}

fn rows(spec: &ExperimentSpec) -> Vec<ResultRow> {
    run_experiment(spec).unwrap().iter().map(|o| o.row()).collect()
}

#[test]
fn rows_ordered_by_value_realization_mode() {
    let r = rows(&small_spec());
    assert_eq!(r.len(), 2 * 4 * 2);
    let keys: Vec<(u64, usize, RunMode)> =
        r.iter().map(|x| (x.sweep_value.unwrap() as u64, x.realization, x.mode)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(r.iter().filter(|x| x.mode == RunMode::Proposed).all(|x| x.rate_gain_pct.is_some() || x.r_sum_bps >= 0.0));
}

#[test]
fn identical_bytes_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec();
    for f in [Format::Csv, Format::Json] {
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        emit_results(&rows(&spec), f, &a).unwrap();
        emit_results(&rows(&spec), f, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}

#[test]
fn empty_and_single_row_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.csv");
    emit_results(&[], Format::Csv, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text, CSV_COLUMNS.join(",") + "\n");

    let one = rows(&small_spec()).into_iter().take(1).collect::<Vec<_>>();
    emit_results(&one, Format::Csv, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
}

#[test]
fn round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let r = rows(&small_spec());
    for f in [Format::Json, Format::Csv] {
        let p = dir.path().join("r");
        emit_results(&r, f, &p).unwrap();
        assert_eq!(read_results(f, &p).unwrap(), r);
    }
}

#[test]
fn unwritable_destination_names_path() {
    let err = emit_results(&[], Format::Json, std::path::Path::new("/nonexistent/dir/out.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/out.json"));
}

/// Rates recomputed from the allocation with the nominal formula written out.
fn recomputed_sum(cfg: &NetworkConfig, cs: &relaymatch::channel::ChannelState, a: &relaymatch::rates::Allocation) -> f64 {
    let sigma2 = dbm_to_w(cfg.noise_psd) * cfg.rb_bandwidth_hz;
    let mut total = 0.0;
    for u in 0..cs.layout.num_ues() {
        let l = cs.layout.relay_of[u];
        for n in 0..cs.rb_count {
            if !a.x[u][n] {
                continue;
            }
            let mut i = 0.0;
            for v in 0..cs.layout.num_ues() {
                if cs.layout.relay_of[v] != l && a.x[v][n] {
                    i += a.p[v][n] * cs.ue_relay[v][l][n];
                }
            }
            let sinr = a.p[u][n] * cs.ue_relay[u][l][n] / (i + sigma2);
            total += 0.5 * cfg.rb_bandwidth_hz * (1.0 + sinr).log2();
        }
    }
    total
}

#[test]
fn emitted_rates_match_recomputation() {
    // no uncertainty, so worst-case and nominal rates coincide
    let spec = small_spec();
    let cfg = spec.config.clone();
    let r = rows(&spec);
    for row in r.iter().filter(|x| x.mode == RunMode::Proposed).take(10) {
        let mut c = cfg.clone();
        c.d_dd_m = row.sweep_value.unwrap();
        let cs = realization_channel(&c, spec.seed, row.realization).unwrap();
        let run = run_network(&c, &cs);
        let expect = recomputed_sum(&c, &cs, &run.alloc);
        assert!((row.r_sum_bps - expect).abs() <= 1e-9 * expect, "{} vs {expect}", row.r_sum_bps);
        let n = (c.num_cues + c.num_d2d_pairs) as f64;
        assert!((row.r_avg_bps - expect / n).abs() <= 1e-9 * expect / n);
    }
}

#[test]
fn channel_replay_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec();
    spec.sweep = None;
    spec.realizations = 1;
    let cs = realization_channel(&spec.config, spec.seed, 0).unwrap();
    let p = dir.path().join("ch.csv");
    dump_channel(&cs, &p).unwrap();
    let direct = rows(&spec);
    spec.channel = Some(load_channel(&p, spec.config.xi()).unwrap());
    assert_eq!(rows(&spec), direct);

    spec.sweep = Some("d_dd_m=10".parse().unwrap());
    assert!(run_experiment(&spec).is_err());
    spec.sweep = Some("xi=0.1".parse().unwrap());
    assert!(run_experiment(&spec).is_ok());
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relaymatch"))
}

#[test]
fn cli_writes_rows_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gain.csv");
    let cfg = dir.path().join("cfg.toml");
    let mut text = common::RELAYING_TOML.to_string();
    text.push_str("num_relays = 3\n");
    std::fs::write(&cfg, text).unwrap();
    let status = cli()
        .args(["--config", cfg.to_str().unwrap(), "--sweep", "d_dd_m=10,100", "--modes", "proposed,reference"])
        .args(["--realizations", "3", "--seed", "5", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let rows = read_results(Format::Csv, &out).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("gain.csv.summary.json")).unwrap();
    assert!(summary.contains("\"gains\""));
}

#[test]
fn cli_channel_dump_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let (ch, a, b) = (dir.path().join("ch.csv"), dir.path().join("a.json"), dir.path().join("b.json"));
    let ok = cli()
        .args(["--realizations", "1", "--channel-dump", ch.to_str().unwrap(), "--out", a.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(ok.success());
    let ok = cli()
        .args(["--channel-load", ch.to_str().unwrap(), "--out", b.to_str().unwrap()])
        .status()
        .unwrap();
    assert!(ok.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn cli_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    for args in [
        vec!["--sweep", "height=1,2", "--out", out],
        vec!["--modes", "oracle", "--out", out],
        vec!["--config", "/nonexistent.toml", "--out", out],
        vec!["--realizations", "0", "--out", out],
    ] {
        let o = cli().args(&args).output().unwrap();
        assert!(!o.status.success(), "{args:?} succeeded");
        assert!(!o.stderr.is_empty());
    }
    // the oracle guard fires before any result file exists
    assert!(!std::path::Path::new(out).exists());
}

#[test]
fn shipped_configs_load() {
    for text in [common::RELAYING_TOML, common::CONVERGENCE_TOML, common::TINY_TOML] {
        load_config(text).unwrap();
    }
    load_config(include_str!("../configs/default.toml")).unwrap();
}
