//! Deferred acceptance on a hand-made utility matrix, with the stability
//! check and the exhaustive list of stable matchings.

use relaymatch::allocator::UtilityMatrix;
use relaymatch::matching::{allocate_rbs, build_preferences, compute_quota, verify_stable};
use relaymatch::oracle::stable_set;

fn main() -> relaymatch::Result<()> {
    // rate of UE u on RB n, bit/s
    let util = UtilityMatrix::from_rows(&[
        vec![300e3, 120e3, 90e3, 0.0],
        vec![250e3, 260e3, 40e3, 80e3],
        vec![60e3, 200e3, 210e3, 150e3],
    ]);
    let prefs = build_preferences(&util);
    let quota = compute_quota(&util, &[350e3, 200e3, 128e3]);
    println!("UE preference lists: {:?}", prefs.ue);
    println!("RB preference lists: {:?}", prefs.rb);
    println!("quotas: {:?}", quota.kappa);

    let (m, stats) = allocate_rbs(&prefs, &quota);
    for (u, rbs) in m.ue_rbs.iter().enumerate() {
        let rate: f64 = rbs.iter().map(|&n| util.get(u, n)).sum();
        println!("UE {u}: RBs {rbs:?}, {:.0} kbit/s", rate / 1e3);
    }
    println!("{} proposals, unmet quotas {:?}", stats.proposals, stats.unmet_quota);

    let report = verify_stable(&m, &prefs, &quota);
    println!("stable: {}", report.is_stable());

    let all = stable_set(&prefs, &quota)?;
    println!("{} stable matching(s) exist; ours among them: {}", all.len(), all.contains(&m));
    Ok(())
}
