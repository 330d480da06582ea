use std::collections::BTreeSet;

use wfh_core::classical::classical_full;
use wfh_core::quantum::heralded_diff;
use wfh_core::{DiffDist, ExperimentParams};

fn total_variation(a: &DiffDist, b: &DiffDist) -> f64 {
    let keys: BTreeSet<i64> = a.support().chain(b.support()).collect();
    0.5 * keys.iter().map(|k| (a.get(*k) - b.get(*k)).abs()).sum::<f64>()
}

// Vacuum herald, balanced arms at the mean of the table1 arm efficiencies.
#[test]
fn classical_model_converges_for_vacuum_herald() {
    let mut params = ExperimentParams::table1(15.41);
    let eta = 0.5 * (params.detector.eta_c + params.detector.eta_d);
    params.detector.eta_c = eta;
    params.detector.eta_d = eta;
    let classical = classical_full(0, &params).unwrap();
    let quantum = heralded_diff(0, &params).unwrap();
    let tv = total_variation(&classical, &quantum);
    assert!(tv < 0.01, "total variation {tv}");
}
