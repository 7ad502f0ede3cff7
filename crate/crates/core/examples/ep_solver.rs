//! Expectation propagation as an approximate ILS solver.

use qaprecode::cli::oracle_set;
use qaprecode::ep::{ep_solve, EpConfig, NegativePrecision};
use qaprecode::sd::sphere_decode;

fn main() {
    let problems = oracle_set(0, 200);
    for policy in [NegativePrecision::KeepPrevious, NegativePrecision::Clamp] {
        let cfg = EpConfig {
            negative_precision: policy,
            ..Default::default()
        };
        let mut excess = 0.0;
        let mut exact = 0;
        let mut negative = 0;
        let mut updates = 0;
        for prob in &problems {
            let sd = sphere_decode(prob);
            let ep = ep_solve(prob, &cfg);
            excess += (ep.objective - sd.objective) / sd.objective;
            exact += usize::from(ep.objective <= sd.objective + 1e-12);
            negative += ep.report.negative_precisions;
            updates += ep.report.coordinate_updates;
        }
        println!(
            "{policy:?}: mean relative excess {:.4}, optimal on {exact}/{}, negative precisions {negative}/{updates}",
            excess / problems.len() as f64,
            problems.len()
        );
    }

    let ep = ep_solve(&problems[0], &EpConfig::default());
    println!("\nfirst problem: hard {:?}", ep.p.as_slice());
    println!("               soft {:?}", ep.soft.as_slice());
    println!("residual variance trace {:?}", ep.report.variance_trace);
}
