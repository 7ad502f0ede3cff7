//! Weighted sum rate with random user priorities, optimized with and
//! without the weights.

use qaprecode::eval::{run_experiment, ExperimentConfig, Scheme, WeightMode};

fn main() -> qaprecode::Result<()> {
    for aware in [true, false] {
        let cfg = ExperimentConfig {
            schemes: vec![Scheme::Sd, Scheme::Unaware],
            snr_grid_db: vec![10.0, 20.0],
            antennas: 8,
            users: 2,
            levels: 8,
            trials: 4,
            weights: WeightMode::RandomOneTwo,
            weight_aware: aware,
            ..Default::default()
        };
        let label = if aware { "true weights" } else { "uniform weights" };
        for r in run_experiment(&cfg)? {
            println!("{label:<16} {:<8} {:>4} dB  {:.4}", r.scheme, r.snr_db, r.mean_sum_rate);
        }
    }
    Ok(())
}
