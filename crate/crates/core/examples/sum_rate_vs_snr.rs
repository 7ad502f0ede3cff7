//! Monte-Carlo sum rate over an SNR grid, written as CSV.

use qaprecode::eval::{run_experiment, to_csv, ExperimentConfig, Scheme};

fn main() -> qaprecode::Result<()> {
    let cfg = ExperimentConfig {
        schemes: vec![Scheme::InfiniteRes, Scheme::Sd, Scheme::Heuristic, Scheme::Unaware],
        snr_grid_db: vec![0.0, 10.0, 20.0, 30.0],
        antennas: 8,
        users: 2,
        levels: 8,
        trials: 4,
        ..Default::default()
    };
    let rows = run_experiment(&cfg)?;
    print!("{}", to_csv(&rows));
    Ok(())
}
