//! Sum rate with perfect, estimated and quantized estimated CSI.

use qaprecode::channel::CsiMode;
use qaprecode::eval::{run_experiment, ExperimentConfig, Scheme};

fn main() -> qaprecode::Result<()> {
    let snrs = vec![0.0, 10.0, 20.0];
    println!("csi            {}", snrs.iter().map(|s| format!("{s:>7} dB")).collect::<String>());
    for mode in [CsiMode::Perfect, CsiMode::LsEstimate, CsiMode::LsPlusAqnm] {
        let mut cfg = ExperimentConfig {
            schemes: vec![Scheme::Sd],
            snr_grid_db: snrs.clone(),
            antennas: 8,
            users: 2,
            levels: 8,
            trials: 4,
            ..Default::default()
        };
        cfg.csi.mode = mode;
        cfg.csi.csi_bits = 3;
        let rows = run_experiment(&cfg)?;
        let rates: String = rows.iter().map(|r| format!("{:>10.3}", r.mean_sum_rate)).collect();
        println!("{:<13}{rates}", format!("{mode:?}"));
    }
    Ok(())
}
