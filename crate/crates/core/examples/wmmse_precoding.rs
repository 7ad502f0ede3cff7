//! Quantization-aware WMMSE on one channel, iterate by iterate.

use qaprecode::channel::{draw_channel, ChannelConfig};
use qaprecode::ep::EpConfig;
use qaprecode::rng::{stream_rng, Stream};
use qaprecode::wmmse::{run_wmmse, sum_rate, SubproblemSolver, WmmseConfig};
use qaprecode::QuantizerSpec;

fn main() -> qaprecode::Result<()> {
    let (m, k, q) = (8, 2, 1.0);
    let n0 = q / 10f64.powf(2.0);
    let h = draw_channel(
        &ChannelConfig {
            antennas: m,
            users: k,
            ..Default::default()
        },
        &mut stream_rng(7, Stream::Channel, 0),
    )?
    .h;
    let spec = QuantizerSpec::for_power_budget(8, q, k, m)?;
    let cfg = WmmseConfig::new(k, q, n0);
    let solvers = [
        ("continuous", SubproblemSolver::Continuous),
        ("sphere", SubproblemSolver::Sphere(spec.clone())),
        ("ep", SubproblemSolver::Ep(spec.clone(), EpConfig::default())),
    ];
    for (name, solver) in &solvers {
        let (p, state) = run_wmmse(&h, &cfg, solver)?;
        println!("{name}: {} iterations, converged {}", state.iterations, state.converged);
        for (i, (f, r)) in state.objective_trace.iter().zip(&state.rate_trace).enumerate() {
            println!("  {i:>2}  objective {f:>9.5}  sum rate {r:>8.4}");
        }
        println!("  final sum rate {:.4}\n", sum_rate(&h, &p, q, n0, &cfg.ue_weights)?);
    }
    Ok(())
}
