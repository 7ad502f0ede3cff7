//! Rician ULA channel draws, LS estimation and AQNM-quantized CSI.

use qaprecode::channel::{aqnm_quantize_csi, draw_channel, ls_estimate_matrix, ChannelConfig};
use qaprecode::rng::{stream_rng, Stream};
use qaprecode::CMat;

fn nmse(est: &CMat, truth: &CMat) -> f64 {
    (est - truth).norm_squared() / truth.norm_squared()
}

fn main() -> qaprecode::Result<()> {
    let cfg = ChannelConfig {
        antennas: 16,
        users: 4,
        ..Default::default()
    };
    let ch = draw_channel(&cfg, &mut stream_rng(1, Stream::Channel, 0))?;
    println!("user  distance[m]  angle[deg]  gain");
    for k in 0..4 {
        println!(
            "{k:>4}  {:>11.1}  {:>10.1}  {:.3}",
            ch.distances[k],
            ch.angles[k].to_degrees(),
            ch.gains[k]
        );
    }

    let mut rng = stream_rng(1, Stream::Csi, 0);
    println!("\nuplink SNR [dB]  LS nmse    LS+AQNM(3 bit) nmse");
    for snr_db in [0.0, 10.0, 20.0, 30.0] {
        let noise = 10f64.powf(-snr_db / 10.0);
        let est = ls_estimate_matrix(&ch.h, 4, 1.0, noise, &mut rng);
        let quantized = aqnm_quantize_csi(&est, 3, &mut rng)?;
        println!(
            "{snr_db:>15.0}  {:.3e}  {:.3e}",
            nmse(&est, &ch.h),
            nmse(&quantized, &ch.h)
        );
    }
    Ok(())
}
