//! Optimal uniform step sizes and the resulting fronthaul alphabets.

use qaprecode::quantizer::{gaussian_mse, optimal_step_size};
use qaprecode::{CMat, Complex64, QuantizerSpec};

fn main() -> qaprecode::Result<()> {
    println!("levels  step      mse");
    for levels in [2, 4, 8, 16] {
        let step = optimal_step_size(levels, 1.0)?;
        println!("{levels:>6}  {step:.6}  {:.3e}", gaussian_mse(levels, step, 1.0));
    }

    // alphabet for q = 1 shared by K = 4 users over M = 16 antennas
    let spec = QuantizerSpec::for_power_budget(8, 1.0, 4, 16)?;
    let labels: Vec<String> = spec.labels().iter().map(|x| format!("{x:.4}")).collect();
    println!("\nstep {:.5}, labels [{}]", spec.step(), labels.join(", "));

    let p = CMat::from_fn(2, 2, |i, j| Complex64::new(0.05 * (i as f64 + 1.0), -0.2 * j as f64));
    let qp = spec.quantize_matrix(&p)?;
    for (z, w) in p.iter().zip(qp.iter()) {
        println!("{:>7.4}{:+.4}i -> {:>7.4}{:+.4}i", z.re, z.im, w.re, w.im);
    }
    Ok(())
}
