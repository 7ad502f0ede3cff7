//! Fronthaul load of separate precoder/symbol transport versus precoded
//! I/Q samples.

use qaprecode::eval::fronthaul_capacity;

fn main() {
    println!("antennas  users  separate[bit]  joint[bit]  ratio");
    for (m, k) in [(16, 4), (64, 8), (256, 16), (1024, 32)] {
        let (separate, joint) = fronthaul_capacity(m, k, 100, 4, 3, 3);
        println!(
            "{m:>8}  {k:>5}  {separate:>13}  {joint:>10}  {:.2}",
            joint as f64 / separate as f64
        );
    }
}
