//! Exact integer least squares: sphere decoding against brute force.

use qaprecode::cli::oracle_set;
use qaprecode::sd::{brute_force_ils, greedy_descent, sphere_decode, sphere_decode_sorted};

fn main() -> qaprecode::Result<()> {
    println!("sd          brute       sorted      greedy      nodes  sorted nodes");
    for prob in oracle_set(3, 8) {
        let sd = sphere_decode(&prob);
        let sorted = sphere_decode_sorted(&prob);
        let (_, bf) = brute_force_ils(&prob)?;
        let (_, greedy) = greedy_descent(&prob);
        println!(
            "{:<10.6}  {bf:<10.6}  {:<10.6}  {greedy:<10.6}  {:>5}  {:>12}",
            sd.objective, sorted.objective, sd.stats.nodes, sorted.stats.nodes
        );
    }
    Ok(())
}
