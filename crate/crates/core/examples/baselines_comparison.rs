//! Every scheme on the same trials at one SNR.

use qaprecode::eval::{run_scheme, trial_input, ExperimentConfig, Scheme};

fn main() -> qaprecode::Result<()> {
    let cfg = ExperimentConfig {
        antennas: 8,
        users: 2,
        levels: 8,
        ..Default::default()
    };
    let snr_db = 25.0;
    let trials = 5;
    print!("trial");
    for s in Scheme::ALL {
        print!("  {:>12}", s.name());
    }
    println!();
    for t in 0..trials {
        let input = trial_input(&cfg, snr_db, t)?;
        print!("{t:>5}");
        for s in Scheme::ALL {
            print!("  {:>12.4}", run_scheme(&cfg, s, &input)?.sum_rate);
        }
        println!();
    }
    Ok(())
}
