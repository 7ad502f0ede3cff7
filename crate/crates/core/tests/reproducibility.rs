use qaprecode::channel::CsiMode;
use qaprecode::eval::{run_experiment, run_scheme, trial_input, ExperimentConfig, Scheme, WeightMode};

fn small(schemes: Vec<Scheme>) -> ExperimentConfig {
    ExperimentConfig {
        schemes,
        snr_grid_db: vec![5.0, 20.0],
        antennas: 4,
        users: 2,
        levels: 4,
        trials: 4,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn same_seed_gives_identical_rows() {
    let cfg = small(Scheme::ALL.to_vec());
    assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
}

#[test]
fn cell_results_do_not_depend_on_the_scheme_list() {
    let all = run_experiment(&small(Scheme::ALL.to_vec())).unwrap();
    let one = run_experiment(&small(vec![Scheme::Ep])).unwrap();
    for row in &one {
        let twin = all
            .iter()
            .find(|r| r.scheme == row.scheme && r.snr_db == row.snr_db)
            .unwrap();
        assert_eq!(twin, row);
    }
}

#[test]
fn channels_are_shared_across_csi_modes_and_weights() {
    let mut a = small(vec![Scheme::Sd]);
    let mut b = a.clone();
    a.csi.mode = CsiMode::Perfect;
    b.csi.mode = CsiMode::LsPlusAqnm;
    b.weights = WeightMode::RandomOneTwo;
    for t in 0..4 {
        let ia = trial_input(&a, 10.0, t).unwrap();
        let ib = trial_input(&b, 10.0, t).unwrap();
        assert_eq!(ia.h_true, ib.h_true);
        assert_eq!(ia.h_observed, ia.h_true);
        assert_ne!(ib.h_observed, ib.h_true);
        let w: f64 = ib.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-12);
    }
}

#[test]
fn single_trials_replay() {
    let cfg = small(vec![Scheme::Heuristic]);
    let input = trial_input(&cfg, 20.0, 2).unwrap();
    let x = run_scheme(&cfg, Scheme::Heuristic, &input).unwrap();
    let y = run_scheme(&cfg, Scheme::Heuristic, &trial_input(&cfg, 20.0, 2).unwrap()).unwrap();
    assert_eq!(x.precoder, y.precoder);
    assert_eq!(x.sum_rate, y.sum_rate);
}
