use proptest::prelude::*;

use qaprecode::baselines::continuous_p3;
use qaprecode::ep::{ep_solve, EpConfig};
use qaprecode::linalg::{self, RMat, RVec};
use qaprecode::sd::{brute_force_ils, greedy_descent, sphere_decode, sphere_decode_sorted};
use qaprecode::wmmse::{reduce_to_ils, sum_rate};
use qaprecode::{CMat, Complex64, IlsProblem, QuantizerSpec};

fn ils_problem(dim: usize, levels: usize) -> impl Strategy<Value = IlsProblem> {
    let n_upper = dim * (dim - 1) / 2;
    (
        prop::collection::vec(0.3f64..2.0, dim),
        prop::collection::vec(-1.0f64..1.0, n_upper),
        prop::collection::vec(-4.0f64..4.0, dim),
        0.2f64..1.5,
    )
        .prop_map(move |(diag, upper, x, step)| {
            let mut it = upper.into_iter();
            let mut g = RMat::zeros(dim, dim);
            for i in 0..dim {
                g[(i, i)] = diag[i];
                for j in i + 1..dim {
                    g[(i, j)] = it.next().unwrap();
                }
            }
            let c = &g * RVec::from_vec(x);
            let spec = QuantizerSpec::new(levels, step).unwrap();
            IlsProblem::new(g, c, spec.labels().to_vec()).unwrap()
        })
}

fn cmat(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
        CMat::from_iterator(rows, cols, v.into_iter().map(|(re, im)| Complex64::new(re, im)))
    })
}

fn in_alphabet(prob: &IlsProblem, p: &RVec) -> bool {
    p.iter().all(|x| prob.labels().contains(x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_decoder_is_optimal(prob in ils_problem(4, 4)) {
        let (_, bf) = brute_force_ils(&prob).unwrap();
        let sd = sphere_decode(&prob);
        prop_assert!((sd.objective - bf).abs() <= 1e-9 * (1.0 + bf));
        prop_assert!(in_alphabet(&prob, &sd.p));
    }

    #[test]
    fn sorted_search_finds_the_same_optimum(prob in ils_problem(6, 4)) {
        let a = sphere_decode(&prob);
        let b = sphere_decode_sorted(&prob);
        prop_assert!((a.objective - b.objective).abs() <= 1e-9 * (1.0 + a.objective));
    }

    #[test]
    fn heuristics_never_beat_the_sphere_decoder(prob in ils_problem(6, 8)) {
        let sd = sphere_decode(&prob);
        let (gp, gobj) = greedy_descent(&prob);
        let ep = ep_solve(&prob, &EpConfig::default());
        prop_assert!(in_alphabet(&prob, &gp));
        prop_assert!(in_alphabet(&prob, &ep.p));
        prop_assert!(gobj >= sd.objective - 1e-9);
        prop_assert!(ep.objective >= sd.objective - 1e-9);
        prop_assert!(ep.objective.is_finite());
    }

    #[test]
    fn continuous_step_respects_the_budget(h in cmat(2, 4), q in 0.01f64..10.0, d0 in 0.5f64..3.0, d1 in 0.5f64..3.0) {
        let beta = [Complex64::new(0.7, 0.1), Complex64::new(-0.2, 0.5)];
        let (p, omega) = continuous_p3(&h, &[d0, d1], &beta, q).unwrap();
        prop_assert!(omega >= 0.0);
        prop_assert!(linalg::power(&p) <= q * (1.0 + 1e-9));
    }

    #[test]
    fn sum_rate_is_scale_invariant(h in cmat(2, 4), p in cmat(4, 2), s in 0.1f64..10.0) {
        prop_assume!(linalg::power(&p) > 1e-6);
        let w = [1.0, 1.0];
        let a = sum_rate(&h, &p, 1.0, 0.1, &w).unwrap();
        let b = sum_rate(&h, &(&p * Complex64::from(s)), 1.0, 0.1, &w).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn reduction_reproduces_the_quadratic_form(h in cmat(2, 3), x in cmat(3, 1), omega in 0.01f64..2.0) {
        let d = [1.3, 0.8];
        let beta = [Complex64::new(0.4, -0.2), Complex64::new(0.1, 0.6)];
        let prob = reduce_to_ils(&h, &d, &beta, omega, 0, &[-1.0, 1.0]).unwrap();
        let p = x.column(0).into_owned();
        let xr = linalg::stack_real(&p);
        let lhs = prob.objective(&xr) - prob.c().norm_squared();
        let v = qaprecode::wmmse::lagrangian_hessian(&h, &d, &beta, omega);
        let f = qaprecode::wmmse::linear_term(&h, &d, &beta, 0);
        let quad = (p.adjoint() * &v * &p)[(0, 0)].re;
        let lin = f.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<Complex64>().re;
        let rhs = quad - 2.0 * lin;
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
    }
}
