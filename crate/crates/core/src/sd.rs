//! Schnorr-Euchner sphere decoder for [`IlsProblem`], plus an exhaustive
//! oracle for small instances.
//!
//! The search is depth-first from the last coordinate down to the first.
//! At each level the candidate labels are visited in ascending order of
//! `|ξ_m − G_mm·l|`, where `ξ_m = c_m − Σ_{j>m} G_mj p_j`. The radius starts
//! at infinity, so the first descent is the greedy path and its residual
//! becomes the first radius. Because candidates are sorted, the first
//! sibling whose partial distance reaches the radius ends the level.

use crate::error::{Error, Result};
use crate::ils::IlsProblem;
use crate::linalg::{RMat, RVec};

/// Largest `L^n` accepted by [`brute_force_ils`].
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SdStats {
    /// Tree nodes accepted inside the radius.
    pub nodes: u64,
    /// Leaves that improved the incumbent.
    pub improvements: u64,
    /// Residual of the first (greedy) leaf.
    pub first_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdSolution {
    pub p: RVec,
    pub objective: f64,
    pub stats: SdStats,
}

/// Core search; `visit(level, candidate_rank, partial_distance)` is called
/// for every candidate examined, including the one that triggers pruning.
fn search<F: FnMut(usize, usize, f64)>(prob: &IlsProblem, mut visit: F) -> SdSolution {
    let n = prob.dim();
    let g = prob.g();
    let c = prob.c();
    let labels = prob.labels();
    let num_labels = labels.len();

    let mut p = RVec::zeros(n);
    let mut best = RVec::zeros(n);
    let mut radius = f64::INFINITY;
    let mut stats = SdStats {
        first_radius: f64::INFINITY,
        ..Default::default()
    };

    let mut xi = vec![0.0; n];
    let mut order = vec![Vec::<usize>::with_capacity(num_labels); n];
    let mut pos = vec![0usize; n];
    // acc[m] is the partial distance of levels m..n; acc[n] = 0
    let mut acc = vec![0.0; n + 1];

    let enter = |m: usize, p: &RVec, xi: &mut [f64], order: &mut [Vec<usize>], pos: &mut [usize]| {
        let mut s = c[m];
        for j in m + 1..n {
            s -= g[(m, j)] * p[j];
        }
        xi[m] = s;
        let gmm = g[(m, m)];
        let ord = &mut order[m];
        ord.clear();
        ord.extend(0..num_labels);
        // stable sort keeps the lower label index first on ties
        ord.sort_by(|&a, &b| {
            (s - gmm * labels[a])
                .abs()
                .total_cmp(&(s - gmm * labels[b]).abs())
        });
        pos[m] = 0;
    };

    let mut m = n - 1;
    enter(m, &p, &mut xi, &mut order, &mut pos);
    loop {
        let mut ascend = pos[m] >= num_labels;
        if !ascend {
            let rank = pos[m];
            let label = labels[order[m][rank]];
            let r = xi[m] - g[(m, m)] * label;
            let partial = acc[m + 1] + r * r;
            visit(m, rank, partial);
            if partial >= radius {
                // later candidates at this level are no closer
                ascend = true;
            } else {
                p[m] = label;
                acc[m] = partial;
                stats.nodes += 1;
                if m == 0 {
                    if stats.improvements == 0 {
                        stats.first_radius = partial;
                    }
                    stats.improvements += 1;
                    radius = partial;
                    best.copy_from(&p);
                    pos[0] += 1;
                } else {
                    m -= 1;
                    enter(m, &p, &mut xi, &mut order, &mut pos);
                }
            }
        }
        if ascend {
            m += 1;
            if m == n {
                break;
            }
            pos[m] += 1;
        }
    }
    let objective = prob.objective(&best);
    SdSolution {
        p: best,
        objective,
        stats,
    }
}

/// Global minimizer of `‖c − G p‖²` over the label alphabet.
pub fn sphere_decode(prob: &IlsProblem) -> SdSolution {
    search(prob, |_, _, _| {})
}

/// Permutation `perm` (position → original coordinate) that fills the
/// search levels from the last one down, each time taking the remaining
/// coordinate with the smallest conditional variance `[V⁻¹]_jj`, where
/// `V = GᵀG`. This makes the diagonal of the reordered factor large at the
/// levels searched first, which tightens pruning near the root.
pub fn search_order(prob: &IlsProblem) -> Vec<usize> {
    let n = prob.dim();
    let v = prob.g().transpose() * prob.g();
    let mut w = match v.try_inverse() {
        Some(w) => w,
        None => return (0..n).collect(),
    };
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut perm = vec![0; n];
    for pos in (0..n).rev() {
        let (slot, &j) = remaining
            .iter()
            .enumerate()
            .min_by(|a, b| w[(*a.1, *a.1)].total_cmp(&w[(*b.1, *b.1)]))
            .expect("non-empty");
        perm[pos] = j;
        remaining.swap_remove(slot);
        let wjj = w[(j, j)];
        let col = w.column(j).into_owned();
        for &a in &remaining {
            for &b in &remaining {
                w[(a, b)] -= col[a] * col[b] / wjj;
            }
        }
    }
    perm
}

/// [`sphere_decode`] on the problem with coordinates reordered by
/// [`search_order`]. The reordered problem has the same objective for every
/// label vector, so the minimum is the same; only the search effort
/// changes. The returned vector and objective refer to the original
/// coordinates.
pub fn sphere_decode_sorted(prob: &IlsProblem) -> SdSolution {
    let n = prob.dim();
    let perm = search_order(prob);
    let g = prob.g();
    let v = g.transpose() * g;
    let vp = RMat::from_fn(n, n, |a, b| v[(perm[a], perm[b])]);
    let chol = match vp.cholesky() {
        Some(c) => c,
        None => return sphere_decode(prob),
    };
    let b = g.transpose() * prob.c();
    let bp = RVec::from_fn(n, |a, _| b[perm[a]]);
    let cp = match chol.l().solve_lower_triangular(&bp) {
        Some(c) => c,
        None => return sphere_decode(prob),
    };
    let reordered = match IlsProblem::new(chol.l().transpose(), cp, prob.labels().to_vec()) {
        Ok(p) => p,
        Err(_) => return sphere_decode(prob),
    };
    let sol = sphere_decode(&reordered);
    let mut p = RVec::zeros(n);
    for (pos, &orig) in perm.iter().enumerate() {
        p[orig] = sol.p[pos];
    }
    let objective = prob.objective(&p);
    SdSolution {
        p,
        objective,
        stats: sol.stats,
    }
}

/// Exhaustive search; returns the lexicographically first minimizer in
/// label-index order (coordinate 0 most significant).
pub fn brute_force_ils(prob: &IlsProblem) -> Result<(RVec, f64)> {
    let n = prob.dim();
    let labels = prob.labels();
    let size = (labels.len() as f64).powi(n as i32);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            size,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut idx = vec![0usize; n];
    let mut p = RVec::from_element(n, labels[0]);
    let mut best = p.clone();
    let mut best_obj = prob.objective(&p);
    loop {
        // odometer with the last coordinate fastest
        let mut k = n;
        loop {
            if k == 0 {
                return Ok((best, best_obj));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < labels.len() {
                p[k] = labels[idx[k]];
                break;
            }
            idx[k] = 0;
            p[k] = labels[0];
        }
        let obj = prob.objective(&p);
        if obj < best_obj {
            best_obj = obj;
            best.copy_from(&p);
        }
    }
}

/// Greedy (Babai-like) descent: nearest label per level given the levels
/// already fixed. Returns the path and its residual.
pub fn greedy_descent(prob: &IlsProblem) -> (RVec, f64) {
    let n = prob.dim();
    let g = prob.g();
    let mut p = RVec::zeros(n);
    for m in (0..n).rev() {
        let mut xi = prob.c()[m];
        for j in m + 1..n {
            xi -= g[(m, j)] * p[j];
        }
        p[m] = prob.nearest_label(xi / g[(m, m)]);
    }
    let r = prob.objective(&p);
    (p, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, labels: &[f64]) -> IlsProblem {
        let a = RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let spd = a.transpose() * &a + RMat::identity(n, n) * 0.5;
        let g = spd.cholesky().unwrap().l().transpose();
        let c = RVec::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        IlsProblem::new(g, c, labels.to_vec()).unwrap()
    }

    #[test]
    fn diagonal_problem_decouples() {
        let prob = IlsProblem::new(
            RMat::identity(2, 2),
            RVec::from_vec(vec![0.4, -1.2]),
            vec![-0.5, 0.5],
        )
        .unwrap();
        let sol = sphere_decode(&prob);
        assert_eq!(sol.p.as_slice(), &[0.5, -0.5]);
        let (bf, _) = brute_force_ils(&prob).unwrap();
        assert_eq!(bf.as_slice(), &[0.5, -0.5]);
    }

    #[test]
    fn exact_fit_recovers_label_vector() {
        let labels = [-1.5, -0.5, 0.5, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let base = random_problem(&mut rng, 6, &labels);
            let p0 = RVec::from_fn(6, |_, _| labels[rng.random_range(0..4)]);
            let c = base.g() * &p0;
            let prob = IlsProblem::new(base.g().clone(), c, labels.to_vec()).unwrap();
            let sol = sphere_decode(&prob);
            assert_eq!(sol.p, p0);
            assert!(sol.objective < 1e-20);
        }
    }

    #[test]
    fn two_dim_two_label_brute_force_inspection() {
        let g = RMat::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let prob = IlsProblem::new(g, RVec::from_vec(vec![0.2, 0.9]), vec![-1.0, 1.0]).unwrap();
        let cands = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]];
        let objs: Vec<f64> = cands
            .iter()
            .map(|v| prob.objective(&RVec::from_row_slice(v)))
            .collect();
        let argmin = (0..4).min_by(|&a, &b| objs[a].total_cmp(&objs[b])).unwrap();
        let (bf, obj) = brute_force_ils(&prob).unwrap();
        assert_eq!(bf.as_slice(), &cands[argmin]);
        assert_eq!(obj, objs[argmin]);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let labels = [-1.5, -0.5, 0.5, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let prob = random_problem(&mut rng, 6, &labels);
            let sd = sphere_decode(&prob);
            let (_, bf) = brute_force_ils(&prob).unwrap();
            assert!((sd.objective - bf).abs() <= 1e-12, "{} vs {}", sd.objective, bf);
        }
    }

    #[test]
    fn sorted_search_matches_brute_force() {
        let labels = [-1.5, -0.5, 0.5, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let prob = random_problem(&mut rng, 6, &labels);
            let sd = sphere_decode_sorted(&prob);
            let (_, bf) = brute_force_ils(&prob).unwrap();
            assert!((sd.objective - bf).abs() <= 1e-10, "{} vs {}", sd.objective, bf);
        }
    }

    #[test]
    fn search_order_is_a_permutation() {
        let labels = [-0.5, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prob = random_problem(&mut rng, 7, &labels);
        let mut perm = search_order(&prob);
        perm.sort_unstable();
        assert_eq!(perm, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn first_radius_is_the_greedy_residual() {
        let labels = [-1.5, -0.5, 0.5, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let prob = random_problem(&mut rng, 6, &labels);
            let sol = sphere_decode(&prob);
            let (_, r1) = greedy_descent(&prob);
            assert!((sol.stats.first_radius - r1).abs() <= 1e-12 * r1.max(1.0));
            assert!(sol.objective <= r1 + 1e-12);
        }
    }

    #[test]
    fn visit_order_is_sorted_and_never_repeats() {
        let labels = [-1.5, -0.5, 0.5, 1.5];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let prob = random_problem(&mut rng, 5, &labels);
        let mut log: Vec<(usize, usize, f64)> = Vec::new();
        search(&prob, |m, rank, d| log.push((m, rank, d)));
        // within one visit to a level the ranks increase by one and the
        // partial distances are non-decreasing
        for w in log.windows(2) {
            let ((m0, r0, d0), (m1, r1, d1)) = (w[0], w[1]);
            if m0 == m1 && r1 > r0 {
                assert_eq!(r1, r0 + 1);
                assert!(d1 >= d0 - 1e-12);
            }
        }
        // radius is non-increasing: record improvements directly
        let mut radius = f64::INFINITY;
        let mut radii = Vec::new();
        search(&prob, |m, _, d| {
            if m == 0 && d < radius {
                radius = d;
                radii.push(d);
            }
        });
        assert!(radii.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn brute_force_guard() {
        let prob = IlsProblem::new(RMat::identity(24, 24), RVec::zeros(24), vec![-1.0, 0.0, 1.0, 2.0])
            .unwrap();
        assert!(matches!(
            brute_force_ils(&prob),
            Err(Error::SearchSpaceTooLarge { .. })
        ));
    }
}
