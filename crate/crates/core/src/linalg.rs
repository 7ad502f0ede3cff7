//! Small dense linear-algebra helpers shared by the precoding modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// `tr(P Pᴴ)`, i.e. the squared Frobenius norm.
pub fn power(p: &CMat) -> f64 {
    p.iter().map(|z| z.norm_sqr()).sum()
}

/// AAS scaling factor `sqrt(q / tr(P Pᴴ))`.
pub fn scaling_factor(p: &CMat, q: f64) -> Option<f64> {
    let tr = power(p);
    (tr > 0.0 && tr.is_finite()).then(|| (q / tr).sqrt())
}

/// Upper-triangular `G` with `Gᴴ G = v`.
pub fn cholesky_upper(v: &CMat) -> Result<CMat> {
    let chol = v
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("complex Cholesky"))?;
    Ok(chol.l().adjoint())
}

/// Real symmetric embedding `[[Re V, -Im V], [Im V, Re V]]` of a Hermitian
/// matrix, so that `zᴴ V z = z_rᵀ V_r z_r` for `z_r = [Re z; Im z]`.
pub fn real_embedding(v: &CMat) -> RMat {
    let (r, c) = v.shape();
    let mut out = RMat::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = v[(i, j)];
            out[(i, j)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
            out[(i + r, j + c)] = z.re;
        }
    }
    out
}

/// Stack `[Re z; Im z]`.
pub fn stack_real(z: &CVec) -> RVec {
    let n = z.len();
    RVec::from_fn(2 * n, |i, _| if i < n { z[i].re } else { z[i - n].im })
}

/// Inverse of [`stack_real`].
pub fn unstack_real(x: &RVec) -> CVec {
    let n = x.len() / 2;
    CVec::from_fn(n, |i, _| Complex64::new(x[i], x[i + n]))
}

/// Solve `A X = B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<CMat> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("Hermitian solve"))?;
    Ok(chol.solve(b))
}

/// Relative Frobenius distance `‖a - b‖ / max(‖b‖, tiny)`.
pub fn rel_frobenius(a: &CMat, b: &CMat) -> f64 {
    let diff: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    diff.sqrt() / power(b).sqrt().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_embedding_preserves_quadratic_form() {
        let v = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.5, -0.25),
                Complex64::new(0.5, 0.25),
                Complex64::new(3.0, 0.0),
            ],
        );
        let z = CVec::from_vec(vec![Complex64::new(0.3, -1.0), Complex64::new(-0.7, 0.2)]);
        let complex = (z.adjoint() * &v * &z)[(0, 0)];
        let zr = stack_real(&z);
        let real = (zr.transpose() * real_embedding(&v) * &zr)[(0, 0)];
        assert!(complex.im.abs() < 1e-14);
        assert!((complex.re - real).abs() < 1e-12);
    }

    #[test]
    fn stacking_is_an_isometry() {
        let z = CVec::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)]);
        let x = stack_real(&z);
        assert!((z.norm() - x.norm()).abs() < 1e-14);
        assert_eq!(unstack_real(&x), z);
    }

    #[test]
    fn cholesky_upper_round_trip() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(4.0, 0.0),
                Complex64::new(1.0, 1.0),
                Complex64::new(1.0, -1.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let g = cholesky_upper(&a).unwrap();
        assert_eq!(g[(1, 0)], Complex64::new(0.0, 0.0));
        assert!(rel_frobenius(&(g.adjoint() * &g), &a) < 1e-14);
    }
}
