//! Ground-truth cost matrices for simulated subjects.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use super::ElicitError;
use crate::cost::{symmetrize, CostMatrix};

/// `GGᵀ / λ_max(GGᵀ)` for a standard Gaussian `d × d` matrix `G`.
pub fn gen_truth_random<R: Rng>(d: usize, rng: &mut R) -> CostMatrix {
    assert!(d >= 1, "dimension must be positive");
    loop {
        let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let a = &g * g.transpose();
        let a = (&a + a.transpose()) * 0.5;
        if let Ok(m) = CostMatrix::new(a) {
            if m.max_eigenvalue() > 0.0 {
                return m.normalized();
            }
        }
    }
}

/// Fixed point of `A ← Q + A − A(R + A)⁻¹A` started from `Q + I`, i.e. the
/// solution of `Q = A(R + A)⁻¹A`: the quadratic value function of a
/// linear-quadratic control problem with state cost `Q` and control cost `R`.
///
/// `Q = 0` returns `0` directly; the iteration converges to it only
/// sublinearly.
pub fn gen_truth_lqr(q: &DMatrix<f64>, r: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<CostMatrix, ElicitError> {
    let q = symmetrize(q.clone())?;
    let r = symmetrize(r.clone())?;
    if q.shape() != r.shape() {
        return Err(ElicitError::InvalidArgument("Q and R differ in shape".into()));
    }
    CostMatrix::new(q.clone()).map_err(|_| ElicitError::InvalidArgument("Q is not PSD".into()))?;
    if Cholesky::new(r.clone()).is_none() {
        return Err(ElicitError::InvalidArgument("R is not positive definite".into()));
    }
    let d = q.nrows();
    if q.iter().all(|&v| v == 0.0) {
        return Ok(CostMatrix::zeros(d));
    }
    let mut a = &q + DMatrix::identity(d, d);
    for _ in 0..max_iter {
        let solved = Cholesky::new(&r + &a)
            .ok_or(ElicitError::InvalidArgument("R + A lost definiteness".into()))?
            .solve(&a);
        let image = &a * solved;
        let image = (&image + image.transpose()) * 0.5;
        if (&q - &image).norm() <= tol {
            return Ok(CostMatrix::new(a)?);
        }
        a = &q + &a - image;
        a = (&a + a.transpose()) * 0.5;
    }
    Err(ElicitError::NoConvergence { iterations: max_iter })
}

/// `(I − W)ᵀ D⁻¹ (I − W)`, the precision matrix of the linear Gaussian SEM
/// `x = Wx + e`, `e ~ N(0, D)`. Not normalized.
pub fn gen_truth_causal(w: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<CostMatrix, ElicitError> {
    let d = w.nrows();
    if w.ncols() != d || noise.shape() != (d, d) {
        return Err(ElicitError::InvalidArgument("W and D must be square and of equal size".into()));
    }
    let b = DMatrix::identity(d, d) - w;
    if b.clone().lu().determinant().abs() < 1e-12 {
        return Err(ElicitError::InvalidArgument("I − W is singular".into()));
    }
    let noise = symmetrize(noise.clone())?;
    let dinv = Cholesky::new(noise)
        .ok_or(ElicitError::InvalidArgument("D is not positive definite".into()))?
        .inverse();
    let a = b.transpose() * dinv * &b;
    Ok(CostMatrix::new((&a + a.transpose()) * 0.5)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_truth_has_unit_spectral_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(gen_truth_random(1, &mut rng).as_matrix()[(0, 0)], 1.0);
        for d in 2..8 {
            assert_abs_diff_eq!(gen_truth_random(d, &mut rng).max_eigenvalue(), 1.0, epsilon = 1e-9);
        }
        let a = gen_truth_random(4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = gen_truth_random(4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn lqr_scalar_is_golden_ratio() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let a = gen_truth_lqr(&one, &one, 1e-12, 1000).unwrap();
        assert_abs_diff_eq!(a.as_matrix()[(0, 0)], (1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-9);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(gen_truth_lqr(&zero, &DMatrix::identity(2, 2), 1e-8, 10).unwrap(), CostMatrix::zeros(2));
    }

    #[test]
    fn causal_two_dim() {
        let w = 0.7;
        let wm = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, w, 0.0]);
        let a = gen_truth_causal(&wm, &DMatrix::identity(2, 2)).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0 + w * w, -w, -w, 1.0]);
        assert_abs_diff_eq!(a.as_matrix(), &expected, epsilon = 1e-12);
        let i = gen_truth_causal(&DMatrix::zeros(3, 3), &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(i, CostMatrix::identity(3));
        assert!(gen_truth_causal(&DMatrix::identity(2, 2), &DMatrix::identity(2, 2)).is_err());
    }
}
