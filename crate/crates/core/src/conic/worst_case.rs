use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::barrier::{self, Options, Problem};
use super::{box_lmis, positive_part_trace, ConicError};
use crate::cost::{inner, min_eigenvalue, smat, svec, svec_len, symmetrize, ConfidenceSetSpec, CostError, CostMatrix, PSD_TOL};

/// Relaxation applied to the margin when the confidence set has no interior.
const MARGIN_RELAXATION: f64 = 1e-9;

/// `max ⟨A, S⟩` over the confidence set, with a dual certificate.
#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseResult {
    pub value: f64,
    pub argmax: CostMatrix,
    /// Objective of the explicit dual point `U = (S − Σ tₖMₖ)₊`, `t` the cut multipliers.
    pub dual_value: f64,
    pub gap: f64,
    #[serde(skip)]
    pub multipliers: Vec<f64>,
}

/// Worst-case value of the linear objective `⟨A, S⟩` for PSD `S`.
pub fn max_over_confidence(s: &DMatrix<f64>, spec: &ConfidenceSetSpec) -> Result<WorstCaseResult, ConicError> {
    let dim = spec.dim();
    if s.nrows() != dim {
        return Err(CostError::DimensionMismatch {
            expected: dim,
            found: s.nrows(),
        }
        .into());
    }
    let s = symmetrize(s.clone())?;
    let min_eig = min_eigenvalue(&s);
    if min_eig < PSD_TOL * s.amax().max(1.0) {
        return Err(CostError::NotPsd { min_eigenvalue: min_eig }.into());
    }

    let active: Vec<usize> = (0..spec.cuts().len())
        .filter(|&k| !spec.cuts()[k].is_zero())
        .collect();
    let mut multipliers = vec![0.0; spec.cuts().len()];
    if active.is_empty() {
        // A = I is optimal for PSD S, and U = S certifies it.
        let value = s.trace();
        return Ok(WorstCaseResult {
            value,
            argmax: CostMatrix::identity(dim),
            dual_value: value,
            gap: 0.0,
            multipliers,
        });
    }
    let cuts: Vec<&DMatrix<f64>> = active.iter().map(|&k| spec.cuts()[k].matrix()).collect();

    let (start, margin) = match strict_start(dim, &cuts, spec.margin())? {
        Some(a) => (a, spec.margin()),
        None => {
            let margin = spec.margin() + MARGIN_RELAXATION;
            let start = strict_start(dim, &cuts, margin)?
                .ok_or(ConicError::Numerical("no interior point after margin relaxation"))?;
            (start, margin)
        }
    };

    let n = svec_len(dim);
    let problem = Problem {
        c: -svec(&s),
        rows: cuts.iter().map(|m| (svec(m), margin)).collect(),
        lmis: box_lmis(dim, n, None),
    };
    let sol = barrier::solve(&problem, svec(&start), &Options::default())?;
    let argmax = CostMatrix::from_solver(smat(sol.x.as_slice(), dim));
    let value = inner(argmax.as_matrix(), &s);

    let mut residual = s.clone();
    for (m, &t) in cuts.iter().zip(sol.row_duals.iter()) {
        residual -= *m * t;
    }
    let dual_value = positive_part_trace(&residual) + spec.margin() * sol.row_duals.sum();
    for (&k, &t) in active.iter().zip(sol.row_duals.iter()) {
        multipliers[k] = t;
    }
    Ok(WorstCaseResult {
        value,
        argmax,
        dual_value,
        gap: (value - dual_value).abs(),
        multipliers,
    })
}

/// A strictly feasible `A`: first `δI` for shrinking `δ`, then a phase-I solve.
/// `None` when the set has no interior under `margin`.
fn strict_start(dim: usize, cuts: &[&DMatrix<f64>], margin: f64) -> Result<Option<DMatrix<f64>>, ConicError> {
    let traces: Vec<f64> = cuts.iter().map(|m| m.trace()).collect();
    let mut delta = 0.5;
    for _ in 0..40 {
        if traces.iter().all(|&t| delta * t < margin) {
            return Ok(Some(DMatrix::identity(dim, dim) * delta));
        }
        delta *= 0.5;
    }
    phase_one(dim, cuts, margin)
}

/// `max s` s.t. `sI ⪯ A ⪯ (1−s)I`, `⟨A, Mₖ⟩ + s ≤ margin`; stops once `s > 0`.
fn phase_one(dim: usize, cuts: &[&DMatrix<f64>], margin: f64) -> Result<Option<DMatrix<f64>>, ConicError> {
    let n = svec_len(dim);
    let s_var = n;
    let half = DMatrix::identity(dim, dim) * 0.5;
    let mut s0 = 0.0f64;
    let rows = cuts
        .iter()
        .map(|m| {
            let mut a = DVector::zeros(n + 1);
            a.rows_mut(0, n).copy_from(&svec(m));
            a[s_var] = 1.0;
            s0 = s0.min(margin - inner(&half, m));
            (a, margin)
        })
        .collect();
    let mut c = DVector::zeros(n + 1);
    c[s_var] = -1.0;
    let problem = Problem {
        c,
        rows,
        lmis: box_lmis(dim, n + 1, Some(s_var)),
    };
    let mut x0 = DVector::zeros(n + 1);
    x0.rows_mut(0, n).copy_from(&svec(&half));
    x0[s_var] = s0 - 1.0;
    let opts = Options {
        stop_below: Some(-1e-12),
        ..Options::default()
    };
    let sol = barrier::solve(&problem, x0, &opts)?;
    if sol.x[s_var] <= 1e-12 {
        return Ok(None);
    }
    Ok(Some(smat(&sol.x.as_slice()[..n], dim)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{CutMatrix, FeatureVector};
    use approx::assert_abs_diff_eq;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    #[test]
    fn unconstrained_rank_one() {
        let v = DVector::from_vec(vec![0.6, 0.8]);
        let s = &v * v.transpose();
        let res = max_over_confidence(&s, &ConfidenceSetSpec::unconstrained(2, 0.01)).unwrap();
        assert_abs_diff_eq!(res.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn scalar_lp() {
        let pts = [fv(&[0.0]), fv(&[1.0]), fv(&[2.0])];
        let cut = CutMatrix::new((2, 1), &pts[2], &pts[1], &pts[0]).unwrap();
        let spec = ConfidenceSetSpec::new(1, 0.01, vec![cut]).unwrap();
        let res = max_over_confidence(&DMatrix::from_element(1, 1, 4.0), &spec).unwrap();
        assert_abs_diff_eq!(res.value, 4.0 / 300.0, epsilon = 1e-7);
        assert!(res.gap <= 1e-5);
    }

    #[test]
    fn zero_objective() {
        let pts = [fv(&[0.0, 0.0]), fv(&[1.0, 0.0]), fv(&[0.0, 1.0])];
        let cut = CutMatrix::new((1, 2), &pts[1], &pts[2], &pts[0]).unwrap();
        let spec = ConfidenceSetSpec::new(2, 0.01, vec![cut]).unwrap();
        let res = max_over_confidence(&DMatrix::zeros(2, 2), &spec).unwrap();
        assert_abs_diff_eq!(res.value, 0.0, epsilon = 1e-12);
        assert!(spec.contains(&res.argmax, 1e-7));
    }

    #[test]
    fn interior_free_set_still_solves() {
        // Indifference with ε = 0 pins ⟨A, M⟩ = 0 exactly.
        let pts = [fv(&[0.0, 0.0]), fv(&[1.0, 0.0]), fv(&[0.0, 1.0])];
        let a = CutMatrix::new((1, 2), &pts[1], &pts[2], &pts[0]).unwrap();
        let b = CutMatrix::new((2, 1), &pts[2], &pts[1], &pts[0]).unwrap();
        let spec = ConfidenceSetSpec::new(2, 0.0, vec![a, b]).unwrap();
        let res = max_over_confidence(&DMatrix::identity(2, 2), &spec).unwrap();
        assert_abs_diff_eq!(res.value, 2.0, epsilon = 1e-6);
        assert!(res.gap <= 1e-5);
    }

    #[test]
    fn rejects_indefinite_objective() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(max_over_confidence(&s, &ConfidenceSetSpec::unconstrained(2, 0.01)).is_err());
    }
}
