use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::barrier::{self, Options, Problem};
use super::{box_lmis, identity_center, ConicError, SolverStatus, RADIUS_FLOOR};
use crate::cost::{smat, svec, svec_len, ConfidenceSetSpec, CostMatrix};

/// Center and radius of the largest Frobenius ball whose center lies in
/// `0 ⪯ A ⪯ I` and which stays inside every cut halfspace.
#[derive(Debug, Clone, Serialize)]
pub struct CenterResult {
    pub center: CostMatrix,
    pub radius: f64,
    pub status: SolverStatus,
    /// Lagrange multipliers of the cuts, aligned with `ConfidenceSetSpec::cuts`.
    /// Zero cuts carry multiplier 0.
    #[serde(skip)]
    pub multipliers: Vec<f64>,
}

pub(crate) struct RawCenter {
    pub center: CostMatrix,
    /// Optimal radius, negative when the cuts leave no room at all.
    pub radius: f64,
    pub multipliers: Vec<f64>,
}

/// Cut `⟨A, M⟩ + r‖M‖ ≤ rhs`.
pub(crate) struct BallCut<'a> {
    pub matrix: &'a DMatrix<f64>,
    pub norm: f64,
    pub rhs: f64,
}

/// Solves the ball-inscription SDP for nonzero cuts. Requires at least one cut.
pub(crate) fn solve_center(dim: usize, cuts: &[BallCut<'_>]) -> Result<RawCenter, ConicError> {
    debug_assert!(!cuts.is_empty());
    let n = svec_len(dim);
    let r_var = n;
    let mut c = DVector::zeros(n + 1);
    c[r_var] = -1.0;

    let half = DMatrix::identity(dim, dim) * 0.5;
    let mut r0 = f64::INFINITY;
    let rows = cuts
        .iter()
        .map(|cut| {
            let mut a = DVector::zeros(n + 1);
            a.rows_mut(0, n).copy_from(&svec(cut.matrix));
            a[r_var] = cut.norm;
            r0 = r0.min((cut.rhs - crate::cost::inner(&half, cut.matrix)) / cut.norm);
            (a, cut.rhs)
        })
        .collect();

    let problem = Problem {
        c,
        rows,
        lmis: box_lmis(dim, n + 1, None),
    };
    let mut x0 = DVector::zeros(n + 1);
    x0.rows_mut(0, n).copy_from(&svec(&half));
    x0[r_var] = r0 - 1.0;

    let sol = barrier::solve(&problem, x0, &Options::default())?;
    Ok(RawCenter {
        center: CostMatrix::from_solver(smat(&sol.x.as_slice()[..n], dim)),
        radius: sol.x[r_var],
        multipliers: sol.row_duals.iter().copied().collect(),
    })
}

/// Chebyshev center of the confidence set.
///
/// With no (nonzero) cuts the set is the whole box `0 ⪯ A ⪯ I`, and the
/// center is `½I` with radius `½` by convention.
pub fn chebyshev_center(spec: &ConfidenceSetSpec) -> Result<CenterResult, ConicError> {
    if spec.dim() == 0 {
        return Err(ConicError::InvalidArgument("dimension must be at least 1".into()));
    }
    let active: Vec<usize> = (0..spec.cuts().len())
        .filter(|&k| !spec.cuts()[k].is_zero())
        .collect();
    let mut multipliers = vec![0.0; spec.cuts().len()];
    if active.is_empty() {
        return Ok(CenterResult {
            center: identity_center(spec.dim()),
            radius: 0.5,
            status: SolverStatus::Optimal,
            multipliers,
        });
    }
    let cuts: Vec<BallCut<'_>> = active
        .iter()
        .map(|&k| BallCut {
            matrix: spec.cuts()[k].matrix(),
            norm: spec.cuts()[k].norm(),
            rhs: spec.margin(),
        })
        .collect();
    let raw = solve_center(spec.dim(), &cuts)?;
    if raw.radius <= RADIUS_FLOOR {
        return Err(ConicError::Infeasible { radius: raw.radius });
    }
    for (&k, &m) in active.iter().zip(&raw.multipliers) {
        multipliers[k] = m;
    }
    Ok(CenterResult {
        center: raw.center,
        radius: raw.radius,
        status: SolverStatus::Optimal,
        multipliers,
    })
}
