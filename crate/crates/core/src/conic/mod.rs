//! Semidefinite programs over the confidence set
//! `U = {A : 0 ⪯ A ⪯ I, ⟨A, Mₖ⟩ ≤ ε}`.
//!
//! All of them are solved by the log-barrier method in [`barrier`]. Matrix
//! variables are vectorized with the isometric `svec` map, so Frobenius inner
//! products become dot products.

mod barrier;
mod chebyshev;
mod tolerant;
mod worst_case;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::cost::{svec_index, CostError, CostMatrix};
use barrier::{Lmi, SparseSym};

pub use chebyshev::{chebyshev_center, CenterResult};
pub use tolerant::{default_big_m, tolerant_center, TolerantCenterResult};
pub use worst_case::{max_over_confidence, WorstCaseResult};

/// Radii at or below this are treated as an empty interior.
pub const RADIUS_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("confidence set has an empty interior (radius {radius:e})")]
    Infeasible { radius: f64 },
    #[error("no violation pattern within the budget of {budget} cuts is feasible")]
    InfeasibleWithBudget { budget: usize },
    #[error("solver stopped before reaching tolerance (gap bound {gap:e})")]
    ToleranceFailure { gap: f64 },
    #[error("problem is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    ToleranceFailure,
}

impl SolverStatus {
    pub fn of(result: &Result<impl Sized, ConicError>) -> Self {
        match result {
            Ok(_) => SolverStatus::Optimal,
            Err(ConicError::ToleranceFailure { .. }) | Err(ConicError::Numerical(_)) => {
                SolverStatus::ToleranceFailure
            }
            Err(_) => SolverStatus::Infeasible,
        }
    }
}

/// `A - shift·I ⪰ 0` and `(1 - shift)·I - A ⪰ 0` over the first `svec_len(dim)`
/// of `nvars` variables. With `shift_var`, the shift is that variable.
fn box_lmis(dim: usize, nvars: usize, shift_var: Option<usize>) -> Vec<Lmi> {
    let mut lower = vec![SparseSym::default(); nvars];
    let mut upper = vec![SparseSym::default(); nvars];
    for (k, (r, c)) in svec_index(dim).into_iter().enumerate() {
        let v = if r == c { 1.0 } else { std::f64::consts::FRAC_1_SQRT_2 };
        lower[k].push(r, c, v);
        upper[k].push(r, c, -v);
    }
    if let Some(s) = shift_var {
        for i in 0..dim {
            lower[s].push(i, i, -1.0);
            upper[s].push(i, i, -1.0);
        }
    }
    vec![
        Lmi {
            constant: DMatrix::zeros(dim, dim),
            coeffs: lower,
        },
        Lmi {
            constant: DMatrix::identity(dim, dim),
            coeffs: upper,
        },
    ]
}

/// `tr(X₊)` for symmetric `X`.
pub(crate) fn positive_part_trace(x: &DMatrix<f64>) -> f64 {
    let sym = (x + x.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0))
        .sum()
}

/// `‖X‖_*` for symmetric `X`.
pub(crate) fn nuclear_norm(x: &DMatrix<f64>) -> f64 {
    nalgebra::SymmetricEigen::new(x.clone())
        .eigenvalues
        .iter()
        .map(|v| v.abs())
        .sum()
}

fn identity_center(dim: usize) -> CostMatrix {
    CostMatrix::scaled_identity(dim, 0.5)
}
