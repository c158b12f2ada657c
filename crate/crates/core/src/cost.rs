//! Mahalanobis cost algebra.
//!
//! A subject's effort to move from `x0` to `x` is modelled as
//! `(x - x0)ᵀ A (x - x0)` for a symmetric positive semidefinite `A`. Every
//! answered comparison between two candidate recourses `xi` and `xj` becomes a
//! linear cut `⟨A, M_ij⟩ ≤ ε` on the space of cost matrices, where `M_ij` is
//! the [`CutMatrix`] built by [`pair_matrix`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest asymmetry `max |A - Aᵀ|` accepted before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalue floor for the PSD check.
pub const PSD_TOL: f64 = -1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("non-finite entry")]
    NonFinite,
}

/// A point in the (scaled) feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(DVector<f64>);

impl FeatureVector {
    pub fn new(values: DVector<f64>) -> Result<Self, CostError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CostError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self, CostError> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub(crate) fn check_dim(&self, other: &FeatureVector) -> Result<(), CostError> {
        if self.dim() != other.dim() {
            return Err(CostError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        FeatureVector::from_slice(&values).map_err(serde::de::Error::custom)
    }
}

/// Symmetric PSD cost matrix `A` of a Mahalanobis cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix(DMatrix<f64>);

impl CostMatrix {
    /// Symmetrizes `m` and checks the PSD floor.
    pub fn new(m: DMatrix<f64>) -> Result<Self, CostError> {
        let m = symmetrize(m)?;
        let min_eig = min_eigenvalue(&m);
        if min_eig < PSD_TOL {
            return Err(CostError::NotPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(Self(m))
    }

    /// Clips eigenvalues into `[0, 1]`. Used only on solver output, whose
    /// iterates are strictly feasible up to rounding.
    pub(crate) fn from_solver(m: DMatrix<f64>) -> Self {
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m.clone());
        if eig.eigenvalues.min() >= 0.0 && eig.eigenvalues.max() <= 1.0 {
            return Self(m);
        }
        let clipped = eig.eigenvalues.map(|v| v.clamp(0.0, 1.0));
        Self(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose())
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self(DMatrix::identity(dim, dim) * scale)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CostError> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.0.clone()).eigenvalues
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().max()
    }

    /// Rescales to unit spectral radius. The zero matrix is returned unchanged.
    pub fn normalized(&self) -> Self {
        let top = self.max_eigenvalue();
        if top <= 0.0 {
            return self.clone();
        }
        Self(&self.0 / top)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_rows(&self.0)
    }
}

impl Serialize for CostMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CostMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        CostMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Cut `M_ij` induced by the preference `xi P xj` for subject `x0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutMatrix {
    matrix: DMatrix<f64>,
    source: (usize, usize),
    norm: f64,
}

impl CutMatrix {
    pub fn new(
        source: (usize, usize),
        xi: &FeatureVector,
        xj: &FeatureVector,
        x0: &FeatureVector,
    ) -> Result<Self, CostError> {
        Ok(Self::from_matrix(source, pair_matrix(xi, xj, x0)?))
    }

    pub(crate) fn from_matrix(source: (usize, usize), matrix: DMatrix<f64>) -> Self {
        let norm = matrix.norm();
        Self {
            matrix,
            source,
            norm,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source(&self) -> (usize, usize) {
        self.source
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.norm == 0.0
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Ordered preference pairs `(i, j)` meaning "candidate `i` is weakly preferred to `j`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSet {
    pairs: Vec<(usize, usize)>,
    margin: f64,
}

impl PreferenceSet {
    pub fn new(margin: f64) -> Self {
        Self {
            pairs: Vec::new(),
            margin,
        }
    }

    /// Adds `(i, j)`; returns false when it was already present.
    pub fn insert(&mut self, i: usize, j: usize) -> bool {
        if self.pairs.contains(&(i, j)) {
            return false;
        }
        self.pairs.push((i, j));
        true
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i, j))
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// The polytope `U_P = {A : 0 ⪯ A ⪯ I, ⟨A, M_ij⟩ ≤ ε}` in implicit form.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSetSpec {
    cuts: Vec<CutMatrix>,
    margin: f64,
    dim: usize,
}

impl ConfidenceSetSpec {
    pub fn new(dim: usize, margin: f64, cuts: Vec<CutMatrix>) -> Result<Self, CostError> {
        if let Some(bad) = cuts.iter().find(|c| c.dim() != dim) {
            return Err(CostError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { cuts, margin, dim })
    }

    /// The uninformative set `{0 ⪯ A ⪯ I}`.
    pub fn unconstrained(dim: usize, margin: f64) -> Self {
        Self {
            cuts: Vec::new(),
            margin,
            dim,
        }
    }

    /// Builds one cut per preference pair, indices referring to `pool`.
    pub fn from_preferences(
        x0: &FeatureVector,
        pool: &[FeatureVector],
        prefs: &PreferenceSet,
    ) -> Result<Self, CostError> {
        let cuts = prefs
            .pairs()
            .iter()
            .map(|&(i, j)| CutMatrix::new((i, j), &pool[i], &pool[j], x0))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(x0.dim(), prefs.margin(), cuts)
    }

    pub fn cuts(&self) -> &[CutMatrix] {
        &self.cuts
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn with_cut(&self, cut: CutMatrix) -> Self {
        let mut next = self.clone();
        next.cuts.push(cut);
        next
    }

    /// Largest violation of `0 ⪯ A ⪯ I` and the cuts; `≤ 0` means feasible.
    pub fn violation(&self, a: &CostMatrix) -> f64 {
        let eig = a.eigenvalues();
        let mut worst = (-eig.min()).max(eig.max() - 1.0);
        for cut in &self.cuts {
            worst = worst.max(inner(a.as_matrix(), cut.matrix()) - self.margin);
        }
        worst
    }

    pub fn contains(&self, a: &CostMatrix, tol: f64) -> bool {
        self.violation(a) <= tol
    }
}

/// Mahalanobis cost `(x - x0)ᵀ A (x - x0)`.
pub fn cost(a: &CostMatrix, x: &FeatureVector, x0: &FeatureVector) -> Result<f64, CostError> {
    x.check_dim(x0)?;
    if a.dim() != x.dim() {
        return Err(CostError::DimensionMismatch {
            expected: a.dim(),
            found: x.dim(),
        });
    }
    Ok(quad_form(a.as_matrix(), &(x.as_vector() - x0.as_vector())))
}

/// `M = xi xiᵀ − xj xjᵀ + (xj − xi) x0ᵀ + x0 (xj − xi)ᵀ`.
pub fn pair_matrix(
    xi: &FeatureVector,
    xj: &FeatureVector,
    x0: &FeatureVector,
) -> Result<DMatrix<f64>, CostError> {
    xi.check_dim(xj)?;
    xi.check_dim(x0)?;
    let (xi, xj, x0) = (xi.as_vector(), xj.as_vector(), x0.as_vector());
    let diff = xj - xi;
    let m = xi * xi.transpose() - xj * xj.transpose() + &diff * x0.transpose() + x0 * diff.transpose();
    // Exact symmetry; the two cross terms round differently otherwise.
    Ok((&m + m.transpose()) * 0.5)
}

/// `Σ_ij A_ij B_ij`.
pub fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, CostError> {
    if a.shape() != b.shape() {
        return Err(CostError::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(inner(a, b))
}

pub(crate) fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn quad_form(a: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    (u.transpose() * a * u)[(0, 0)]
}

/// Projection distance of `center` to the hyperplane `⟨A, M⟩ = 0`.
pub fn projection_distance(center: &CostMatrix, cut: &CutMatrix) -> f64 {
    inner(center.as_matrix(), cut.matrix()).abs() / cut.norm()
}

pub fn symmetrize(m: DMatrix<f64>) -> Result<DMatrix<f64>, CostError> {
    if m.nrows() != m.ncols() {
        return Err(CostError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CostError::NonFinite);
    }
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(CostError::NotSymmetric { asymmetry: asym });
    }
    Ok((&m + m.transpose()) * 0.5)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CostError> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(CostError::NotSquare {
            rows: n,
            cols: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Length of the scaled half-vectorization of a `dim × dim` symmetric matrix.
pub(crate) fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Upper-triangle, row-major indices `(r, c)` with `r ≤ c`.
pub(crate) fn svec_index(dim: usize) -> Vec<(usize, usize)> {
    (0..dim).flat_map(|r| (r..dim).map(move |c| (r, c))).collect()
}

/// Isometric vectorization: `svec(A)·svec(B) = ⟨A, B⟩`.
pub(crate) fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let dim = m.nrows();
    let idx = svec_index(dim);
    DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&(r, c)| {
            if r == c {
                m[(r, c)]
            } else {
                std::f64::consts::SQRT_2 * m[(r, c)]
            }
        }),
    )
}

pub(crate) fn smat(v: &[f64], dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    for (k, (r, c)) in svec_index(dim).into_iter().enumerate() {
        if r == c {
            m[(r, c)] = v[k];
        } else {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(r, c)] = x;
            m[(c, r)] = x;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    #[test]
    fn cost_examples() {
        let a = CostMatrix::identity(2);
        assert_eq!(cost(&a, &fv(&[1.0, 2.0]), &fv(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(cost(&a, &fv(&[3.0, 4.0]), &fv(&[0.0, 0.0])).unwrap(), 25.0);
        let half = CostMatrix::scaled_identity(2, 0.5);
        assert_abs_diff_eq!(cost(&half, &fv(&[1.0, 1.0]), &fv(&[0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn cost_rejects_dimension_mismatch() {
        let a = CostMatrix::identity(2);
        assert!(matches!(
            cost(&a, &fv(&[1.0, 2.0, 3.0]), &fv(&[0.0, 0.0])),
            Err(CostError::DimensionMismatch { .. })
        ));
        assert!(cost(&a, &fv(&[1.0, 2.0, 3.0]), &fv(&[0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn pair_matrix_examples() {
        let x0 = fv(&[0.0, 0.0]);
        let same = pair_matrix(&fv(&[0.3, 0.7]), &fv(&[0.3, 0.7]), &x0).unwrap();
        assert_eq!(same, DMatrix::zeros(2, 2));
        let m = pair_matrix(&fv(&[1.0, 0.0]), &fv(&[0.0, 1.0]), &x0).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
    }

    #[test]
    fn frobenius_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert_eq!(frobenius_inner(&i3, &i3).unwrap(), 3.0);
        assert_eq!(frobenius_inner(&i3, &DMatrix::zeros(3, 3)).unwrap(), 0.0);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let half = DMatrix::<f64>::identity(2, 2) * 0.5;
        assert_eq!(frobenius_inner(&m, &half).unwrap(), 0.0);
        assert!(frobenius_inner(&i3, &half).is_err());
    }

    #[test]
    fn constructor_symmetrizes_and_rejects() {
        let nearly = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2 + 1e-10, 1.0]);
        let a = CostMatrix::new(nearly).unwrap();
        assert_eq!(a.as_matrix()[(0, 1)], a.as_matrix()[(1, 0)]);

        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(matches!(CostMatrix::new(skew), Err(CostError::NotSymmetric { .. })));

        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.1]);
        assert!(matches!(CostMatrix::new(indefinite), Err(CostError::NotPsd { .. })));
    }

    #[test]
    fn svec_is_an_isometry() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        assert_abs_diff_eq!(svec(&a).dot(&svec(&b)), inner(&a, &b), epsilon = 1e-12);
        assert_abs_diff_eq!(smat(svec(&a).as_slice(), 3), a, epsilon = 1e-12);
    }

    #[test]
    fn json_is_row_major() {
        let a = CostMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, "[[1.0,0.5],[0.5,2.0]]");
        let back: CostMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<FeatureVector>("[1.0, NaN]").is_err());
    }

    #[test]
    fn spec_violation_detects_cuts() {
        let x0 = fv(&[0.0]);
        let cut = CutMatrix::new((1, 0), &fv(&[2.0]), &fv(&[1.0]), &x0).unwrap();
        assert_eq!(cut.matrix()[(0, 0)], 3.0);
        let spec = ConfidenceSetSpec::new(1, 0.01, vec![cut]).unwrap();
        assert!(spec.contains(&CostMatrix::zeros(1), 0.0));
        assert!(!spec.contains(&CostMatrix::identity(1), 1e-7));
    }
}
