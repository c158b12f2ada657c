//! Single-point recourse by projected gradient descent on
//!
//! ```text
//! J(x) = l(f(x), 1) + λ · max_{A ∈ U_P} (x − x₀)ᵀ A (x − x₀)
//! ```
//!
//! The inner maximum is differentiated by Danskin's theorem: with `A*` the
//! maximizer at `x`, its gradient is `2A*(x − x₀)`. Iterates are projected on
//! the box `[0, 1]^d`; one-hot blocks are relaxed to the simplex and rounded to
//! a vertex at the end. When no valid point turns up within `max_iters`, `λ`
//! is lowered by `lambda_decrement` and the descent restarts from `x₀`.
//!
//! Wachter-style recourse is the same loop with a fixed cost matrix, see
//! [`CostModel::Fixed`].

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{max_over_confidence, ConicError};
use crate::cost::{quad_form, ConfidenceSetSpec, CostError, CostMatrix, FeatureVector};
use crate::data::Classifier;

/// Objective changes below this end a λ level early when the inner maximizer
/// moved, i.e. the descent oscillates on a kink of the worst-case term.
pub const PLATEAU_TOL: f64 = 1e-10;
/// Steps shorter than this end a λ level.
pub const STATIONARY_STEP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(p − 0.5)²`
    Quadratic,
    /// `max(0, 0.5 − p)`
    Hinge,
    /// `−ln p`. Unlike the two above its gradient `−(1 − p)∇z` does not
    /// vanish where the classifier saturates.
    CrossEntropy,
}

impl std::str::FromStr for LossKind {
    type Err = GradError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadratic" => Ok(LossKind::Quadratic),
            "hinge" => Ok(LossKind::Hinge),
            "cross_entropy" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            other => Err(GradError::InvalidArgument(format!("unknown loss `{other}`"))),
        }
    }
}

/// Validity loss against the favorable target and its derivative in `p`.
pub fn loss(kind: LossKind, p: f64) -> (f64, f64) {
    match kind {
        LossKind::Quadratic => ((p - 0.5).powi(2), 2.0 * (p - 0.5)),
        LossKind::Hinge if p < 0.5 => (0.5 - p, -1.0),
        LossKind::Hinge => (0.0, 0.0),
        LossKind::CrossEntropy => {
            let p = p.max(f64::MIN_POSITIVE);
            (-p.ln(), -1.0 / p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradConfig {
    pub lambda: f64,
    pub lr: f64,
    /// Per λ level.
    pub max_iters: usize,
    pub loss: LossKind,
    pub lambda_decrement: f64,
    pub early_stop: bool,
    /// Feature indices held at their `x₀` value.
    #[serde(default)]
    pub frozen: Vec<usize>,
    /// One-hot blocks of the encoding.
    #[serde(default)]
    pub one_hot_blocks: Vec<Range<usize>>,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            lr: 0.01,
            max_iters: 1000,
            loss: LossKind::CrossEntropy,
            lambda_decrement: 0.05,
            early_stop: true,
            frozen: Vec::new(),
            one_hot_blocks: Vec::new(),
        }
    }
}

impl GradConfig {
    fn validate(&self, dim: usize) -> Result<(), GradError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(GradError::InvalidArgument(format!("λ must be ≥ 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(GradError::InvalidArgument(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !(self.lambda_decrement > 0.0) {
            return Err(GradError::InvalidArgument("λ decrement must be > 0".into()));
        }
        if self.frozen.iter().any(|&i| i >= dim) || self.one_hot_blocks.iter().any(|b| b.end > dim || b.is_empty()) {
            return Err(GradError::InvalidArgument("feature index out of range".into()));
        }
        Ok(())
    }
}

/// How the cost term is evaluated.
#[derive(Debug, Clone)]
pub enum CostModel {
    /// A known matrix, e.g. `½I` for the Wachter baseline.
    Fixed(CostMatrix),
    /// Worst case over a confidence set.
    WorstCase(ConfidenceSetSpec),
}

impl CostModel {
    fn dim(&self) -> usize {
        match self {
            CostModel::Fixed(a) => a.dim(),
            CostModel::WorstCase(spec) => spec.dim(),
        }
    }

    /// Cost of the move `u` and the matrix attaining it.
    pub fn evaluate(&self, u: &DVector<f64>) -> Result<(f64, DMatrix<f64>), GradError> {
        match self {
            CostModel::Fixed(a) => Ok((quad_form(a.as_matrix(), u), a.as_matrix().clone())),
            CostModel::WorstCase(spec) => {
                let r = max_over_confidence(&(u * u.transpose()), spec)?;
                Ok((r.value, r.argmax.into_matrix()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoursePlan {
    pub terminal: FeatureVector,
    pub valid: bool,
    /// Total descent steps over all λ levels.
    pub iterations_used: usize,
    pub worst_case_cost: f64,
    /// Filled in by the benchmark.
    #[serde(default)]
    pub truth_cost: Option<f64>,
    pub probability: f64,
    /// λ of the level that produced `terminal`.
    pub lambda: f64,
}

/// Value, gradient and inner maximizer of the relaxed objective at `x`.
#[derive(Debug, Clone)]
pub struct Objective {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub probability: f64,
    pub argmax: DMatrix<f64>,
}

pub fn objective(
    x: &DVector<f64>,
    x0: &DVector<f64>,
    clf: &dyn Classifier,
    model: &CostModel,
    lambda: f64,
    kind: LossKind,
) -> Result<Objective, GradError> {
    let (p, gp) = clf.prob_grad(x);
    let (l, dl) = loss(kind, p);
    let u = x - x0;
    let (c, a) = model.evaluate(&u)?;
    let gradient = gp * dl + (&a * &u) * (2.0 * lambda);
    Ok(Objective {
        value: l + lambda * c,
        gradient,
        probability: p,
        argmax: a,
    })
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn round_one_hot(v: &mut [f64]) {
    let best = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b]).then(b.cmp(&a))).unwrap_or(0);
    for (k, x) in v.iter_mut().enumerate() {
        *x = if k == best { 1.0 } else { 0.0 };
    }
}

struct Feasible<'a> {
    x0: &'a DVector<f64>,
    cfg: &'a GradConfig,
    in_block: Vec<bool>,
}

impl<'a> Feasible<'a> {
    fn new(x0: &'a DVector<f64>, cfg: &'a GradConfig) -> Self {
        let mut in_block = vec![false; x0.len()];
        for b in &cfg.one_hot_blocks {
            in_block[b.clone()].iter_mut().for_each(|f| *f = true);
        }
        Self { x0, cfg, in_block }
    }

    fn project(&self, x: &mut DVector<f64>) {
        for (i, v) in x.iter_mut().enumerate() {
            if !self.in_block[i] {
                *v = v.clamp(0.0, 1.0);
            }
        }
        for b in &self.cfg.one_hot_blocks {
            project_simplex(&mut x.as_mut_slice()[b.clone()]);
        }
        for &i in &self.cfg.frozen {
            x[i] = self.x0[i];
        }
    }

    fn round(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = x.clone();
        for b in &self.cfg.one_hot_blocks {
            round_one_hot(&mut r.as_mut_slice()[b.clone()]);
        }
        for &i in &self.cfg.frozen {
            r[i] = self.x0[i];
        }
        r
    }
}

/// Runs the descent. An already favorable `x₀` with `early_stop` is returned
/// unchanged.
pub fn generate(
    x0: &FeatureVector,
    clf: &dyn Classifier,
    model: &CostModel,
    cfg: &GradConfig,
) -> Result<RecoursePlan, GradError> {
    let d = x0.dim();
    if clf.input_dim() != d || model.dim() != d {
        return Err(CostError::DimensionMismatch {
            expected: d,
            found: if clf.input_dim() != d { clf.input_dim() } else { model.dim() },
        }
        .into());
    }
    cfg.validate(d)?;
    let x0v = x0.as_vector();
    let feasible = Feasible::new(x0v, cfg);
    let finish = |x: DVector<f64>, iterations: usize, lambda: f64| -> Result<RecoursePlan, GradError> {
        let (worst, _) = model.evaluate(&(&x - x0v))?;
        let p = clf.prob(&x);
        Ok(RecoursePlan {
            terminal: FeatureVector::new(x)?,
            valid: p >= 0.5,
            iterations_used: iterations,
            worst_case_cost: worst,
            truth_cost: None,
            probability: p,
            lambda,
        })
    };
    if cfg.early_stop && clf.predict(x0v) {
        return finish(x0v.clone(), 0, cfg.lambda);
    }

    let mut total = 0;
    let mut lambda = cfg.lambda;
    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    loop {
        let mut x = x0v.clone();
        let mut previous: Option<(f64, DMatrix<f64>)> = None;
        for _ in 0..cfg.max_iters {
            if cfg.early_stop && clf.predict(&x) {
                let rounded = feasible.round(&x);
                if clf.predict(&rounded) {
                    break;
                }
            }
            let obj = objective(&x, x0v, clf, model, lambda, cfg.loss)?;
            if let Some((value, argmax)) = &previous {
                if (value - obj.value).abs() < PLATEAU_TOL && (argmax - &obj.argmax).amax() > 1e-9 {
                    break;
                }
            }
            let mut next = &x - &obj.gradient * cfg.lr;
            feasible.project(&mut next);
            total += 1;
            let step = (&next - &x).norm();
            x = next;
            if step < STATIONARY_STEP {
                break;
            }
            previous = Some((obj.value, obj.argmax));
        }
        let rounded = feasible.round(&x);
        let p = clf.prob(&rounded);
        if p >= 0.5 {
            return finish(rounded, total, lambda);
        }
        if best.as_ref().is_none_or(|(bp, _, _)| p > *bp) {
            best = Some((p, rounded, lambda));
        }
        if lambda <= 0.0 {
            break;
        }
        lambda = (lambda - cfg.lambda_decrement).max(0.0);
        if lambda < 1e-12 {
            lambda = 0.0;
        }
    }
    let (_, x, lambda) = best.expect("at least one level ran");
    finish(x, total, lambda)
}
