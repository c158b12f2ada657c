//! Question selection.
//!
//! A question over options `i, j` is worth asking when the hyperplane
//! `⟨A, M_ij⟩ = 0` passes close to the incumbent center: whatever the answer,
//! it cuts deep. With `uᵢ = xᵢ − x₀`,
//!
//! ```text
//! ⟨A, M_ij⟩  = uᵢᵀAuᵢ − uⱼᵀAuⱼ
//! ‖M_ij‖²_F = ‖uᵢ‖⁴ + ‖uⱼ‖⁴ − 2(uᵢ·uⱼ)²
//! ```
//!
//! so every pair is scored in `O(d)` once the per-candidate costs are known.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ElicitError;
use crate::cost::{quad_form, CostMatrix, FeatureVector};

/// Cut norms below this are treated as a duplicate-candidate zero cut.
const ZERO_CUT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    /// Scan every unasked pair.
    Exhaustive,
    /// Windows of `k` candidates adjacent in center-cost order. With
    /// `gap_threshold`, adjacent candidates whose center costs differ by no
    /// more than it are never put side by side.
    SimilarCost {
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gap_threshold: Option<f64>,
    },
    /// Uniformly random `k` options (baseline).
    Random { k: usize },
}

impl Strategy {
    pub fn options(&self) -> usize {
        match self {
            Strategy::Exhaustive => 2,
            Strategy::SimilarCost { k, .. } | Strategy::Random { k } => *k,
        }
    }

    /// Parses `exhaustive`, `similar2`, `similarK` (with `k`), `similar<k>` and `random`.
    pub fn from_name(name: &str, k: usize) -> Result<Self, ElicitError> {
        let lower = name.to_ascii_lowercase();
        match lower.as_str() {
            "exhaustive" => Ok(Strategy::Exhaustive),
            "similar2" | "similar" => Ok(Strategy::SimilarCost { k: 2, gap_threshold: None }),
            "similark" => Ok(Strategy::SimilarCost { k, gap_threshold: None }),
            "random" => Ok(Strategy::Random { k }),
            other => other
                .strip_prefix("similar")
                .and_then(|n| n.parse::<usize>().ok())
                .map(|k| Strategy::SimilarCost { k, gap_threshold: None })
                .ok_or_else(|| ElicitError::InvalidArgument(format!("unknown strategy `{name}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub option_indices: Vec<usize>,
    /// Mean projection distance of the center to the hyperplanes of options
    /// adjacent in center-cost order.
    pub projection_distance: f64,
}

/// Unordered pairs already put to the subject.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AskedPairs(BTreeSet<(usize, usize)>);

impl AskedPairs {
    fn key(i: usize, j: usize) -> (usize, usize) {
        (i.min(j), i.max(j))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.0.contains(&Self::key(i, j))
    }

    /// Marks every pair among `options`.
    pub fn mark(&mut self, options: &[usize]) {
        for (a, &i) in options.iter().enumerate() {
            for &j in &options[a + 1..] {
                self.0.insert(Self::key(i, j));
            }
        }
    }

    pub fn any_among(&self, options: &[usize]) -> bool {
        options
            .iter()
            .enumerate()
            .any(|(a, &i)| options[a + 1..].iter().any(|&j| self.contains(i, j)))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Displacements `xᵢ − x₀` and their squared norms, fixed for a session.
#[derive(Debug, Clone)]
pub struct PoolGeometry {
    disp: Vec<DVector<f64>>,
    sq_norms: Vec<f64>,
}

impl PoolGeometry {
    pub fn new(x0: &FeatureVector, pool: &[FeatureVector]) -> Self {
        let disp: Vec<DVector<f64>> = pool.iter().map(|x| x.as_vector() - x0.as_vector()).collect();
        let sq_norms = disp.iter().map(|u| u.norm_squared()).collect();
        Self { disp, sq_norms }
    }

    pub fn len(&self) -> usize {
        self.disp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disp.is_empty()
    }

    /// Cost of every candidate under `a`.
    pub fn costs(&self, a: &CostMatrix) -> Vec<f64> {
        self.disp.iter().map(|u| quad_form(a.as_matrix(), u)).collect()
    }

    pub fn cut_norm(&self, i: usize, j: usize) -> f64 {
        let dot = self.disp[i].dot(&self.disp[j]);
        let (a, b) = (self.sq_norms[i], self.sq_norms[j]);
        (a * a + b * b - 2.0 * dot * dot).max(0.0).sqrt()
    }

    /// `|⟨A, M_ij⟩| / ‖M_ij‖`, or `None` for a zero cut.
    pub fn distance(&self, costs: &[f64], i: usize, j: usize) -> Option<f64> {
        let norm = self.cut_norm(i, j);
        (norm > ZERO_CUT).then(|| (costs[i] - costs[j]).abs() / norm)
    }

    /// Mean distance over options adjacent in cost order.
    pub fn mean_adjacent_distance(&self, costs: &[f64], options: &[usize]) -> Option<f64> {
        let mut sorted = options.to_vec();
        sorted.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
        let mut total = 0.0;
        for w in sorted.windows(2) {
            total += self.distance(costs, w[0], w[1])?;
        }
        Some(total / (sorted.len() - 1) as f64)
    }
}

/// The unasked pair closest to the center, lexicographic on ties.
pub fn next_question_exhaustive(
    geometry: &PoolGeometry,
    center: &CostMatrix,
    asked: &AskedPairs,
) -> Result<Question, ElicitError> {
    let costs = geometry.costs(center);
    let n = geometry.len();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        for j in i + 1..n {
            if asked.contains(i, j) {
                continue;
            }
            let Some(dist) = geometry.distance(&costs, i, j) else {
                continue;
            };
            if best.is_none_or(|(b, _, _)| dist < b) {
                best = Some((dist, i, j));
            }
        }
    }
    let (dist, i, j) = best.ok_or(ElicitError::PoolExhausted)?;
    Ok(Question {
        option_indices: vec![i, j],
        projection_distance: dist,
    })
}

/// Candidate indices sorted by center cost, ties by index.
pub fn cost_order(costs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..costs.len()).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    order
}

/// Best window of `k` cost-adjacent candidates. Options are returned in
/// cost order. A window is skipped when any pair among its options was
/// already asked, when an adjacent pair is a zero cut, or when an adjacent
/// cost gap does not exceed `gap_threshold`.
pub fn next_question_similar_cost(
    geometry: &PoolGeometry,
    center: &CostMatrix,
    asked: &AskedPairs,
    k: usize,
    gap_threshold: Option<f64>,
) -> Result<Question, ElicitError> {
    if k < 2 {
        return Err(ElicitError::InvalidArgument("questions need at least two options".into()));
    }
    if geometry.len() < k {
        return Err(ElicitError::InvalidArgument(format!(
            "pool of {} candidates cannot fill {k} options",
            geometry.len()
        )));
    }
    let costs = geometry.costs(center);
    let order = cost_order(&costs);
    let mut best: Option<(f64, usize)> = None;
    'windows: for start in 0..=order.len() - k {
        let window = &order[start..start + k];
        let mut total = 0.0;
        for w in window.windows(2) {
            if let Some(gamma) = gap_threshold {
                if costs[w[1]] - costs[w[0]] <= gamma {
                    continue 'windows;
                }
            }
            match geometry.distance(&costs, w[0], w[1]) {
                Some(d) => total += d,
                None => continue 'windows,
            }
        }
        if asked.any_among(window) {
            continue;
        }
        let mean = total / (k - 1) as f64;
        if best.is_none_or(|(b, _)| mean < b) {
            best = Some((mean, start));
        }
    }
    let (mean, start) = best.ok_or(ElicitError::NoAdmissibleWindow)?;
    Ok(Question {
        option_indices: order[start..start + k].to_vec(),
        projection_distance: mean,
    })
}

/// `k` distinct options drawn uniformly, none of whose pairs were asked.
pub fn next_question_random<R: Rng>(
    geometry: &PoolGeometry,
    center: &CostMatrix,
    asked: &AskedPairs,
    k: usize,
    rng: &mut R,
) -> Result<Question, ElicitError> {
    let n = geometry.len();
    if k < 2 || n < k {
        return Err(ElicitError::InvalidArgument(format!("cannot draw {k} options from {n}")));
    }
    let costs = geometry.costs(center);
    for _ in 0..10_000 {
        let options = sample(rng, n, k).into_vec();
        if asked.any_among(&options) {
            continue;
        }
        if let Some(dist) = geometry.mean_adjacent_distance(&costs, &options) {
            return Ok(Question {
                option_indices: options,
                projection_distance: dist,
            });
        }
    }
    Err(ElicitError::PoolExhausted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::from_slice(v).unwrap()
    }

    #[test]
    fn strategy_names() {
        assert_eq!(Strategy::from_name("exhaustive", 3).unwrap(), Strategy::Exhaustive);
        assert_eq!(Strategy::from_name("similarK", 3).unwrap().options(), 3);
        assert_eq!(Strategy::from_name("similar4", 0).unwrap().options(), 4);
        assert!(Strategy::from_name("bogus", 2).is_err());
    }

    #[test]
    fn asked_pairs_are_unordered() {
        let mut asked = AskedPairs::default();
        asked.mark(&[3, 1, 2]);
        assert_eq!(asked.len(), 3);
        assert!(asked.contains(1, 3));
        assert!(asked.contains(2, 1));
        assert!(!asked.any_among(&[0, 4]));
    }

    #[test]
    fn two_candidates_force_the_pair() {
        let x0 = fv(&[0.0, 0.0]);
        let pool = [fv(&[1.0, 0.0]), fv(&[0.3, 0.9])];
        let g = PoolGeometry::new(&x0, &pool);
        let q = next_question_exhaustive(&g, &CostMatrix::scaled_identity(2, 0.5), &AskedPairs::default()).unwrap();
        assert_eq!(q.option_indices, vec![0, 1]);
    }

    #[test]
    fn duplicate_candidates_are_skipped() {
        let x0 = fv(&[0.0, 0.0]);
        let pool = [fv(&[0.5, 0.5]), fv(&[0.5, 0.5]), fv(&[0.1, 0.9])];
        let g = PoolGeometry::new(&x0, &pool);
        let q = next_question_exhaustive(&g, &CostMatrix::scaled_identity(2, 0.5), &AskedPairs::default()).unwrap();
        assert_ne!(q.option_indices, vec![0, 1]);
    }

    #[test]
    fn exhausted_pool_errors() {
        let x0 = fv(&[0.0]);
        let pool = [fv(&[1.0]), fv(&[2.0])];
        let g = PoolGeometry::new(&x0, &pool);
        let mut asked = AskedPairs::default();
        asked.mark(&[0, 1]);
        assert!(matches!(
            next_question_exhaustive(&g, &CostMatrix::identity(1), &asked),
            Err(ElicitError::PoolExhausted)
        ));
    }

    #[test]
    fn full_window_when_k_equals_n() {
        let x0 = fv(&[0.0, 0.0]);
        let pool = [fv(&[1.0, 0.0]), fv(&[0.0, 0.8]), fv(&[0.6, 0.6])];
        let g = PoolGeometry::new(&x0, &pool);
        let q = next_question_similar_cost(&g, &CostMatrix::identity(2), &AskedPairs::default(), 3, None).unwrap();
        let mut opts = q.option_indices.clone();
        opts.sort_unstable();
        assert_eq!(opts, vec![0, 1, 2]);
    }
}
