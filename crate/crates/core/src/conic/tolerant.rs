use std::collections::BTreeSet;

use serde::Serialize;

use super::chebyshev::{solve_center, BallCut, RawCenter};
use super::{identity_center, nuclear_norm, ConicError, RADIUS_FLOOR};
use crate::cost::{ConfidenceSetSpec, CostMatrix};

/// Exact enumeration is used up to this many preferences; greedy beyond.
pub const ENUMERATION_LIMIT: usize = 15;

#[derive(Debug, Clone, Serialize)]
pub struct TolerantCenterResult {
    pub center: CostMatrix,
    pub radius: f64,
    /// Indices into `ConfidenceSetSpec::cuts` whose indicator is set.
    pub violated: BTreeSet<usize>,
}

/// A big-M value that makes every relaxed cut redundant.
///
/// A relaxed cut reads `⟨A, M⟩ + r‖M‖ ≤ ε + bigM`. Over the box
/// `⟨A, M⟩ ≤ ‖M‖_*`, and any retained nonzero cut bounds `r` by
/// `(ε + ‖M‖_*) / ‖M‖`, so ten times the sum of those terms never binds.
pub fn default_big_m(spec: &ConfidenceSetSpec) -> f64 {
    let eps = spec.margin();
    let mut max_nuclear = 0.0f64;
    let mut max_norm = 0.0f64;
    let mut r_max = 0.5f64;
    for cut in spec.cuts().iter().filter(|c| !c.is_zero()) {
        let nuc = nuclear_norm(cut.matrix());
        max_nuclear = max_nuclear.max(nuc);
        max_norm = max_norm.max(cut.norm());
        r_max = r_max.max((eps + nuc) / cut.norm());
    }
    10.0 * (eps + max_nuclear + r_max * max_norm)
}

/// Chebyshev center of the set where up to `⌊α·|P|⌋` cuts may be violated.
///
/// Patterns are ranked by number of violated cuts first and radius second, so
/// a consistent spec yields no violations and the plain Chebyshev center.
/// Up to [`ENUMERATION_LIMIT`] cuts every pattern is enumerated; above it, the
/// cut whose removal most increases the radius is dropped until the set has
/// an interior (ties go to the lowest index).
pub fn tolerant_center(
    spec: &ConfidenceSetSpec,
    alpha: f64,
    big_m: Option<f64>,
) -> Result<TolerantCenterResult, ConicError> {
    if spec.cuts().is_empty() {
        return Err(ConicError::InvalidArgument("at least one preference is required".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(ConicError::InvalidArgument(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let big_m = big_m.unwrap_or_else(|| default_big_m(spec));
    let total = spec.cuts().len();
    let budget = (alpha * total as f64 + 1e-9).floor() as usize;

    if total <= ENUMERATION_LIMIT {
        for size in 0..=budget {
            let mut best: Option<(RawCenter, Vec<usize>)> = None;
            for pattern in Combinations::new(total, size) {
                let raw = solve_pattern(spec, &pattern, big_m)?;
                if raw.radius > RADIUS_FLOOR && best.as_ref().is_none_or(|(b, _)| raw.radius > b.radius) {
                    best = Some((raw, pattern));
                }
            }
            if let Some((raw, pattern)) = best {
                return Ok(result(raw, pattern));
            }
        }
        return Err(ConicError::InfeasibleWithBudget { budget });
    }

    let mut dropped: Vec<usize> = Vec::new();
    let mut current = solve_pattern(spec, &dropped, big_m)?;
    while current.radius <= RADIUS_FLOOR {
        if dropped.len() >= budget {
            return Err(ConicError::InfeasibleWithBudget { budget });
        }
        let mut best: Option<(RawCenter, usize)> = None;
        for k in (0..total).filter(|k| !dropped.contains(k)) {
            let mut trial = dropped.clone();
            trial.push(k);
            let raw = solve_pattern(spec, &trial, big_m)?;
            if best.as_ref().is_none_or(|(b, _)| raw.radius > b.radius) {
                best = Some((raw, k));
            }
        }
        let (raw, k) = best.expect("budget below total leaves a candidate");
        dropped.push(k);
        current = raw;
    }
    Ok(result(current, dropped))
}

fn result(raw: RawCenter, pattern: Vec<usize>) -> TolerantCenterResult {
    TolerantCenterResult {
        center: raw.center,
        radius: raw.radius.max(0.0),
        violated: pattern.into_iter().collect(),
    }
}

fn solve_pattern(spec: &ConfidenceSetSpec, dropped: &[usize], big_m: f64) -> Result<RawCenter, ConicError> {
    let cuts: Vec<BallCut<'_>> = spec
        .cuts()
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(k, c)| BallCut {
            matrix: c.matrix(),
            norm: c.norm(),
            rhs: spec.margin() + if dropped.contains(&k) { big_m } else { 0.0 },
        })
        .collect();
    if cuts.is_empty() {
        return Ok(RawCenter {
            center: identity_center(spec.dim()),
            radius: 0.5,
            multipliers: Vec::new(),
        });
    }
    solve_center(spec.dim(), &cuts)
}

/// Size-`k` subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}
