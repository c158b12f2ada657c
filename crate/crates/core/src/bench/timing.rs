use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runner::derive_seed;
use super::BenchError;
use crate::cost::{CostMatrix, FeatureVector};
use crate::elicit::{next_question_exhaustive, next_question_similar_cost, AskedPairs, PoolGeometry};

/// Exhaustive against similar-cost selection of one pairwise question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub exhaustive_ms: f64,
    pub heuristic_ms: f64,
    /// Smallest projection distance over all pairs.
    pub exhaustive_objective: f64,
    pub heuristic_objective: f64,
    /// `|obj_h − obj_e| / obj_e`.
    pub relative_gap: f64,
}

/// For each `n`, draws `n` uniform 2-d candidates and a uniform subject and
/// times both selection rules at `center` (`½I` when `None`).
pub fn selection_timing(sizes: &[usize], center: Option<&CostMatrix>, seed: u64) -> Result<Vec<TimingRow>, BenchError> {
    let half = CostMatrix::scaled_identity(2, 0.5);
    let center = center.unwrap_or(&half);
    if center.dim() != 2 {
        return Err(BenchError::InvalidArgument("the timing experiment is two-dimensional".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n < 2 {
            return Err(BenchError::InvalidArgument(format!("pool size {n} < 2")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[n as u64]));
        let mut point = || FeatureVector::from_slice(&[rng.random::<f64>(), rng.random::<f64>()]).expect("finite");
        let x0 = point();
        let pool: Vec<FeatureVector> = (0..n).map(|_| point()).collect();
        let geometry = PoolGeometry::new(&x0, &pool);
        let asked = AskedPairs::default();

        let start = Instant::now();
        let exhaustive = next_question_exhaustive(&geometry, center, &asked)?;
        let exhaustive_ms = start.elapsed().as_secs_f64() * 1e3;
        let start = Instant::now();
        let heuristic = next_question_similar_cost(&geometry, center, &asked, 2, None)?;
        let heuristic_ms = start.elapsed().as_secs_f64() * 1e3;

        let (e, h) = (exhaustive.projection_distance, heuristic.projection_distance);
        let relative_gap = if e == 0.0 {
            if h == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            (h - e).abs() / e
        };
        rows.push(TimingRow {
            n,
            exhaustive_ms,
            heuristic_ms,
            exhaustive_objective: e,
            heuristic_objective: h,
            relative_gap,
        });
    }
    Ok(rows)
}

pub fn write_timing_csv<W: Write>(rows: &[TimingRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
