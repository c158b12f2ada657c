use statrs::distribution::{ContinuousCDF, Normal};

use super::BenchError;
use crate::cost::{cost, CostMatrix, FeatureVector};

/// Below this many nonzero pairs the signed-rank test is refused.
pub const WILCOXON_MIN_PAIRS: usize = 5;
/// Exact null distribution up to this many nonzero pairs.
pub const WILCOXON_EXACT_LIMIT: usize = 20;

/// 1-based ranks of `values`, ties broken by index.
fn ranks_by(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

/// Normalized mean rank of the `k` candidates cheapest under `center`,
/// ranked by `truth`: `(Σ ranks − r_min) / r_max` with
/// `r_min = k(k+1)/2` and `r_max = (2N − k + 1)k/2`. Zero is perfect retrieval.
pub fn mean_rank(
    center: &CostMatrix,
    truth: &CostMatrix,
    pool: &[FeatureVector],
    x0: &FeatureVector,
    k: usize,
) -> Result<f64, BenchError> {
    let n = pool.len();
    if k == 0 || k > n {
        return Err(BenchError::InvalidArgument(format!("mean rank needs 1 ≤ K ≤ N = {n}, got K = {k}")));
    }
    let true_costs = pool.iter().map(|x| cost(truth, x, x0)).collect::<Result<Vec<_>, _>>()?;
    let est_costs = pool.iter().map(|x| cost(center, x, x0)).collect::<Result<Vec<_>, _>>()?;
    let true_rank = ranks_by(&true_costs);
    let est_rank = ranks_by(&est_costs);
    let total: usize = (0..n).filter(|&i| est_rank[i] <= k).map(|i| true_rank[i]).sum();
    let r_min = (k * (k + 1)) as f64 / 2.0;
    let r_max = ((2 * n - k + 1) * k) as f64 / 2.0;
    Ok((total as f64 - r_min) / r_max)
}

/// One-sided Wilcoxon signed-rank p-value for "the first sample is smaller",
/// given paired differences `first − second`. Zeros are dropped and tied
/// magnitudes get average ranks.
pub fn wilcoxon_one_sided(differences: &[f64]) -> Result<f64, BenchError> {
    let nonzero: Vec<f64> = differences.iter().copied().filter(|d| *d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(BenchError::AllZeroDifferences);
    }
    let n = nonzero.len();
    if n < WILCOXON_MIN_PAIRS {
        return Err(BenchError::TooFewPairs(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| nonzero[a].abs().total_cmp(&nonzero[b].abs()));
    // ranks doubled so tie averages stay integral
    let mut rank2 = vec![0usize; n];
    let mut tie_term = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && nonzero[order[end]].abs() == nonzero[order[start]].abs() {
            end += 1;
        }
        let doubled = start + 1 + end;
        for &i in &order[start..end] {
            rank2[i] = doubled;
        }
        let t = (end - start) as f64;
        tie_term += t * t * t - t;
        start = end;
    }
    let w2: usize = (0..n).filter(|&i| nonzero[i] > 0.0).map(|i| rank2[i]).sum();

    if n <= WILCOXON_EXACT_LIMIT {
        let max: usize = rank2.iter().sum();
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        for &r in &rank2 {
            for s in (r..=max).rev() {
                counts[s] += counts[s - r];
            }
        }
        let below: f64 = counts[..=w2].iter().sum();
        return Ok(below / 2f64.powi(n as i32));
    }
    let nf = n as f64;
    let w = w2 as f64 / 2.0;
    let mean = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    let z = (w - mean + 0.5) / var.sqrt();
    Ok(Normal::standard().cdf(z))
}
