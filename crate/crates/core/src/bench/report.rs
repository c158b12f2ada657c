use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::wilcoxon_one_sided;
use super::runner::TrialRow;
use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; absent for a single sample.
    pub std: Option<f64>,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = (n >= 2).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
        Some(Self { mean, std, n })
    }
}

/// Aggregates of one dataset × strategy × method × T cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub dataset: String,
    pub strategy: String,
    pub method: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub trials: usize,
    pub failures: usize,
    pub validity: Option<Summary>,
    pub cost: Option<Summary>,
    pub path_cost: Option<Summary>,
    pub mean_rank: Option<Summary>,
    pub time_ms: Option<Summary>,
}

/// Paired one-sided test that `method` has the smaller `metric` than `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dataset: String,
    pub strategy: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: String,
    pub method: String,
    pub baseline: String,
    pub pairs: usize,
    /// Mean of `method − baseline`.
    pub mean_difference: Option<f64>,
    pub p_value: Option<f64>,
    /// Why no p-value was computed.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// K of the normalized mean rank.
    pub mean_rank_k: usize,
    pub cells: Vec<ReportCell>,
    pub comparisons: Vec<Comparison>,
}

const COMPARISONS: [(&str, &str, &str); 3] = [
    ("grad", "wachter", "cost"),
    ("graph", "face", "path_cost"),
    ("graph-worst-case", "face", "path_cost"),
];

type CellKey = (String, String, String, usize);

fn metric(row: &TrialRow, name: &str) -> Option<f64> {
    match name {
        "validity" => row.validity,
        "cost" => row.cost,
        "path_cost" => row.path_cost,
        "mean_rank" => row.mean_rank,
        "time_ms" => row.time_ms,
        _ => None,
    }
}

impl Report {
    pub fn from_rows(rows: &[TrialRow], mean_rank_k: usize) -> Self {
        let mut groups: BTreeMap<CellKey, Vec<&TrialRow>> = BTreeMap::new();
        for r in rows {
            groups
                .entry((r.dataset.clone(), r.strategy.clone(), r.method.clone(), r.t))
                .or_default()
                .push(r);
        }
        let summarize = |rows: &[&TrialRow], name: &str| {
            let values: Vec<f64> = rows.iter().filter_map(|r| metric(r, name)).collect();
            Summary::of(&values)
        };
        let cells = groups
            .iter()
            .map(|((dataset, strategy, method, t), rs)| ReportCell {
                dataset: dataset.clone(),
                strategy: strategy.clone(),
                method: method.clone(),
                t: *t,
                trials: rs.len(),
                failures: rs.iter().filter(|r| r.error.is_some()).count(),
                validity: summarize(rs, "validity"),
                cost: summarize(rs, "cost"),
                path_cost: summarize(rs, "path_cost"),
                mean_rank: summarize(rs, "mean_rank"),
                time_ms: summarize(rs, "time_ms"),
            })
            .collect();

        let mut comparisons = Vec::new();
        let contexts: BTreeSet<(String, String, usize)> =
            groups.keys().map(|(d, s, _, t)| (d.clone(), s.clone(), *t)).collect();
        for (dataset, strategy, t) in contexts {
            for (method, baseline, name) in COMPARISONS {
                let key = |m: &str| (dataset.clone(), strategy.clone(), m.to_string(), t);
                let (Some(a), Some(b)) = (groups.get(&key(method)), groups.get(&key(baseline))) else {
                    continue;
                };
                let base: BTreeMap<(usize, usize), f64> = b
                    .iter()
                    .filter_map(|r| metric(r, name).map(|v| ((r.truth_id, r.subject_id), v)))
                    .collect();
                let diffs: Vec<f64> = a
                    .iter()
                    .filter_map(|r| {
                        let v = metric(r, name)?;
                        base.get(&(r.truth_id, r.subject_id)).map(|w| v - w)
                    })
                    .collect();
                let (p_value, note) = match wilcoxon_one_sided(&diffs) {
                    Ok(p) => (Some(p), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                comparisons.push(Comparison {
                    dataset: dataset.clone(),
                    strategy: strategy.clone(),
                    t,
                    metric: name.to_string(),
                    method: method.to_string(),
                    baseline: baseline.to_string(),
                    pairs: diffs.len(),
                    mean_difference: Summary::of(&diffs).map(|s| s.mean),
                    p_value,
                    note,
                });
            }
        }
        Self {
            mean_rank_k,
            cells,
            comparisons,
        }
    }

    pub fn cell(&self, dataset: &str, strategy: &str, method: &str, t: usize) -> Option<&ReportCell> {
        self.cells
            .iter()
            .find(|c| c.dataset == dataset && c.strategy == strategy && c.method == method && c.t == t)
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per cell with mean and std columns per metric.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["dataset", "strategy", "method", "T", "trials", "failures", "mean_rank_k"];
        let metrics = ["validity", "cost", "path_cost", "mean_rank", "time_ms"];
        let names: Vec<String> = metrics
            .iter()
            .flat_map(|m| [format!("{m}_mean"), format!("{m}_std"), format!("{m}_n")])
            .collect();
        header.extend(names.iter().map(String::as_str));
        out.write_record(&header)?;
        for c in &self.cells {
            let mut rec = vec![
                c.dataset.clone(),
                c.strategy.clone(),
                c.method.clone(),
                c.t.to_string(),
                c.trials.to_string(),
                c.failures.to_string(),
                self.mean_rank_k.to_string(),
            ];
            for s in [&c.validity, &c.cost, &c.path_cost, &c.mean_rank, &c.time_ms] {
                match s {
                    Some(s) => rec.extend([
                        s.mean.to_string(),
                        s.std.map(|v| v.to_string()).unwrap_or_default(),
                        s.n.to_string(),
                    ]),
                    None => rec.extend([String::new(), String::new(), "0".into()]),
                }
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Long format `dataset,strategy,method,T,metric,mean,std,n` for plotting.
    pub fn write_plot_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["dataset", "strategy", "method", "T", "metric", "mean", "std", "n"])?;
        for c in &self.cells {
            let named = [
                ("validity", &c.validity),
                ("cost", &c.cost),
                ("path_cost", &c.path_cost),
                ("mean_rank", &c.mean_rank),
                ("time_ms", &c.time_ms),
            ];
            for (name, s) in named {
                if let Some(s) = s {
                    out.write_record([
                        c.dataset.clone(),
                        c.strategy.clone(),
                        c.method.clone(),
                        c.t.to_string(),
                        name.to_string(),
                        s.mean.to_string(),
                        s.std.map(|v| v.to_string()).unwrap_or_default(),
                        s.n.to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_comparisons_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        for c in &self.comparisons {
            out.serialize(c)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Raw per-trial CSV.
pub fn write_raw_csv<W: Write>(rows: &[TrialRow], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
