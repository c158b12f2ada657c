use std::path::PathBuf;
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::mean_rank;
use super::report::Report;
use super::BenchError;
use crate::cost::{cost, quad_form, ConfidenceSetSpec, CostMatrix, FeatureVector};
use crate::data::{gen_synthetic, load_csv, Classifier, Dataset, DatasetSchema, Mlp, TrainConfig};
use crate::elicit::{gen_truth_random, run_session, SessionConfig, SimulatedResponder, Strategy};
use crate::grad::{self, CostModel, GradConfig};
use crate::graph::{self, RecourseGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetRef {
    Synthetic { n: usize },
    Csv { path: PathBuf, schema: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Mean rank only.
    Rank,
    /// Worst-case gradient descent over the confidence set.
    Grad,
    /// Gradient descent with `½I`.
    Wachter,
    /// Shortest path with center weights.
    Graph,
    /// Shortest path with `½I` weights.
    Face,
    /// Shortest path with worst-case edge weights.
    GraphWorstCase,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Rank => "rank",
            Method::Grad => "grad",
            Method::Wachter => "wachter",
            Method::Graph => "graph",
            Method::Face => "face",
            Method::GraphWorstCase => "graph-worst-case",
        }
    }

    pub fn parse(s: &str) -> Result<Self, BenchError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| BenchError::InvalidArgument(format!("unknown method `{s}`")))
    }

    fn is_baseline(self) -> bool {
        matches!(self, Method::Wachter | Method::Face)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    pub t_values: Vec<usize>,
    pub num_truth_matrices: usize,
    pub num_subjects: usize,
    /// Names accepted by [`Strategy::from_name`].
    pub strategies: Vec<String>,
    /// Options per question for `similarK` and `random`.
    pub k: usize,
    pub margin: f64,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Top-K of the mean rank.
    pub mean_rank_k: usize,
    /// Cap on the candidate pool.
    pub pool_cap: usize,
    pub graph_k: usize,
    /// Cap on data nodes of the recourse graph.
    pub graph_nodes: usize,
    pub indiff_band: f64,
    pub flip_prob: f64,
    pub tolerance: Option<f64>,
    pub grad: GradConfig,
    pub train: TrainConfig,
    /// Fill `time_ms`; off by default so raw output is reproducible byte for byte.
    pub record_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetRef::Synthetic { n: 2000 },
            t_values: vec![0, 5],
            num_truth_matrices: 10,
            num_subjects: 20,
            strategies: vec!["similar2".into()],
            k: 3,
            margin: crate::DEFAULT_MARGIN,
            seed: 0,
            methods: vec![Method::Rank],
            mean_rank_k: 10,
            pool_cap: 200,
            graph_k: graph::DEFAULT_K,
            graph_nodes: 300,
            indiff_band: 0.0,
            flip_prob: 0.0,
            tolerance: None,
            grad: GradConfig::default(),
            train: TrainConfig::default(),
            record_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.num_truth_matrices == 0 || self.num_subjects == 0 {
            return Err(BenchError::InvalidArgument("need at least one truth matrix and one subject".into()));
        }
        if self.t_values.is_empty() || self.strategies.is_empty() {
            return Err(BenchError::InvalidArgument("t_values and strategies must be nonempty".into()));
        }
        for s in &self.strategies {
            Strategy::from_name(s, self.k)?;
        }
        Ok(())
    }
}

/// One row of the raw trial CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub dataset: String,
    pub method: String,
    pub strategy: String,
    #[serde(rename = "T")]
    pub t: usize,
    pub truth_id: usize,
    pub subject_id: usize,
    pub seed: u64,
    pub validity: Option<f64>,
    pub cost: Option<f64>,
    pub path_cost: Option<f64>,
    pub mean_rank: Option<f64>,
    pub time_ms: Option<f64>,
    pub error: Option<String>,
}

/// A dataset with its trained classifier, candidate pool, subjects and graph nodes.
pub struct Prepared {
    pub data: Dataset,
    pub classifier: Box<dyn Classifier>,
    /// Favorable training rows, capped.
    pub pool: Vec<FeatureVector>,
    /// Unfavorable test rows, in seeded order.
    pub subjects: Vec<FeatureVector>,
    /// Training rows for the recourse graph with their predicted class.
    pub graph_points: Vec<(FeatureVector, bool)>,
}

/// SplitMix64 finalizer over `seed` and `parts`.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

const STREAM_DATA: u64 = 1;
const STREAM_POOL: u64 = 2;
const STREAM_SUBJECTS: u64 = 3;
const STREAM_GRAPH: u64 = 4;
const STREAM_TRUTH: u64 = 5;
const STREAM_TRIAL: u64 = 6;

fn seeded_subset(indices: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    if indices.len() <= cap {
        return indices.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = sample(&mut rng, indices.len(), cap).into_iter().map(|i| indices[i]).collect();
    picked.sort_unstable();
    picked
}

/// Loads or generates the dataset, trains the classifier and splits rows
/// into pool, subjects and graph nodes by predicted class.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, BenchError> {
    let data = match &cfg.dataset {
        DatasetRef::Synthetic { n } => {
            gen_synthetic(*n, &mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_DATA])))?
        }
        DatasetRef::Csv { path, schema } => {
            let schema = DatasetSchema::load(schema)?;
            load_csv(path, &schema, derive_seed(cfg.seed, &[STREAM_DATA]))?
        }
    };
    let train = TrainConfig {
        seed: derive_seed(cfg.seed, &[STREAM_DATA, cfg.train.seed]),
        ..cfg.train.clone()
    };
    let clf = Mlp::train(&data, &train)?;
    prepare_with(cfg, data, Box::new(clf))
}

/// [`prepare`] with a given classifier.
pub fn prepare_with(cfg: &ExperimentConfig, data: Dataset, classifier: Box<dyn Classifier>) -> Result<Prepared, BenchError> {
    let predict = |i: usize| classifier.predict(data.row(i).as_vector());
    let positive_train: Vec<usize> = data.train_indices().iter().copied().filter(|&i| predict(i)).collect();
    let pool_idx = seeded_subset(&positive_train, cfg.pool_cap, derive_seed(cfg.seed, &[STREAM_POOL]));
    let negative_test: Vec<usize> = data.test_indices().iter().copied().filter(|&i| !predict(i)).collect();
    let mut subject_idx = negative_test.clone();
    {
        use rand::seq::SliceRandom;
        subject_idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_SUBJECTS])));
    }
    let graph_idx = seeded_subset(data.train_indices(), cfg.graph_nodes, derive_seed(cfg.seed, &[STREAM_GRAPH]));
    if pool_idx.len() < 2 {
        return Err(BenchError::InvalidArgument("fewer than two favorable candidates".into()));
    }
    let pool = pool_idx.iter().map(|&i| data.row(i).clone()).collect();
    let subjects = subject_idx.iter().map(|&i| data.row(i).clone()).collect();
    let graph_points = graph_idx.iter().map(|&i| (data.row(i).clone(), predict(i))).collect();
    Ok(Prepared {
        data,
        classifier,
        pool,
        subjects,
        graph_points,
    })
}

/// Loads, trains and runs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Report, Vec<TrialRow>), BenchError> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    run_prepared(cfg, &prepared)
}

/// Runs every strategy × truth × subject trial and aggregates the rows.
/// Trial failures become rows with an `error`, not a failed run.
pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<(Report, Vec<TrialRow>), BenchError> {
    cfg.validate()?;
    let d = prepared.data.dim();
    let truths: Vec<CostMatrix> = (0..cfg.num_truth_matrices)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[STREAM_TRUTH, t as u64]));
            gen_truth_random(d, &mut rng)
        })
        .collect();
    let subjects = cfg.num_subjects.min(prepared.subjects.len());
    if subjects == 0 {
        return Err(BenchError::InvalidArgument("no unfavorable test subjects".into()));
    }
    let mut jobs = Vec::new();
    for strategy in &cfg.strategies {
        for truth_id in 0..truths.len() {
            for subject_id in 0..subjects {
                jobs.push((strategy.clone(), truth_id, subject_id));
            }
        }
    }
    let mut rows: Vec<TrialRow> = jobs
        .par_iter()
        .flat_map_iter(|(strategy, truth_id, subject_id)| {
            let trial = Trial {
                cfg,
                prepared,
                strategy,
                truth_id: *truth_id,
                subject_id: *subject_id,
                truth: &truths[*truth_id],
            };
            trial.run()
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.dataset, &a.strategy, &a.method, a.t, a.truth_id, a.subject_id).cmp(&(
            &b.dataset,
            &b.strategy,
            &b.method,
            b.t,
            b.truth_id,
            b.subject_id,
        ))
    });
    let report = Report::from_rows(&rows, cfg.mean_rank_k);
    Ok((report, rows))
}

struct Trial<'a> {
    cfg: &'a ExperimentConfig,
    prepared: &'a Prepared,
    strategy: &'a str,
    truth_id: usize,
    subject_id: usize,
    truth: &'a CostMatrix,
}

#[derive(Debug, Clone, Default)]
struct Outcome {
    validity: Option<f64>,
    cost: Option<f64>,
    path_cost: Option<f64>,
}

impl Trial<'_> {
    fn seed(&self) -> u64 {
        derive_seed(self.cfg.seed, &[STREAM_TRIAL, self.truth_id as u64, self.subject_id as u64])
    }

    fn row(&self, method: Method, t: usize) -> TrialRow {
        TrialRow {
            dataset: self.prepared.data.name.clone(),
            method: method.as_str().to_string(),
            strategy: self.strategy.to_string(),
            t,
            truth_id: self.truth_id,
            subject_id: self.subject_id,
            seed: self.seed(),
            validity: None,
            cost: None,
            path_cost: None,
            mean_rank: None,
            time_ms: None,
            error: None,
        }
    }

    fn run(&self) -> Vec<TrialRow> {
        let cfg = self.cfg;
        let x0 = &self.prepared.subjects[self.subject_id];
        let t_max = *cfg.t_values.iter().max().expect("validated");
        let session = Strategy::from_name(self.strategy, cfg.k)
            .map_err(BenchError::from)
            .and_then(|strategy| {
                let scfg = SessionConfig {
                    budget: t_max,
                    strategy,
                    margin: cfg.margin,
                    tolerance: cfg.tolerance,
                    seed: self.seed(),
                };
                let mut responder = SimulatedResponder::new(self.truth.clone(), cfg.indiff_band, cfg.flip_prob, self.seed());
                Ok(run_session(x0.clone(), self.prepared.pool.clone(), scfg, &mut responder)?)
            });
        let session = match session {
            Ok(s) => s,
            Err(e) => {
                return cfg
                    .t_values
                    .iter()
                    .flat_map(|&t| {
                        cfg.methods.iter().map(move |&m| (m, t))
                    })
                    .map(|(m, t)| TrialRow {
                        error: Some(e.to_string()),
                        ..self.row(m, t)
                    })
                    .collect();
            }
        };
        let graph = RecourseGraph::build(x0, &self.prepared.graph_points, cfg.graph_k, false);
        let half = CostMatrix::scaled_identity(x0.dim(), 0.5);
        let baseline_rank = mean_rank(&half, self.truth, &self.prepared.pool, x0, cfg.mean_rank_k).ok();

        let mut rows = Vec::new();
        // baselines ignore the answers, so they are evaluated once per trial
        let mut baselines: Vec<(Method, Result<Outcome, String>, f64)> = Vec::new();
        for &t in &cfg.t_values {
            let center = session
                .center_at(t.min(session.transcript().len()))
                .expect("prefix exists");
            let spec = session.spec_at(t);
            let rank = mean_rank(&center, self.truth, &self.prepared.pool, x0, cfg.mean_rank_k).ok();
            for &method in &cfg.methods {
                let cached = baselines.iter().find(|c| c.0 == method).map(|c| (c.1.clone(), c.2));
                let (result, ms) = cached.unwrap_or_else(|| {
                    let start = Instant::now();
                    let result = self
                        .evaluate(method, t, x0, &center, &spec, &graph)
                        .map_err(|e| e.to_string());
                    let ms = start.elapsed().as_secs_f64() * 1e3;
                    if method.is_baseline() {
                        baselines.push((method, result.clone(), ms));
                    }
                    (result, ms)
                });
                let mut row = self.row(method, t);
                match result {
                    Ok(o) => {
                        row.validity = o.validity;
                        row.cost = o.cost;
                        row.path_cost = o.path_cost;
                    }
                    Err(e) => row.error = Some(e),
                }
                row.mean_rank = if method.is_baseline() { baseline_rank } else { rank };
                if cfg.record_time {
                    row.time_ms = Some(ms);
                }
                rows.push(row);
            }
        }
        rows
    }

    fn evaluate(
        &self,
        method: Method,
        t: usize,
        x0: &FeatureVector,
        center: &CostMatrix,
        spec: &Result<ConfidenceSetSpec, crate::elicit::ElicitError>,
        graph: &Result<RecourseGraph, graph::GraphError>,
    ) -> Result<Outcome, BenchError> {
        let half = CostMatrix::scaled_identity(x0.dim(), 0.5);
        let clf = self.prepared.classifier.as_ref();
        let spec = || -> Result<ConfidenceSetSpec, BenchError> {
            spec.as_ref()
                .map(Clone::clone)
                .map_err(|e| BenchError::InvalidArgument(e.to_string()))
        };
        let graph = || -> Result<RecourseGraph, BenchError> {
            graph.as_ref()
                .map(Clone::clone)
                .map_err(|e| BenchError::InvalidArgument(e.to_string()))
        };
        match method {
            Method::Rank => Ok(Outcome::default()),
            Method::Grad | Method::Wachter => {
                // With no answers the confidence set carries no information and
                // the method falls back to the ½I convention, like the baseline.
                let model = match method {
                    Method::Grad if t > 0 => CostModel::WorstCase(spec()?),
                    _ => CostModel::Fixed(half),
                };
                let plan = grad::generate(x0, clf, &model, &self.grad_config())
                    .map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
                Ok(Outcome {
                    validity: Some(f64::from(u8::from(clf.predict(plan.terminal.as_vector())))),
                    cost: Some(cost(self.truth, &plan.terminal, x0)?),
                    path_cost: None,
                })
            }
            Method::Graph | Method::Face | Method::GraphWorstCase => {
                let mut g = graph()?;
                match method {
                    Method::Graph => g.assign_weights(center),
                    Method::GraphWorstCase if t > 0 => g.assign_worst_case_weights(&spec()?),
                    _ => g.assign_weights(&half),
                }
                .map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
                let plan =
                    graph::shortest_sequential_recourse(&g).map_err(|e| BenchError::InvalidArgument(e.to_string()))?;
                let truth_path: f64 = plan
                    .path
                    .windows(2)
                    .map(|w| quad_form(self.truth.as_matrix(), &(g.node(w[1]).as_vector() - g.node(w[0]).as_vector())))
                    .sum();
                let terminal = g.node(plan.terminal());
                Ok(Outcome {
                    validity: Some(f64::from(u8::from(clf.predict(terminal.as_vector())))),
                    cost: Some(cost(self.truth, terminal, x0)?),
                    path_cost: Some(truth_path),
                })
            }
        }
    }

    fn grad_config(&self) -> GradConfig {
        GradConfig {
            one_hot_blocks: self.prepared.data.encoding().one_hot_blocks(),
            ..self.cfg.grad.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_part() {
        assert_ne!(derive_seed(0, &[1, 2]), derive_seed(0, &[2, 1]));
        assert_ne!(derive_seed(0, &[1]), derive_seed(1, &[1]));
        assert_eq!(derive_seed(7, &[3]), derive_seed(7, &[3]));
    }

    #[test]
    fn methods_round_trip_names() {
        for m in [Method::Rank, Method::Grad, Method::Wachter, Method::Graph, Method::Face, Method::GraphWorstCase] {
            assert_eq!(Method::parse(m.as_str()).unwrap(), m);
        }
        assert!(Method::parse("dice").is_err());
    }
}
