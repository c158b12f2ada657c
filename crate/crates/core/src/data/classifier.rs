use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::DataError;

/// Probability of the favorable class, its gradient, and the 0.5 threshold.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    fn prob(&self, x: &DVector<f64>) -> f64;

    /// `f(x)` and `∇f(x)`.
    fn prob_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>);

    fn predict(&self, x: &DVector<f64>) -> bool {
        self.prob(x) >= 0.5
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fraction of `indices` whose prediction matches the label.
pub fn accuracy(clf: &dyn Classifier, data: &Dataset, indices: &[usize]) -> f64 {
    let hits = indices
        .iter()
        .filter(|&&i| clf.predict(data.row(i).as_vector()) == data.labels()[i])
        .count();
    hits as f64 / indices.len().max(1) as f64
}

/// `σ(wᵀx + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticRegression {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        Self { weights, bias }
    }

    /// Full-batch gradient descent on the cross-entropy of the training split.
    pub fn fit(data: &Dataset, epochs: usize, lr: f64) -> Result<Self, DataError> {
        let train = data.train_indices();
        check_two_classes(data, train)?;
        let d = data.dim();
        let mut w = DVector::zeros(d);
        let mut b = 0.0;
        for _ in 0..epochs {
            let mut gw = DVector::zeros(d);
            let mut gb = 0.0;
            for &i in train {
                let x = data.row(i).as_vector();
                let y = if data.labels()[i] { 1.0 } else { 0.0 };
                let err = sigmoid(w.dot(x) + b) - y;
                gw.axpy(err, x, 1.0);
                gb += err;
            }
            let scale = lr / train.len() as f64;
            w.axpy(-scale, &gw, 1.0);
            b -= scale * gb;
        }
        Ok(Self {
            weights: w.iter().copied().collect(),
            bias: b,
        })
    }

    fn logit(&self, x: &DVector<f64>) -> f64 {
        self.weights.iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

impl Classifier for LogisticRegression {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn prob(&self, x: &DVector<f64>) -> f64 {
        sigmoid(self.logit(x))
    }

    fn prob_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = self.prob(x);
        let g = DVector::from_iterator(self.weights.len(), self.weights.iter().map(|w| p * (1.0 - p) * w));
        (p, g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![20, 50, 20],
            epochs: 200,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// ReLU network with a single sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

/// On-disk form: layer sizes and row-major weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpCheckpoint {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.weights[0].ncols()];
        sizes.extend(self.weights.iter().map(|w| w.nrows()));
        sizes
    }

    pub fn to_checkpoint(&self) -> MlpCheckpoint {
        MlpCheckpoint {
            layer_sizes: self.layer_sizes(),
            weights: self.weights.iter().map(crate::cost::matrix_rows).collect(),
            biases: self.biases.iter().map(|b| b.iter().copied().collect()).collect(),
        }
    }

    pub fn from_checkpoint(ck: &MlpCheckpoint) -> Result<Self, DataError> {
        let sizes = &ck.layer_sizes;
        let layers = sizes.len().saturating_sub(1);
        if layers == 0 || ck.weights.len() != layers || ck.biases.len() != layers || sizes[layers] != 1 {
            return Err(DataError::Checkpoint("layer sizes do not match weights".into()));
        }
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (rows, cols) = (sizes[l + 1], sizes[l]);
            let w = &ck.weights[l];
            if w.len() != rows || w.iter().any(|r| r.len() != cols) || ck.biases[l].len() != rows {
                return Err(DataError::Checkpoint(format!("layer {l} has the wrong shape")));
            }
            weights.push(DMatrix::from_fn(rows, cols, |i, j| w[i][j]));
            biases.push(DVector::from_vec(ck.biases[l].clone()));
        }
        Ok(Self { weights, biases })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let ck: MlpCheckpoint = serde_json::from_str(text).map_err(|e| DataError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(&ck)
    }

    fn init(sizes: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-bound..bound)));
            let bb = 1.0 / (fan_in as f64).sqrt();
            biases.push(DVector::from_fn(fan_out, |_, _| rng.random_range(-bb..bb)));
        }
        Self { weights, biases }
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut zs = Vec::with_capacity(self.weights.len());
        let mut h = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * &h + b;
            if l + 1 < self.weights.len() {
                h = z.map(|v| v.max(0.0));
            }
            zs.push(z);
        }
        zs
    }

    /// Smallest `|z|` over hidden units at `x`; finite differences with a step
    /// well below this do not cross a ReLU kink.
    pub fn min_abs_preactivation(&self, x: &DVector<f64>) -> f64 {
        let zs = self.forward(x);
        zs[..zs.len() - 1]
            .iter()
            .flat_map(|z| z.iter().map(|v| v.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Adam on binary cross-entropy over the training split.
    pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<Self, DataError> {
        let train = data.train_indices();
        check_two_classes(data, train)?;
        let mut sizes = vec![data.dim()];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut net = Self::init(&sizes, &mut rng);
        let mut adam = Adam::new(&net);

        let mut order = train.to_vec();
        for _ in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size.max(1)) {
                let grads = net.batch_gradient(data, batch);
                adam.step(&mut net, &grads, cfg.lr);
            }
        }
        Ok(net)
    }

    fn batch_gradient(&self, data: &Dataset, batch: &[usize]) -> Vec<(DMatrix<f64>, DVector<f64>)> {
        let n = batch.len();
        let x = DMatrix::from_fn(data.dim(), n, |r, c| data.row(batch[c]).as_slice()[r]);
        let mut acts = vec![x];
        let mut zs = Vec::new();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if l < last {
                acts.push(z.map(|v| v.max(0.0)));
            }
            zs.push(z);
        }
        // d(mean BCE)/dz at the output is (p − y)/n.
        let mut delta = DMatrix::from_fn(1, n, |_, c| {
            let y = if data.labels()[batch[c]] { 1.0 } else { 0.0 };
            (sigmoid(zs[last][(0, c)]) - y) / n as f64
        });
        let mut grads = vec![(DMatrix::zeros(0, 0), DVector::zeros(0)); self.weights.len()];
        for l in (0..=last).rev() {
            let gw = &delta * acts[l].transpose();
            let gb = delta.column_sum();
            if l > 0 {
                let mut back = self.weights[l].transpose() * &delta;
                back.zip_apply(&zs[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = back;
            }
            grads[l] = (gw, gb);
        }
        grads
    }
}

impl Classifier for Mlp {
    fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    fn prob(&self, x: &DVector<f64>) -> f64 {
        sigmoid(self.forward(x).last().unwrap()[0])
    }

    fn prob_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let zs = self.forward(x);
        let last = self.weights.len() - 1;
        let p = sigmoid(zs[last][0]);
        let mut delta = DVector::from_element(1, p * (1.0 - p));
        for l in (0..=last).rev() {
            let mut back = self.weights[l].transpose() * &delta;
            if l > 0 {
                back.zip_apply(&zs[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            delta = back;
        }
        (p, delta)
    }
}

struct Adam {
    m: Vec<(DMatrix<f64>, DVector<f64>)>,
    v: Vec<(DMatrix<f64>, DVector<f64>)>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &Mlp) -> Self {
        let zeros: Vec<_> = net
            .weights
            .iter()
            .zip(&net.biases)
            .map(|(w, b)| (DMatrix::zeros(w.nrows(), w.ncols()), DVector::zeros(b.len())))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Mlp, grads: &[(DMatrix<f64>, DVector<f64>)], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for l in 0..grads.len() {
            let (gw, gb) = &grads[l];
            let (m, v) = (&mut self.m[l], &mut self.v[l]);
            update(net.weights[l].as_mut_slice(), m.0.as_mut_slice(), v.0.as_mut_slice(), gw.as_slice(), lr, c1, c2);
            update(net.biases[l].as_mut_slice(), m.1.as_mut_slice(), v.1.as_mut_slice(), gb.as_slice(), lr, c1, c2);
        }
    }
}

fn update(param: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, c1: f64, c2: f64) {
    for i in 0..param.len() {
        m[i] = Adam::BETA1 * m[i] + (1.0 - Adam::BETA1) * g[i];
        v[i] = Adam::BETA2 * v[i] + (1.0 - Adam::BETA2) * g[i] * g[i];
        param[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Adam::EPS);
    }
}

fn check_two_classes(data: &Dataset, indices: &[usize]) -> Result<(), DataError> {
    if indices.is_empty() {
        return Err(DataError::TooFewRows(0));
    }
    let pos = indices.iter().filter(|&&i| data.labels()[i]).count();
    if pos == 0 || pos == indices.len() {
        return Err(DataError::SingleClass);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::gen_synthetic;

    #[test]
    fn logistic_gradient_matches_formula() {
        let clf = LogisticRegression::new(vec![1.0, 1.0], -1.0);
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let (p, g) = clf.prob_grad(&x);
        assert_eq!(p, 0.5);
        assert_eq!(g.as_slice(), &[0.25, 0.25]);
        assert!(clf.predict(&x));
    }

    #[test]
    fn mlp_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(&[3, 8, 5, 1], &mut rng);
        let x = DVector::from_vec(vec![0.2, 0.7, 0.4]);
        let (_, g) = net.prob_grad(&x);
        let h = 1e-6;
        assert!(net.min_abs_preactivation(&x) > 10.0 * h);
        for i in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (net.prob(&xp) - net.prob(&xm)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + g[i].abs()), "{fd} vs {}", g[i]);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = Mlp::init(&[2, 4, 1], &mut rng);
        let back = Mlp::from_json(&net.to_json()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.layer_sizes(), vec![2, 4, 1]);
        assert!(Mlp::from_json(r#"{"layer_sizes":[2,1],"weights":[],"biases":[]}"#).is_err());
    }

    #[test]
    fn short_training_is_deterministic() {
        let data = gen_synthetic(200, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        assert_eq!(Mlp::train(&data, &cfg).unwrap(), Mlp::train(&data, &cfg).unwrap());
    }
}
