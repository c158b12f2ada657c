use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse::bench::{prepare, ExperimentConfig, Prepared};
use recourse::data::{Classifier, LogisticRegression};
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig};
use recourse::grad::{generate, objective, CostModel, GradConfig, LossKind};
use recourse::{ConfidenceSetSpec, CostMatrix, FeatureVector};

fn synthetic() -> &'static Prepared {
    static PREPARED: OnceLock<Prepared> = OnceLock::new();
    PREPARED.get_or_init(|| prepare(&ExperimentConfig::default()).unwrap())
}

/// Confidence set after five noise-free answers about subject `s`.
fn elicited_spec(s: usize, seed: u64) -> (ConfidenceSetSpec, CostMatrix) {
    let p = synthetic();
    let truth = gen_truth_random(2, &mut ChaCha8Rng::seed_from_u64(seed));
    let cfg = SessionConfig {
        budget: 5,
        ..SessionConfig::default()
    };
    let session = run_simulated(p.subjects[s].clone(), p.pool.clone(), cfg, &truth, seed).unwrap();
    (session.spec().clone(), truth)
}

/// Always favorable, flat.
struct Constant(usize);

impl Classifier for Constant {
    fn input_dim(&self) -> usize {
        self.0
    }

    fn prob(&self, _: &DVector<f64>) -> f64 {
        0.9
    }

    fn prob_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        (0.9, DVector::zeros(x.len()))
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = synthetic();
    let h = 1e-5;
    let mut checked = 0;
    for s in 0..6 {
        let (spec, truth) = elicited_spec(s, s as u64);
        let x0 = p.subjects[s].as_vector();
        for model in [CostModel::Fixed(truth), CostModel::WorstCase(spec)] {
            for loss in [LossKind::Quadratic, LossKind::CrossEntropy] {
                let x = x0.map(|v| (v + 0.15).min(1.0));
                let obj = objective(&x, x0, p.classifier.as_ref(), &model, 0.7, loss).unwrap();
                let mut stable = true;
                let mut fd = DVector::zeros(x.len());
                for i in 0..x.len() {
                    let mut e = DVector::zeros(x.len());
                    e[i] = h;
                    let hi = objective(&(&x + &e), x0, p.classifier.as_ref(), &model, 0.7, loss).unwrap();
                    let lo = objective(&(&x - &e), x0, p.classifier.as_ref(), &model, 0.7, loss).unwrap();
                    // Danskin only holds where the maximizer does not jump
                    stable &= (&hi.argmax - &obj.argmax).amax() < 1e-3 && (&lo.argmax - &obj.argmax).amax() < 1e-3;
                    fd[i] = (hi.value - lo.value) / (2.0 * h);
                }
                if !stable {
                    continue;
                }
                let err = (&fd - &obj.gradient).norm() / obj.gradient.norm().max(1e-12);
                assert!(err <= 1e-4, "relative error {err:e} at subject {s}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 18, "only {checked} stable points");
}

#[test]
fn worst_case_dominates_members_of_the_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for s in 0..3 {
        let (spec, truth) = elicited_spec(s, 100 + s as u64);
        let model = CostModel::WorstCase(spec.clone());
        let u = DVector::from_fn(2, |_, _| rng.random::<f64>() - 0.5);
        let (worst, argmax) = model.evaluate(&u).unwrap();
        assert!(spec.contains(&CostMatrix::new(argmax).unwrap(), 1e-6));
        let mut sampled = 0;
        while sampled < 100 {
            // pull a random box matrix towards the truth until it satisfies every cut
            let g = DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5);
            let box_member = CostMatrix::new(&g * g.transpose()).unwrap().normalized();
            let mut t = 1.0;
            let a = loop {
                let a = CostMatrix::new(truth.as_matrix() + (box_member.as_matrix() - truth.as_matrix()) * t).unwrap();
                if spec.contains(&a, 0.0) {
                    break a;
                }
                t *= 0.5;
            };
            let c = (u.transpose() * a.as_matrix() * &u)[(0, 0)];
            assert!(c <= worst + 1e-8, "member cost {c} above worst case {worst}");
            sampled += 1;
        }
    }
}

#[test]
fn cost_term_alone_descends() {
    let (spec, _) = elicited_spec(0, 3);
    let model = CostModel::WorstCase(spec);
    let clf = Constant(2);
    let x0 = DVector::from_vec(vec![0.2, 0.3]);
    let mut x = DVector::from_vec(vec![0.9, 0.8]);
    let mut last = f64::INFINITY;
    for _ in 0..50 {
        let obj = objective(&x, &x0, &clf, &model, 1.0, LossKind::Hinge).unwrap();
        assert!(obj.value <= last + 1e-9, "objective rose to {}", obj.value);
        last = obj.value;
        x = (&x - &obj.gradient * 0.1).map(|v| v.clamp(0.0, 1.0));
    }
    assert!(last < 0.05 * model.evaluate(&DVector::from_vec(vec![0.7, 0.5])).unwrap().0);
}

#[test]
fn empty_set_reaches_the_nearest_boundary_point() {
    // f(x) = σ(x₁ + x₂ − 1) and A* = I: the objective is symmetric in x₁, x₂
    // and its λ → 0 limit sits on the decision line
    let clf = LogisticRegression::new(vec![1.0, 1.0], -1.0);
    let x0 = FeatureVector::from_slice(&[0.0, 0.0]).unwrap();
    let cfg = GradConfig {
        loss: LossKind::Quadratic,
        lr: 0.1,
        max_iters: 5000,
        ..GradConfig::default()
    };
    let model = CostModel::WorstCase(ConfidenceSetSpec::unconstrained(2, recourse::DEFAULT_MARGIN));
    let plan = generate(&x0, &clf, &model, &cfg).unwrap();
    let t = plan.terminal.as_slice();
    assert!((t[0] - t[1]).abs() < 1e-9);
    assert!((t[0] - 0.5).abs() < 1e-3, "terminal {t:?}");
    assert!((plan.probability - 0.5).abs() < 1e-3);
    assert!((plan.worst_case_cost - 0.5).abs() < 2e-3);
}

#[test]
fn zero_lambda_is_valid_and_stays_in_the_box() {
    let p = synthetic();
    let cfg = GradConfig {
        lambda: 0.0,
        ..GradConfig::default()
    };
    for s in 0..10 {
        let (spec, _) = elicited_spec(s, s as u64);
        let plan = generate(&p.subjects[s], p.classifier.as_ref(), &CostModel::WorstCase(spec), &cfg).unwrap();
        assert!(plan.valid, "subject {s}");
        assert!(plan.terminal.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn default_descent_is_valid_on_synthetic_subjects() {
    let p = synthetic();
    let cfg = GradConfig::default();
    for s in 0..10 {
        let (spec, truth) = elicited_spec(s, 50 + s as u64);
        for model in [CostModel::WorstCase(spec), CostModel::Fixed(truth)] {
            let plan = generate(&p.subjects[s], p.classifier.as_ref(), &model, &cfg).unwrap();
            assert!(plan.valid, "subject {s}");
            assert!(plan.probability >= 0.5);
            assert!(plan.terminal.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            let u = plan.terminal.as_vector() - p.subjects[s].as_vector();
            let (c, _) = model.evaluate(&u).unwrap();
            assert!((c - plan.worst_case_cost).abs() <= 1e-9);
        }
    }
}

#[test]
fn mismatched_dimension_is_rejected() {
    let clf = Constant(3);
    let x0 = FeatureVector::from_slice(&[0.0, 0.0]).unwrap();
    let model = CostModel::Fixed(CostMatrix::identity(2));
    assert!(generate(&x0, &clf, &model, &GradConfig::default()).is_err());
    let bad = GradConfig {
        lr: 0.0,
        ..GradConfig::default()
    };
    assert!(generate(&x0, &Constant(2), &model, &bad).is_err());
}
