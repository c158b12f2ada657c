use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse::conic::chebyshev_center;
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig};
use recourse::graph::{
    jaccard_edges, minmax_flow_exhaustive, path_worst_case, shortest_sequential_recourse, RecourseGraph,
    DEFAULT_PATH_CAP,
};
use recourse::{ConfidenceSetSpec, CostMatrix, CutMatrix, FeatureVector};

fn fv(v: &[f64]) -> FeatureVector {
    FeatureVector::from_slice(v).unwrap()
}

/// `n` random points in the unit square, the upper right ones favorable.
fn random_points(n: usize, rng: &mut ChaCha8Rng) -> (FeatureVector, Vec<(FeatureVector, bool)>) {
    let x0 = fv(&[rng.random::<f64>() * 0.4, rng.random::<f64>() * 0.4]);
    let points = (0..n)
        .map(|_| {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            (fv(&x), x[0] + x[1] > 1.1)
        })
        .collect();
    (x0, points)
}

/// Confidence set from a short noise-free session over the favorable points.
fn spec_for(x0: &FeatureVector, points: &[(FeatureVector, bool)], rng: &mut ChaCha8Rng) -> ConfidenceSetSpec {
    let pool: Vec<_> = points.iter().filter(|p| p.1).map(|p| p.0.clone()).collect();
    let truth = gen_truth_random(2, rng);
    let cfg = SessionConfig {
        budget: 3,
        ..SessionConfig::default()
    };
    run_simulated(x0.clone(), pool, cfg, &truth, 0).unwrap().spec().clone()
}

#[test]
fn k_of_n_minus_one_is_complete() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (x0, points) = random_points(6, &mut rng);
    let g = RecourseGraph::build(&x0, &points, 6, false).unwrap();
    assert_eq!(g.edges().len(), 7 * 6);
    assert!(g.edges().iter().all(|e| e.src != e.dst));
    assert!(RecourseGraph::build(&x0, &points, 7, false).is_err());
}

#[test]
fn equal_distances_give_one_edge_set() {
    // a square around x0: all four neighbors at distance 1
    let x0 = fv(&[0.5, 0.5]);
    let points: Vec<_> = [[1.5, 0.5], [0.5, 1.5], [-0.5, 0.5], [0.5, -0.5]]
        .iter()
        .enumerate()
        .map(|(i, p)| (fv(p), i == 0))
        .collect();
    let a = RecourseGraph::build(&x0, &points, 2, false).unwrap();
    let b = RecourseGraph::build(&x0, &points, 2, false).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert!(a.edge(0, 1).is_some() && a.edge(0, 2).is_some());
    assert!(a.edge(0, 3).is_none() && a.edge(0, 4).is_none());
}

#[test]
fn fixed_weights_scale_with_the_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x0, points) = random_points(20, &mut rng);
    let mut g = RecourseGraph::build(&x0, &points, 4, false).unwrap();
    let euclid: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();
    g.assign_weights(&CostMatrix::identity(2)).unwrap();
    for (e, w) in g.edges().iter().zip(&euclid) {
        assert_abs_diff_eq!(e.weight, *w, epsilon = 1e-15);
    }
    g.assign_weights(&CostMatrix::scaled_identity(2, 0.5)).unwrap();
    for (e, w) in g.edges().iter().zip(&euclid) {
        assert_abs_diff_eq!(e.weight, 0.5 * w, epsilon = 1e-15);
    }
    g.assign_weights(&CostMatrix::zeros(2)).unwrap();
    assert!(g.edges().iter().all(|e| e.weight == 0.0));
}

#[test]
fn worst_case_weights_bracket_the_center() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (x0, points) = random_points(25, &mut rng);
    let mut g = RecourseGraph::build(&x0, &points, 4, false).unwrap();
    let euclid: Vec<f64> = g.edges().iter().map(|e| e.weight).collect();

    g.assign_worst_case_weights(&ConfidenceSetSpec::unconstrained(2, 0.01)).unwrap();
    for (e, w) in g.edges().iter().zip(&euclid) {
        assert_abs_diff_eq!(e.weight, *w, epsilon = 1e-7);
    }

    let spec = spec_for(&x0, &points, &mut rng);
    let center = chebyshev_center(&spec).unwrap().center;
    let mut at_center = g.clone();
    at_center.assign_weights(&center).unwrap();
    g.assign_worst_case_weights(&spec).unwrap();
    for (wc, c) in g.edges().iter().zip(at_center.edges()) {
        assert!(wc.weight >= c.weight - 1e-8, "{} < {}", wc.weight, c.weight);
        assert!(wc.weight <= euclid[g.edges().iter().position(|e| e == wc).unwrap()] + 1e-8);
    }
}

#[test]
fn one_dimensional_worst_case_edge() {
    // x0 = 0, candidates 1 and 2, preference 2 over 1: M = [3], so a ≤ 0.01 / 3
    let x0 = fv(&[0.0]);
    let points = vec![(fv(&[1.0]), false), (fv(&[2.0]), true)];
    let cut = CutMatrix::new((1, 0), &fv(&[2.0]), &fv(&[1.0]), &x0).unwrap();
    let spec = ConfidenceSetSpec::new(1, 0.01, vec![cut]).unwrap();
    let mut g = RecourseGraph::build(&x0, &points, 2, false).unwrap();
    g.assign_worst_case_weights(&spec).unwrap();
    assert_abs_diff_eq!(g.edge(0, 2).unwrap().weight, 4.0 / 300.0, epsilon = 1e-8);
    assert_abs_diff_eq!(g.edge(0, 1).unwrap().weight, 1.0 / 300.0, epsilon = 1e-8);
}

fn six_node_fixture() -> (FeatureVector, Vec<(FeatureVector, bool)>) {
    let x0 = fv(&[0.0, 0.0]);
    let points = vec![
        (fv(&[0.3, 0.1]), false),
        (fv(&[0.5, 0.4]), false),
        (fv(&[0.1, 0.5]), false),
        (fv(&[0.9, 0.6]), true),
        (fv(&[0.4, 0.9]), true),
    ];
    (x0, points)
}

#[test]
fn empty_set_minmax_equals_shortest_path() {
    let (x0, points) = six_node_fixture();
    for k in 2..=5 {
        let mut g = RecourseGraph::build(&x0, &points, k, false).unwrap();
        g.assign_weights(&CostMatrix::identity(2)).unwrap();
        let short = shortest_sequential_recourse(&g);
        let exact = minmax_flow_exhaustive(&g, &ConfidenceSetSpec::unconstrained(2, 0.01), DEFAULT_PATH_CAP);
        let (Ok(short), Ok(exact)) = (short, exact) else {
            assert!(k < 3, "unreachable at K = {k}");
            continue;
        };
        assert_eq!(short.path, exact.path, "K = {k}");
        assert_abs_diff_eq!(short.path_cost, exact.path_cost, epsilon = 1e-7);
    }
}

#[test]
fn only_the_terminal_is_favorable_and_costs_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let (x0, points) = random_points(40, &mut rng);
        let mut g = RecourseGraph::build(&x0, &points, 5, false).unwrap();
        g.assign_weights(&gen_truth_random(2, &mut rng)).unwrap();
        let Ok(plan) = shortest_sequential_recourse(&g) else {
            continue;
        };
        assert_eq!(plan.path[0], 0);
        assert_eq!(plan.terminal_class, 1);
        assert!(g.is_positive(plan.terminal()));
        assert!(plan.path[..plan.path.len() - 1].iter().all(|&i| !g.is_positive(i)));
        let mut total = 0.0;
        for (w, pair) in plan.edge_costs.iter().zip(plan.path.windows(2)) {
            let edge = g.edge(pair[0], pair[1]).expect("consecutive nodes are adjacent");
            assert_eq!(*w, edge.weight);
            total += edge.weight;
        }
        assert_abs_diff_eq!(plan.path_cost, total, epsilon = 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Edgewise maxima over-estimate the single-matrix worst case of a path,
    /// and the min-max path is never worse than the relaxed one.
    #[test]
    fn relaxed_weights_bound_the_coupled_worst_case(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x0, points) = random_points(8, &mut rng);
        prop_assume!(points.iter().filter(|p| p.1).count() >= 2);
        let spec = spec_for(&x0, &points, &mut rng);
        let mut g = RecourseGraph::build(&x0, &points, 3, false).unwrap();
        g.assign_worst_case_weights(&spec).unwrap();
        let relaxed = match shortest_sequential_recourse(&g) {
            Ok(p) => p,
            Err(_) => return Ok(()),
        };
        let coupled = path_worst_case(&g, &relaxed.path, &spec).unwrap();
        prop_assert!(relaxed.path_cost >= coupled - 1e-7);
        let exact = minmax_flow_exhaustive(&g, &spec, DEFAULT_PATH_CAP).unwrap();
        prop_assert!(exact.path_cost <= coupled + 1e-7);
        let d = jaccard_edges(&exact, &relaxed);
        prop_assert!((0.0..=1.0).contains(&d));
    }
}

#[test]
fn some_small_instance_separates_relaxed_and_exact_paths() {
    let mut found = None;
    for seed in 0..400 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x0, points) = random_points(4, &mut rng);
        if points.iter().filter(|p| p.1).count() < 2 {
            continue;
        }
        let spec = spec_for(&x0, &points, &mut rng);
        let mut g = RecourseGraph::build(&x0, &points, 4, false).unwrap();
        g.assign_worst_case_weights(&spec).unwrap();
        let (Ok(relaxed), Ok(exact)) = (shortest_sequential_recourse(&g), minmax_flow_exhaustive(&g, &spec, 4)) else {
            continue;
        };
        if jaccard_edges(&exact, &relaxed) > 0.0 {
            let relaxed_true = path_worst_case(&g, &relaxed.path, &spec).unwrap();
            assert!(exact.path_cost < relaxed_true + 1e-9);
            found = Some(seed);
            break;
        }
    }
    assert!(found.is_some(), "no five-node instance separates the two paths");
}

#[test]
fn node_link_export_mirrors_the_graph() {
    let (x0, points) = six_node_fixture();
    let g = RecourseGraph::build(&x0, &points, 2, true).unwrap();
    let nl = g.to_node_link();
    assert_eq!(nl.nodes.len(), 6);
    assert_eq!(nl.edges, g.edges());
    assert_eq!(nl.nodes[4].class, 1);
    assert_eq!(nl.nodes[0].features, vec![0.0, 0.0]);
    // symmetrized: every edge has its reverse
    assert!(g.edges().iter().all(|e| g.edge(e.dst, e.src).is_some()));
    let json = serde_json::to_value(&nl).unwrap();
    assert!(json["nodes"].is_array() && json["edges"][0]["weight"].is_f64());
}
