//! Edgewise worst-case weights against the exact min-max path.
//!
//! The relaxed path prices every edge with its own worst matrix; the exact
//! one lets a single matrix price the whole path. On small graphs they
//! rarely differ.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig};
use recourse::graph::{jaccard_edges, minmax_flow_exhaustive, path_worst_case, shortest_sequential_recourse, RecourseGraph};
use recourse::FeatureVector;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut fv = |scale: f64| FeatureVector::from_slice(&[rng.random::<f64>() * scale, rng.random::<f64>() * scale]).unwrap();
    let x0 = fv(0.4);
    let points: Vec<_> = (0..9)
        .map(|_| {
            let x = fv(1.0);
            let favorable = x.as_slice().iter().sum::<f64>() > 1.1;
            (x, favorable)
        })
        .collect();
    let pool: Vec<_> = points.iter().filter(|p| p.1).map(|p| p.0.clone()).collect();
    let truth = gen_truth_random(2, &mut ChaCha8Rng::seed_from_u64(1));
    let cfg = SessionConfig { budget: 3, ..SessionConfig::default() };
    let spec = run_simulated(x0.clone(), pool, cfg, &truth, 0).unwrap().spec().clone();

    let mut graph = RecourseGraph::build(&x0, &points, 3, false).unwrap();
    graph.assign_worst_case_weights(&spec).unwrap();
    let relaxed = shortest_sequential_recourse(&graph).unwrap();
    let exact = minmax_flow_exhaustive(&graph, &spec, 8).unwrap();
    let coupled = path_worst_case(&graph, &relaxed.path, &spec).unwrap();
    println!("relaxed path {:?}: edgewise {:.4}, one matrix {coupled:.4}", relaxed.path, relaxed.path_cost);
    println!("min-max path {:?}: {:.4}", exact.path, exact.path_cost);
    println!("Jaccard distance {:.3}", jaccard_edges(&exact, &relaxed));
    println!("{}", serde_json::to_string(&graph.to_node_link()).unwrap());
}
