//! Sequential recourse on a kNN graph of the synthetic training rows.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse::bench::{prepare, ExperimentConfig};
use recourse::conic::chebyshev_center;
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig};
use recourse::graph::{shortest_sequential_recourse, RecourseGraph, DEFAULT_K};

fn main() {
    let p = prepare(&ExperimentConfig::default()).unwrap();
    let x0 = &p.subjects[0];
    let truth = gen_truth_random(2, &mut ChaCha8Rng::seed_from_u64(5));
    let session = run_simulated(x0.clone(), p.pool.clone(), SessionConfig::default(), &truth, 0).unwrap();
    let center = chebyshev_center(session.spec()).unwrap().center;

    let mut graph = RecourseGraph::build(x0, &p.graph_points, DEFAULT_K, false).unwrap();
    for (label, a) in [("center", &center), ("truth", &truth)] {
        graph.assign_weights(a).unwrap();
        let plan = shortest_sequential_recourse(&graph).unwrap();
        println!("{label}: {} steps, cost {:.4}", plan.path.len() - 1, plan.path_cost);
        for &i in &plan.path {
            println!("  node {i:>3} {:.3?} favorable {}", graph.node(i).as_slice(), graph.is_positive(i));
        }
    }
}
