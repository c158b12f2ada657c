//! A simulated subject answering k-option questions on the synthetic data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse::bench::{mean_rank, prepare, ExperimentConfig};
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig, Strategy};

fn main() {
    let prepared = prepare(&ExperimentConfig::default()).unwrap();
    let x0 = prepared.subjects[0].clone();
    let truth = gen_truth_random(2, &mut ChaCha8Rng::seed_from_u64(1));
    println!("hidden truth {:.3?}", truth.rows());

    for strategy in [Strategy::SimilarCost { k: 2, gap_threshold: None }, Strategy::SimilarCost { k: 3, gap_threshold: None }] {
        let cfg = SessionConfig {
            budget: 8,
            strategy: strategy.clone(),
            ..SessionConfig::default()
        };
        let session = run_simulated(x0.clone(), prepared.pool.clone(), cfg, &truth, 0).unwrap();
        println!("\n{strategy:?}");
        for e in session.transcript() {
            let center = session.center_at(e.round).unwrap();
            let rank = mean_rank(&center, &truth, &prepared.pool, &x0, 10).unwrap();
            println!(
                "  round {}: options {:?} answer {:?} radius {:.4} mean rank {rank:.4}",
                e.round, e.option_indices, e.answer, e.radius
            );
        }
    }
}
