//! Worst-case gradient recourse against the Wachter-style baseline.
//!
//! Both runs are priced afterwards under the hidden truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse::bench::{prepare, ExperimentConfig};
use recourse::elicit::{gen_truth_random, run_simulated, SessionConfig};
use recourse::grad::{generate, CostModel, GradConfig};
use recourse::{cost, CostMatrix};

fn main() {
    let p = prepare(&ExperimentConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = GradConfig::default();
    let (mut ours, mut baseline) = (0.0, 0.0);
    let n = 10;
    for x0 in p.subjects.iter().take(n) {
        let truth = gen_truth_random(2, &mut rng);
        let session = run_simulated(x0.clone(), p.pool.clone(), SessionConfig::default(), &truth, 0).unwrap();
        let robust = generate(x0, p.classifier.as_ref(), &CostModel::WorstCase(session.spec().clone()), &cfg).unwrap();
        let wachter = generate(x0, p.classifier.as_ref(), &CostModel::Fixed(CostMatrix::scaled_identity(2, 0.5)), &cfg).unwrap();
        let (a, b) = (cost(&truth, &robust.terminal, x0).unwrap(), cost(&truth, &wachter.terminal, x0).unwrap());
        println!(
            "{:.3?} -> {:.3?} (p {:.2}, true cost {a:.4}) | Wachter {:.3?} (true cost {b:.4})",
            x0.as_slice(),
            robust.terminal.as_slice(),
            robust.probability,
            wachter.terminal.as_slice()
        );
        ours += a;
        baseline += b;
    }
    println!("mean true cost: worst case {:.4}, Wachter {:.4}", ours / n as f64, baseline / n as f64);
}
