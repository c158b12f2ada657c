//! The three ground-truth generators of the simulations.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recourse::elicit::{gen_truth_causal, gen_truth_lqr, gen_truth_random};

fn main() {
    let random = gen_truth_random(3, &mut ChaCha8Rng::seed_from_u64(0));
    println!("random, spectral radius {:.6}: {:.3?}", random.max_eigenvalue(), random.rows());

    let one = DMatrix::from_element(1, 1, 1.0);
    let lqr = gen_truth_lqr(&one, &one, 1e-12, 10_000).unwrap();
    println!("scalar LQR value {:.12} (golden ratio {:.12})", lqr.as_matrix()[(0, 0)], (1.0 + 5f64.sqrt()) / 2.0);

    // x₂ = 0.8·x₁ + e: moving x₁ alone breaks the relation and costs more
    let w = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.8, 0.0]);
    let causal = gen_truth_causal(&w, &DMatrix::identity(2, 2)).unwrap();
    println!("causal precision {:.3?}", causal.rows());
}
