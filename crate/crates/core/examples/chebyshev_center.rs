//! Shrinking the confidence set one answer at a time.
//!
//! Subject at the origin, three candidate moves. Each stated preference adds
//! a cut `⟨A, M⟩ ≤ ε`; the Chebyshev center is the estimate we would act on.

use recourse::conic::{chebyshev_center, max_over_confidence};
use recourse::{ConfidenceSetSpec, CutMatrix, FeatureVector};

fn main() {
    let fv = |v: &[f64]| FeatureVector::from_slice(v).unwrap();
    let x0 = fv(&[0.0, 0.0]);
    let pool = [fv(&[1.0, 0.0]), fv(&[0.0, 1.0]), fv(&[0.6, 0.6])];

    let mut spec = ConfidenceSetSpec::unconstrained(2, recourse::DEFAULT_MARGIN);
    let start = chebyshev_center(&spec).unwrap();
    println!("no answers: center {:?}, radius {}", start.center.rows(), start.radius);

    // the subject finds moving x₂ cheaper than moving x₁, then the diagonal cheapest
    for (i, j) in [(1, 0), (2, 1)] {
        spec = spec.with_cut(CutMatrix::new((i, j), &pool[i], &pool[j], &x0).unwrap());
        let c = chebyshev_center(&spec).unwrap();
        println!("after {i} over {j}: center {:.3?}, radius {:.4}", c.center.rows(), c.radius);
    }

    // how bad can a unit step along x₁ still be?
    let u = nalgebra::DVector::from_vec(vec![1.0, 0.0]);
    let worst = max_over_confidence(&(&u * u.transpose()), &spec).unwrap();
    println!("worst-case cost of a unit x₁ step: {:.4} (dual bound {:.4})", worst.value, worst.dual_value);
}
