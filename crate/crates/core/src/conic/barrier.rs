//! Log-barrier interior-point method for small linear programs with
//! linear matrix inequalities:
//!
//! ```text
//! minimize    cᵀx
//! subject to  aₖᵀx ≤ bₖ
//!             F₀ + Σᵢ xᵢ Fᵢ ⪰ 0      (one or more blocks)
//! ```
//!
//! Every problem in this crate has at most a few hundred variables, so the
//! Newton system is formed densely and factored with Cholesky.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::ConicError;

/// Symmetric sparse matrix as a full entry list (both triangles present).
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    pub fn push(&mut self, r: usize, c: usize, v: f64) {
        self.entries.push((r, c, v));
        if r != c {
            self.entries.push((c, r, v));
        }
    }

    fn add_to(&self, m: &mut DMatrix<f64>, scale: f64) {
        for &(r, c, v) in &self.entries {
            m[(r, c)] += scale * v;
        }
    }

    /// `tr(G F)` for symmetric `G`.
    fn trace_with(&self, g: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(r, c, v)| v * g[(c, r)]).sum()
    }
}

/// One block `F₀ + Σ xᵢ Fᵢ ⪰ 0`; `coeffs[i]` multiplies variable `i`.
#[derive(Debug, Clone)]
pub(crate) struct Lmi {
    pub constant: DMatrix<f64>,
    pub coeffs: Vec<SparseSym>,
}

impl Lmi {
    fn size(&self) -> usize {
        self.constant.nrows()
    }

    fn eval(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (f, &xi) in self.coeffs.iter().zip(x.iter()) {
            f.add_to(&mut m, xi);
        }
        m
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub c: DVector<f64>,
    pub rows: Vec<(DVector<f64>, f64)>,
    pub lmis: Vec<Lmi>,
}

const CENTERING_CAP: usize = 60;
/// Squared Newton decrement below which full steps are taken.
const QUADRATIC_REGION: f64 = 0.0625;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub t0: f64,
    pub mu: f64,
    /// Stop once the duality-gap bound `m / t` falls below this.
    pub gap_tol: f64,
    pub center_tol: f64,
    pub max_newton: usize,
    /// Return as soon as the objective drops below this value.
    pub stop_below: Option<f64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            t0: 1.0,
            mu: 10.0,
            gap_tol: 1e-9,
            center_tol: 1e-11,
            max_newton: 800,
            stop_below: None,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub x: DVector<f64>,
    /// Multipliers of the linear rows.
    pub row_duals: DVector<f64>,
}

struct Eval {
    value: f64,
    slacks: DVector<f64>,
    inverses: Vec<DMatrix<f64>>,
}

impl Problem {
    fn barrier_dim(&self) -> usize {
        self.rows.len() + self.lmis.iter().map(Lmi::size).sum::<usize>()
    }

    /// Barrier value at `x`, or `None` outside the strict interior.
    fn eval(&self, x: &DVector<f64>, t: f64) -> Option<Eval> {
        let mut value = t * self.c.dot(x);
        let mut slacks = DVector::zeros(self.rows.len());
        for (k, (a, b)) in self.rows.iter().enumerate() {
            let s = b - a.dot(x);
            if s <= 0.0 || !s.is_finite() {
                return None;
            }
            slacks[k] = s;
            value -= s.ln();
        }
        let mut inverses = Vec::with_capacity(self.lmis.len());
        for lmi in &self.lmis {
            let chol = Cholesky::new(lmi.eval(x))?;
            let l = chol.l_dirty();
            let mut logdet = 0.0;
            for i in 0..lmi.size() {
                logdet += l[(i, i)].ln();
            }
            value -= 2.0 * logdet;
            inverses.push(chol.inverse());
        }
        value.is_finite().then_some(Eval {
            value,
            slacks,
            inverses,
        })
    }

    fn gradient_hessian(&self, x: &DVector<f64>, t: f64, e: &Eval) -> (DVector<f64>, DMatrix<f64>) {
        let n = x.len();
        let mut g = &self.c * t;
        let mut h = DMatrix::zeros(n, n);
        for ((a, _), &s) in self.rows.iter().zip(e.slacks.iter()) {
            g.axpy(1.0 / s, a, 1.0);
            h.ger(1.0 / (s * s), a, a, 1.0);
        }
        for (lmi, gi) in self.lmis.iter().zip(&e.inverses) {
            let active: Vec<usize> = (0..n).filter(|&i| !lmi.coeffs[i].entries.is_empty()).collect();
            for &i in &active {
                g[i] -= lmi.coeffs[i].trace_with(gi);
            }
            for (p, &i) in active.iter().enumerate() {
                for &j in &active[p..] {
                    let hij = trace_product(&lmi.coeffs[i], &lmi.coeffs[j], gi);
                    h[(i, j)] += hij;
                    if i != j {
                        h[(j, i)] += hij;
                    }
                }
            }
        }
        (g, h)
    }
}

/// `tr(G Fᵢ G Fⱼ)`.
fn trace_product(fi: &SparseSym, fj: &SparseSym, g: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for &(p, q, a) in &fi.entries {
        for &(r, s, b) in &fj.entries {
            acc += a * b * g[(q, r)] * g[(s, p)];
        }
    }
    acc
}

fn newton_direction(g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
    let neg = -g;
    if let Some(chol) = Cholesky::<f64, Dyn>::new(h.clone()) {
        return Some(chol.solve(&neg));
    }
    // Rank-deficient Hessian (a variable with no barrier curvature): regularize.
    let scale = h.diagonal().amax().max(1.0);
    let n = h.nrows();
    let reg = h + DMatrix::identity(n, n) * (1e-12 * scale);
    Cholesky::new(reg).map(|c| c.solve(&neg))
}

/// Runs the barrier method from a strictly feasible `x0`.
pub(crate) fn solve(problem: &Problem, x0: DVector<f64>, opts: &Options) -> Result<Solution, ConicError> {
    let m = problem.barrier_dim() as f64;
    let mut t = opts.t0;
    let mut x = x0;
    let mut current = problem
        .eval(&x, t)
        .ok_or(ConicError::Numerical("starting point is not strictly feasible"))?;
    let mut steps = 0usize;

    loop {
        // Centering. Past a few dozen steps the decrement is rounding noise.
        for _ in 0..CENTERING_CAP {
            if steps >= opts.max_newton {
                return Err(ConicError::ToleranceFailure { gap: m / t });
            }
            steps += 1;
            let (g, h) = problem.gradient_hessian(&x, t, &current);
            let Some(dx) = newton_direction(&g, h) else {
                return Err(ConicError::Numerical("singular Newton system"));
            };
            let decrement = -g.dot(&dx);
            if !decrement.is_finite() {
                return Err(ConicError::Numerical("non-finite Newton decrement"));
            }
            if decrement / 2.0 <= opts.center_tol {
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            while step > 1e-16 {
                let trial = &x + &dx * step;
                if let Some(e) = problem.eval(&trial, t) {
                    // Inside the quadratic-convergence region a feasible full step
                    // always decreases the barrier, and comparing values there is
                    // dominated by rounding.
                    if decrement < QUADRATIC_REGION || e.value <= current.value - 0.25 * step * decrement {
                        accepted = Some((trial, e));
                        break;
                    }
                }
                step *= 0.5;
            }
            let Some((next, e)) = accepted else {
                // No further progress is representable; treat as centered.
                break;
            };
            x = next;
            current = e;
            let objective = problem.c.dot(&x);
            if objective < -1e12 {
                return Err(ConicError::Unbounded);
            }
            if let Some(target) = opts.stop_below {
                if objective < target {
                    return Ok(finish(problem, x, t, &current));
                }
            }
        }
        if m / t < opts.gap_tol {
            return Ok(finish(problem, x, t, &current));
        }
        t *= opts.mu;
        current = problem
            .eval(&x, t)
            .ok_or(ConicError::Numerical("lost strict feasibility"))?;
    }
}

/// Row multipliers from the Newton system at `x`, which satisfy stationarity
/// exactly; the plain `1 / (t·s)` estimate does not when slacks are tiny.
fn finish(problem: &Problem, x: DVector<f64>, t: f64, e: &Eval) -> Solution {
    let (g, h) = problem.gradient_hessian(&x, t, e);
    let row_duals = match newton_direction(&g, h) {
        Some(dx) => DVector::from_iterator(
            problem.rows.len(),
            problem
                .rows
                .iter()
                .zip(e.slacks.iter())
                .map(|((a, _), &s)| ((1.0 + a.dot(&dx) / s) / (t * s)).max(0.0)),
        ),
        None => e.slacks.map(|s| 1.0 / (t * s)),
    };
    Solution { x, row_duals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn solves_a_box_lp() {
        // min -x - 2y, x + y <= 1, x,y >= 0
        let problem = Problem {
            c: DVector::from_vec(vec![-1.0, -2.0]),
            rows: vec![
                (DVector::from_vec(vec![1.0, 1.0]), 1.0),
                (DVector::from_vec(vec![-1.0, 0.0]), 0.0),
                (DVector::from_vec(vec![0.0, -1.0]), 0.0),
            ],
            lmis: vec![],
        };
        let sol = solve(&problem, DVector::from_vec(vec![0.25, 0.25]), &Options::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.row_duals[0], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn solves_a_two_by_two_lmi() {
        // max x s.t. [[1, x], [x, 1]] ⪰ 0  →  x = 1
        let mut f = SparseSym::default();
        f.push(0, 1, 1.0);
        let problem = Problem {
            c: DVector::from_vec(vec![-1.0]),
            rows: vec![],
            lmis: vec![Lmi {
                constant: DMatrix::identity(2, 2),
                coeffs: vec![f],
            }],
        };
        let sol = solve(&problem, DVector::from_vec(vec![0.0]), &Options::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rejects_infeasible_start() {
        let problem = Problem {
            c: DVector::from_vec(vec![1.0]),
            rows: vec![(DVector::from_vec(vec![1.0]), 0.0)],
            lmis: vec![],
        };
        assert!(solve(&problem, DVector::from_vec(vec![1.0]), &Options::default()).is_err());
    }
}
