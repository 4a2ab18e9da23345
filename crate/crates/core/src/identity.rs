//! Approximating an unseen identity as a weighted sum of gallery vectors.
//!
//! The weights minimize the L1 distance `sum_i |sum_j W_j X_{j,i} - Y_i|`.
//! The absolute values are removed with one auxiliary variable per coordinate,
//! giving the linear program
//!
//! ```text
//! minimize    sum_i u_i
//! subject to  u_i >=  (sum_j W_j X_{j,i} - Y_i)
//!             u_i >= -(sum_j W_j X_{j,i} - Y_i)      i = 1..n
//! ```
//!
//! with `W` free (`u >= 0` is implied by each pair). The program is handed to
//! `microlp`'s simplex solver.

use microlp::{ComparisonOp, OptimizationDirection, Problem, SolutionStatus};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LadProblem {
    gallery: Vec<Vec<f64>>,
    target: Vec<f64>,
}

impl LadProblem {
    pub fn new(gallery: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        if gallery.is_empty() {
            return Err(Error::InvalidInput(
                "gallery must contain at least one vector".into(),
            ));
        }
        if target.is_empty() {
            return Err(Error::InvalidInput("target must not be empty".into()));
        }
        for (j, g) in gallery.iter().enumerate() {
            if g.len() != target.len() {
                return Err(Error::InvalidInput(format!(
                    "gallery vector {j} has {} elements, target has {}",
                    g.len(),
                    target.len()
                )));
            }
        }
        if gallery
            .iter()
            .flatten()
            .chain(&target)
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput("all values must be finite".into()));
        }
        Ok(LadProblem { gallery, target })
    }

    pub fn gallery(&self) -> &[Vec<f64>] {
        &self.gallery
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Gallery size `m`.
    pub fn members(&self) -> usize {
        self.gallery.len()
    }

    /// Vector dimension `n`.
    pub fn dimension(&self) -> usize {
        self.target.len()
    }

    /// `sum_j W_j X_j`.
    pub fn combine(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.dimension())
            .map(|i| {
                weights
                    .iter()
                    .zip(&self.gallery)
                    .map(|(w, g)| w * g[i])
                    .sum()
            })
            .collect()
    }

    /// `sum_i |sum_j W_j X_{j,i} - Y_i|`.
    pub fn l1_error(&self, weights: &[f64]) -> f64 {
        self.combine(weights)
            .iter()
            .zip(&self.target)
            .map(|(s, y)| (s - y).abs())
            .sum()
    }
}

/// A constraint `coefficients . x >= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

/// Minimization program over free variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn variables(&self) -> usize {
        self.objective.len()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest amount by which any constraint is violated at `x` (0 if feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.coefficients.iter().zip(x).map(|(a, v)| a * v).sum();
                (c.rhs - lhs).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Variables are ordered `u_0 .. u_{n-1}, W_0 .. W_{m-1}`; constraints come in
/// pairs per coordinate.
pub fn build_lad_program(problem: &LadProblem) -> LinearProgram {
    let (n, m) = (problem.dimension(), problem.members());
    let mut objective = vec![0.0; n + m];
    objective[..n].fill(1.0);
    let mut constraints = Vec::with_capacity(2 * n);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            // u_i - sign * sum_j W_j X_{j,i} >= -sign * Y_i
            let mut coefficients = vec![0.0; n + m];
            coefficients[i] = 1.0;
            for (j, g) in problem.gallery.iter().enumerate() {
                coefficients[n + j] = -sign * g[i];
            }
            constraints.push(Constraint {
                coefficients,
                rhs: -sign * problem.target[i],
            });
        }
    }
    LinearProgram {
        objective,
        constraints,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LadStatus {
    Optimal,
    /// Feasible, but the solver could not prove optimality.
    Feasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadSolution {
    pub weights: Vec<f64>,
    /// L1 residual of `weights`, recomputed from the problem data.
    pub objective: f64,
    /// Auxiliary variables `u_i` as returned by the solver.
    pub residuals: Vec<f64>,
    pub status: LadStatus,
}

pub fn solve_lad(problem: &LadProblem) -> Result<LadSolution> {
    let program = build_lad_program(problem);
    let n = problem.dimension();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    // u >= 0 follows from each constraint pair; stating it as a bound keeps
    // the simplex from stalling on degenerate instances (e.g. n = 1, m = 3).
    let vars: Vec<_> = program
        .objective
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let lower = if i < n { 0.0 } else { f64::NEG_INFINITY };
            lp.add_var(c, (lower, f64::INFINITY))
        })
        .collect();
    for c in &program.constraints {
        let terms: Vec<_> = vars
            .iter()
            .zip(&c.coefficients)
            .filter(|(_, &a)| a != 0.0)
            .map(|(&v, &a)| (v, a))
            .collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, c.rhs);
    }
    let solution = lp
        .solve()
        .map_err(|e| Error::Solver(format!("{e} (m = {}, n = {n})", problem.members())))?
        .into_solution()
        .map_err(|e| Error::Solver(format!("solve interrupted: {e:?}")))?;
    let status = match solution.status() {
        SolutionStatus::Optimal => LadStatus::Optimal,
        _ => LadStatus::Feasible,
    };
    let values: Vec<f64> = vars.iter().map(|&v| solution.var_value(v)).collect();
    let weights = values[n..].to_vec();
    Ok(LadSolution {
        objective: problem.l1_error(&weights),
        residuals: values[..n].to_vec(),
        weights,
        status,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Approximation {
    pub weights: Vec<f64>,
    /// `sum_j W_j X_j`.
    pub synthesized: Vec<f64>,
    pub objective: f64,
    pub status: LadStatus,
}

pub fn approximate_identity(gallery: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Approximation> {
    let problem = LadProblem::new(gallery, target)?;
    let solution = solve_lad(&problem)?;
    Ok(Approximation {
        synthesized: problem.combine(&solution.weights),
        weights: solution.weights,
        objective: solution.objective,
        status: solution.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(gallery: Vec<Vec<f64>>, target: Vec<f64>) -> (LadProblem, LadSolution) {
        let p = LadProblem::new(gallery, target).unwrap();
        let s = solve_lad(&p).unwrap();
        (p, s)
    }

    fn assert_feasible(p: &LadProblem, s: &LadSolution) {
        let program = build_lad_program(p);
        let x: Vec<f64> = s.residuals.iter().chain(&s.weights).copied().collect();
        assert!(
            program.max_violation(&x) <= 1e-8,
            "{}",
            program.max_violation(&x)
        );
        let residual = p.combine(&s.weights);
        for ((u, r), y) in s.residuals.iter().zip(&residual).zip(p.target()) {
            assert!(*u >= (r - y).abs() - 1e-8);
        }
        assert!((s.objective - p.l1_error(&s.weights)).abs() < 1e-8);
    }

    #[test]
    fn program_shape() {
        let p = LadProblem::new(vec![vec![1.0, 2.0]], vec![3.0, 4.0]).unwrap();
        let lp = build_lad_program(&p);
        assert_eq!(lp.variables(), 3);
        assert_eq!(lp.constraints.len(), 4);
        // u = |residual| at W = 1: residuals (-2, -2).
        let x = [2.0, 2.0, 1.0];
        assert_eq!(lp.max_violation(&x), 0.0);
        assert_eq!(lp.objective_value(&x), 4.0);
        assert!(lp.max_violation(&[1.0, 2.0, 1.0]) > 0.0);
    }

    #[test]
    fn zero_target_is_solved_by_zero() {
        let p = LadProblem::new(vec![vec![1.0, -2.0], vec![0.5, 3.0]], vec![0.0, 0.0]).unwrap();
        let lp = build_lad_program(&p);
        assert_eq!(lp.max_violation(&[0.0; 4]), 0.0);
        let s = solve_lad(&p).unwrap();
        assert!(s.objective < 1e-9);
        assert_eq!(s.status, LadStatus::Optimal);
    }

    #[test]
    fn exact_member() {
        let (p, s) = solve(vec![vec![0.2, -1.5, 3.0]], vec![0.2, -1.5, 3.0]);
        assert!((s.weights[0] - 1.0).abs() < 1e-9);
        assert!(s.objective < 1e-9);
        assert_feasible(&p, &s);
    }

    #[test]
    fn basis_expansion() {
        let (p, s) = solve(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.3, 0.7]);
        assert!((s.weights[0] - 0.3).abs() < 1e-9);
        assert!((s.weights[1] - 0.7).abs() < 1e-9);
        assert!(s.objective < 1e-9);
        assert_feasible(&p, &s);
    }

    #[test]
    fn non_unique_optimum_matches_grid_search() {
        let (p, s) = solve(vec![vec![1.0, 1.0]], vec![0.0, 1.0]);
        let grid_best = (-2000..=2000)
            .map(|i| p.l1_error(&[i as f64 * 1e-3]))
            .fold(f64::INFINITY, f64::min);
        assert!((grid_best - 1.0).abs() < 1e-12);
        assert!((s.objective - 1.0).abs() < 1e-6);
        assert!((-1e-9..=1.0 + 1e-9).contains(&s.weights[0]));
    }

    #[test]
    fn orthonormal_span_has_zero_error() {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let gallery = vec![vec![s2, s2, 0.0], vec![s2, -s2, 0.0]];
        let target = vec![1.0, -3.0, 0.0];
        let a = approximate_identity(gallery, target.clone()).unwrap();
        assert!(a.objective < 1e-9);
        for (x, y) in a.synthesized.iter().zip(&target) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_problems() {
        assert!(LadProblem::new(vec![], vec![1.0]).is_err());
        assert!(LadProblem::new(vec![vec![1.0]], vec![]).is_err());
        assert!(LadProblem::new(vec![vec![1.0, 2.0]], vec![1.0]).is_err());
        assert!(LadProblem::new(vec![vec![f64::NAN]], vec![1.0]).is_err());
    }

    #[test]
    fn zero_objective_iff_target_in_span() {
        let gallery = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        let inside = LadProblem::new(gallery.clone(), vec![2.0, -1.0, 1.0]).unwrap();
        assert!(solve_lad(&inside).unwrap().objective < 1e-9);
        // (0, 0, 1) needs W = (0, 0) for the first two coordinates.
        let outside = LadProblem::new(gallery, vec![0.0, 0.0, 1.0]).unwrap();
        assert!(solve_lad(&outside).unwrap().objective > 1e-3);
    }

    fn random_problem(seed: u64, m: usize, n: usize) -> LadProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gallery = (0..m)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let target = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        LadProblem::new(gallery, target).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permutation_and_scaling_invariance(seed: u64, m in 1usize..5, n in 1usize..8, s in 0.25f64..4.0) {
            let p = random_problem(seed, m, n);
            let base = solve_lad(&p).unwrap();
            assert_feasible(&p, &base);

            let mut reversed = p.gallery().to_vec();
            reversed.reverse();
            let rev = solve_lad(&LadProblem::new(reversed, p.target().to_vec()).unwrap()).unwrap();
            prop_assert!((rev.objective - base.objective).abs() < 1e-6);

            let mut scaled = p.gallery().to_vec();
            for v in &mut scaled[0] {
                *v *= s;
            }
            let sp = LadProblem::new(scaled, p.target().to_vec()).unwrap();
            let sc = solve_lad(&sp).unwrap();
            prop_assert!((sc.objective - base.objective).abs() < 1e-6);
            // The rescaled base weights are optimal for the scaled problem.
            let mut w = base.weights.clone();
            w[0] /= s;
            prop_assert!((sp.l1_error(&w) - base.objective).abs() < 1e-9);
        }
    }
}
