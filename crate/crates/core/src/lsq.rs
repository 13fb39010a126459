//! Dense Levenberg–Marquardt for the small problems in this crate
//! (coordinate refinement, Gaussian and exponential fits).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    /// Residual vector at `x`. The cost is its squared norm.
    fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iterations: usize,
    /// Stop when the max-norm of the cost gradient falls below this.
    pub gradient_tol: f64,
    /// Stop when an accepted step is shorter than this (parameter units).
    pub step_tol: f64,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tol: 1e-10,
            step_tol: 1e-6,
            cost_tol: 0.0,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Step,
    Cost,
    /// Damping grew without finding a descent step; the point is stationary to
    /// machine precision.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: DVector<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Cost after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    /// Condition number of `J^T J` at the solution (infinite when singular).
    pub condition_number: f64,
    /// Numerical rank of `J^T J`.
    pub rank: usize,
}

pub fn levenberg_marquardt<P: LeastSquaresProblem>(
    problem: &P,
    x0: DVector<f64>,
    config: &LmConfig,
) -> Result<LmReport> {
    let n = problem.n_params();
    if x0.len() != n {
        return Err(Error::InvalidParameter(format!(
            "expected {n} parameters, got {}",
            x0.len()
        )));
    }
    let mut x = x0;
    let mut r = problem.residuals(&x)?;
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = config.initial_damping;
    let mut termination = None;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let j = problem.jacobian(&x)?;
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if n == 0 || 2.0 * g.amax() < config.gradient_tol {
            termination = Some(Termination::Gradient);
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = &x + &step;
            let r_trial = match problem.residuals(&trial) {
                Ok(v) => v,
                Err(_) => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial_cost = r_trial.norm_squared();
            if trial_cost.is_finite() && trial_cost <= cost {
                let step_norm = step.norm();
                let reduction = cost - trial_cost;
                x = trial;
                r = r_trial;
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step_norm < config.step_tol {
                    termination = Some(Termination::Step);
                } else if reduction <= config.cost_tol * (cost + reduction) {
                    termination = Some(Termination::Cost);
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            termination = Some(Termination::Stalled);
        }
        if termination.is_some() {
            break;
        }
    }

    let Some(termination) = termination else {
        return Err(Error::NonConvergence { iterations, residual: cost });
    };
    let (condition_number, rank) = if n == 0 {
        (1.0, 0)
    } else {
        let j = problem.jacobian(&x)?;
        conditioning(&(j.transpose() * &j))
    };
    Ok(LmReport {
        x,
        cost,
        iterations,
        termination,
        cost_history: history,
        condition_number,
        rank,
    })
}

/// Condition number and numerical rank of a symmetric positive semidefinite matrix.
pub fn conditioning(m: &DMatrix<f64>) -> (f64, usize) {
    let eig = m.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    if max == 0.0 {
        return (f64::INFINITY, 0);
    }
    let cutoff = max * 1e-10;
    let rank = eig.eigenvalues.iter().filter(|v| v.abs() > cutoff).count();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, |a, b| a.min(b.abs()));
    let cond = if rank < m.nrows() { f64::INFINITY } else { max / min };
    (cond, rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LeastSquaresProblem for Rosenbrock {
        fn n_params(&self) -> usize {
            2
        }
        fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(DVector::from_vec(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]))
        }
        fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(2, 2, &[-20.0 * x[0], 10.0, -1.0, 0.0]))
        }
    }

    #[test]
    fn rosenbrock_minimum() {
        let cfg = LmConfig { step_tol: 1e-12, ..Default::default() };
        let rep = levenberg_marquardt(&Rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &cfg).unwrap();
        assert!((rep.x[0] - 1.0).abs() < 1e-6 && (rep.x[1] - 1.0).abs() < 1e-6);
        assert!(rep.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(rep.rank, 2);
    }

    #[test]
    fn iteration_cap_reports_nonconvergence() {
        let cfg = LmConfig { max_iterations: 2, step_tol: 0.0, gradient_tol: 0.0, ..Default::default() };
        let err = levenberg_marquardt(&Rosenbrock, DVector::from_vec(vec![-1.2, 1.0]), &cfg).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }
}
