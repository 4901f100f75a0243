//! Damped Gauss-Newton (Levenberg-Marquardt) least squares with analytic
//! Jacobians and box projection.

use nalgebra::{DMatrix, DVector};

/// A nonlinear least-squares problem `min ½‖r(x)‖²`.
pub trait LeastSquaresProblem {
    fn residual_count(&self) -> usize;

    fn residuals(&self, x: &DVector<f64>, out: &mut DVector<f64>);

    /// `out[(i, j)] = ∂rᵢ/∂xⱼ`
    fn jacobian(&self, x: &DVector<f64>, out: &mut DMatrix<f64>);

    /// Maps a trial point back into the feasible set.
    fn project(&self, _x: &mut DVector<f64>) {}
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged when an accepted step changes ‖r‖² by less than this
    /// fraction.
    pub tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 200,
            tol: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: DVector<f64>,
    /// ‖r‖² after each accepted step, starting with the initial point.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmReport {
    pub fn cost(&self) -> f64 {
        *self.cost_history.last().expect("history starts with the initial cost")
    }
}

const MAX_DAMPING: f64 = 1e20;

pub fn minimize<P: LeastSquaresProblem>(problem: &P, x0: DVector<f64>, opts: &LmOptions) -> LmReport {
    let n = x0.len();
    let m = problem.residual_count();
    let mut x = x0;
    problem.project(&mut x);
    let mut r = DVector::zeros(m);
    let mut jac = DMatrix::zeros(m, n);
    problem.residuals(&x, &mut r);
    let mut cost = r.norm_squared();
    let mut history = vec![cost];
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    let mut trial_r = DVector::zeros(m);
    'outer: while iterations < opts.max_iter {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        problem.jacobian(&x, &mut jac);
        let jtj = jac.tr_mul(&jac);
        let g = jac.tr_mul(&r);
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();

        loop {
            let mut a = jtj.clone();
            for (i, d) in diag.iter().enumerate() {
                a[(i, i)] += lambda * d;
            }
            let step = match a.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => {
                    lambda *= 10.0;
                    if lambda > MAX_DAMPING {
                        break 'outer;
                    }
                    continue;
                }
            };
            let mut trial = &x + &step;
            problem.project(&mut trial);
            problem.residuals(&trial, &mut trial_r);
            let trial_cost = trial_r.norm_squared();
            if trial_cost.is_finite() && trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                x = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                history.push(cost);
                lambda = (lambda / 3.0).max(1e-12);
                if rel < opts.tol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > MAX_DAMPING {
                // No descent direction left at working precision: stationary.
                converged = true;
                break 'outer;
            }
        }
    }

    LmReport {
        x,
        cost_history: history,
        iterations,
        converged,
    }
}
