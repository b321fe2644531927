//! Damped least squares for small dense problems.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this
    /// fraction.
    pub rel_tol: f64,
    pub initial_damping: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tol: 1e-9,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Half the squared residual norm at each accepted iterate, starting
    /// with the initial point.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmResult {
    pub fn initial_objective(&self) -> f64 {
        self.objective_history[0]
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().expect("history starts non-empty")
    }
}

fn cost(r: &DVector<f64>) -> f64 {
    0.5 * r.norm_squared()
}

/// Minimise `0.5 * |r(p)|^2`. `residuals` returns `None` for infeasible
/// parameters, which are treated as a rejected step. `jacobian` returns the
/// `m x n` matrix of `dr_i / dp_j`.
pub fn levenberg_marquardt<R, J>(
    mut residuals: R,
    mut jacobian: J,
    p0: &[f64],
    opts: LmOptions,
) -> Option<LmResult>
where
    R: FnMut(&[f64]) -> Option<DVector<f64>>,
    J: FnMut(&[f64]) -> DMatrix<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = residuals(&p)?;
    let mut f = cost(&r);
    let mut history = vec![f];
    let mut lambda = opts.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if f <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        let jac = jacobian(&p);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
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
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            match residuals(&trial) {
                Some(rt) if cost(&rt) < f => {
                    let ft = cost(&rt);
                    let rel = (f - ft) / f;
                    p = trial;
                    r = rt;
                    f = ft;
                    history.push(f);
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    if rel < opts.rel_tol {
                        converged = true;
                    }
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        if !accepted {
            // no downhill step at any damping: stationary to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Some(LmResult {
        params: p,
        objective_history: history,
        iterations,
        converged,
    })
}

/// Central-difference Jacobian, used for the rate-constant fits whose model
/// is the simulated state machine itself.
pub fn numeric_jacobian<R>(mut residuals: R, p: &[f64], m: usize) -> DMatrix<f64>
where
    R: FnMut(&[f64]) -> Option<DVector<f64>>,
{
    let mut jac = DMatrix::zeros(m, p.len());
    for j in 0..p.len() {
        let h = 1e-6 * p[j].abs().max(1.0);
        let (mut up, mut dn) = (p.to_vec(), p.to_vec());
        up[j] += h;
        dn[j] -= h;
        if let (Some(a), Some(b)) = (residuals(&up), residuals(&dn)) {
            jac.set_column(j, &((a - b) / (2.0 * h)));
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let res = |p: &[f64]| Some(DVector::from_iterator(ts.len(), ts.iter().zip(&ys).map(|(t, y)| p[0] * (-p[1] * t).exp() - y)));
        let jac = |p: &[f64]| {
            let mut j = DMatrix::zeros(ts.len(), 2);
            for (i, t) in ts.iter().enumerate() {
                let e = (-p[1] * t).exp();
                j[(i, 0)] = e;
                j[(i, 1)] = -p[0] * t * e;
            }
            j
        };
        let out = levenberg_marquardt(res, jac, &[1.0, 0.1], LmOptions::default()).unwrap();
        assert!((out.params[0] - 3.0).abs() < 1e-8 && (out.params[1] - 0.7).abs() < 1e-8);
        assert!(out.objective_history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn numeric_jacobian_of_linear_map() {
        let res = |p: &[f64]| Some(DVector::from_vec(vec![2.0 * p[0] + p[1], -p[1]]));
        let j = numeric_jacobian(res, &[1.0, 2.0], 2);
        assert!((j[(0, 0)] - 2.0).abs() < 1e-8 && (j[(1, 1)] + 1.0).abs() < 1e-8);
    }
}
