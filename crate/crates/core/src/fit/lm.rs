//! Levenberg-Marquardt with additive damping on the normal equations.
//!
//! Each step solves `(JᵀJ + λI) δ = Jᵀr`. The system is Jacobi-scaled before
//! the Cholesky factorization; this changes only the conditioning, not the
//! step. λ starts at 1e-3 and is divided by ten after an accepted step and
//! multiplied by ten after a rejected one.

use nalgebra::{DMatrix, DVector};

use super::{FitOptions, Model};

const INITIAL_DAMPING: f64 = 1e-3;
const MIN_DAMPING: f64 = 1e-20;
const MAX_DAMPING: f64 = 1e20;

#[derive(Debug, Clone)]
pub(super) struct Outcome {
    pub x: Vec<f64>,
    pub sse: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Returns `None` when the residuals at `x0` are not finite.
pub(super) fn minimize(model: &Model<'_>, mut x: Vec<f64>, options: &FitOptions) -> Option<Outcome> {
    let n = model.ds.n_rows();
    let k = x.len();
    let mut r = vec![0.0; n];
    let mut jac = model.empty_jacobian();
    let mut sse = model.jacobian_into(&x, &mut r, &mut jac);
    if !sse.is_finite() {
        return None;
    }
    if k == 0 {
        return Some(Outcome {
            x,
            sse,
            iterations: 0,
            converged: true,
        });
    }

    let mut lambda = INITIAL_DAMPING;
    let mut trial_r = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < options.max_iterations {
        if sse == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let (normal, gradient) = normal_equations(&jac, &r, k);

        // scale-free gradient test: cosine between r and each column of J
        let rnorm = sse.sqrt();
        let cosine = (0..k)
            .map(|j| {
                let cn = normal[(j, j)].sqrt();
                if cn > 0.0 {
                    gradient[j].abs() / (cn * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if cosine <= options.gradient_tol {
            converged = true;
            break;
        }

        let scale: Vec<f64> = (0..k)
            .map(|j| {
                let d = normal[(j, j)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();

        loop {
            let Some(step) = damped_step(&normal, &gradient, &scale, lambda) else {
                lambda *= 10.0;
                if lambda > MAX_DAMPING {
                    break 'outer;
                }
                continue;
            };
            let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
            let small_step = step_norm <= options.step_tol * (xnorm + options.step_tol);
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let trial_sse = model.residuals_into(&trial, &mut trial_r);
            // Σ(r² - r'²) row by row resolves reductions far below the
            // rounding of a large sse
            let reduction: f64 = r.iter().zip(&trial_r).map(|(a, b)| (a - b) * (a + b)).sum();
            if trial_sse.is_finite() && reduction > 0.0 {
                x = trial;
                sse = model.jacobian_into(&x, &mut r, &mut jac);
                lambda = (lambda / 10.0).max(MIN_DAMPING);
                if small_step {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if small_step {
                // no representable improvement left
                converged = true;
                break 'outer;
            }
            lambda *= 10.0;
            if lambda > MAX_DAMPING {
                break 'outer;
            }
        }
    }
    Some(Outcome {
        x,
        sse,
        iterations,
        converged,
    })
}

fn normal_equations(jac: &super::SparseJacobian, r: &[f64], k: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut normal = DMatrix::<f64>::zeros(k, k);
    let mut gradient = DVector::<f64>::zeros(k);
    for (i, &ri) in r.iter().enumerate() {
        let (cols, vals) = jac.row(i);
        for (a, (&ca, &va)) in cols.iter().zip(vals).enumerate() {
            if va == 0.0 {
                continue;
            }
            gradient[ca] += va * ri;
            for (&cb, &vb) in cols[a..].iter().zip(&vals[a..]) {
                normal[(ca, cb)] += va * vb;
            }
        }
    }
    // rows were accumulated into one triangle per (ca, cb) order; symmetrize
    for a in 0..k {
        for b in (a + 1)..k {
            let s = normal[(a, b)] + normal[(b, a)];
            normal[(a, b)] = s;
            normal[(b, a)] = s;
        }
    }
    (normal, gradient)
}

fn damped_step(normal: &DMatrix<f64>, gradient: &DVector<f64>, scale: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let k = scale.len();
    let mut m = DMatrix::<f64>::from_fn(k, k, |i, j| normal[(i, j)] * scale[i] * scale[j]);
    for j in 0..k {
        m[(j, j)] += lambda * scale[j] * scale[j];
    }
    let rhs = DVector::<f64>::from_fn(k, |i, _| gradient[i] * scale[i]);
    let chol = m.cholesky()?;
    let y = chol.solve(&rhs);
    let step: Vec<f64> = (0..k).map(|j| y[j] * scale[j]).collect();
    step.iter().all(|v| v.is_finite()).then_some(step)
}
