//! Damped Gauss-Newton / Levenberg-Marquardt minimizer for nonlinear least
//! squares with an optional projection onto a feasible set.
//!
//! Minimizes `||r(x)||^2`. Steps solve `(J^T J + nu I) dx = -J^T r`; the
//! damping `nu` adapts through the gain ratio (actual versus predicted
//! decrease). Iterates are projected after each trial step, so box
//! constraints are handled by clamping.

use nalgebra::{DMatrix, DVector};

use crate::error::{BeamError, Result};

pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the euclidean norm of the objective gradient `2 J^T r`
    /// falls below this.
    pub gradient_tol: f64,
    /// Stop when the accepted step norm falls below this.
    pub step_tol: f64,
    /// Stop when the relative change of `||r||^2` across an accepted step
    /// falls below this.
    pub residual_change_tol: f64,
    /// Initial damping as a fraction of `max diag(J^T J)`.
    pub initial_damping: f64,
    /// Marquardt scaling: damp with `nu * diag(J^T J)` instead of `nu * I`.
    /// Keeps steps sane when parameter magnitudes span many decades.
    pub scale_damping: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            gradient_tol: 1e-8,
            step_tol: 1e-10,
            residual_change_tol: 0.0,
            initial_damping: 1e-3,
            scale_damping: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientSmall,
    StepSmall,
    ResidualStalled,
    MaxIterations,
}

pub struct LmOutcome {
    pub params: DVector<f64>,
    /// Final `||r||^2`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
}

pub fn minimize(
    init: DVector<f64>,
    residual: &mut dyn FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    jacobian: &mut dyn FnMut(&DVector<f64>) -> Result<DMatrix<f64>>,
    project: &dyn Fn(&mut DVector<f64>),
    opts: &LmOptions,
) -> Result<LmOutcome> {
    let mut x = init;
    project(&mut x);
    let mut r = residual(&x)?;
    let mut objective = r.norm_squared();
    let mut j = jacobian(&x)?;

    let mut nu = 0.0; // set from the first J^T J diagonal below
    let mut growth = 2.0;

    for iteration in 1..=opts.max_iterations {
        let jtj = j.transpose() * &j;
        let gradient = j.transpose() * &r; // objective gradient / 2
        if 2.0 * gradient.norm() < opts.gradient_tol {
            return Ok(LmOutcome {
                params: x,
                objective,
                iterations: iteration - 1,
                converged: true,
                stop: StopReason::GradientSmall,
            });
        }
        let max_diag = (0..jtj.nrows())
            .map(|i| jtj[(i, i)])
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        if nu == 0.0 {
            nu = if opts.scale_damping {
                opts.initial_damping
            } else {
                opts.initial_damping * max_diag
            };
        }

        // Try steps with increasing damping until one reduces the residual.
        let mut accepted = false;
        for _ in 0..50 {
            let mut damped = jtj.clone();
            for i in 0..damped.nrows() {
                damped[(i, i)] += if opts.scale_damping {
                    // Floor tiny diagonals so dead parameters stay damped.
                    nu * jtj[(i, i)].max(1e-12 * max_diag)
                } else {
                    nu
                };
            }
            let step = match nalgebra::Cholesky::new(damped) {
                Some(chol) => chol.solve(&(-&gradient)),
                None => {
                    nu *= growth;
                    growth *= 2.0;
                    continue;
                }
            };
            let mut candidate = &x + &step;
            project(&mut candidate);
            let actual_step = &candidate - &x;
            let r_new = residual(&candidate)?;
            let objective_new = r_new.norm_squared();

            // Gain ratio against the Gauss-Newton model decrease
            // -2 g.s - s'J'Js, evaluated on the projected step.
            let predicted =
                -2.0 * gradient.dot(&actual_step) - actual_step.dot(&(&jtj * &actual_step));
            let rho = if predicted > 0.0 {
                (objective - objective_new) / predicted
            } else if objective_new < objective {
                1.0
            } else {
                -1.0
            };

            if rho > 0.0 && objective_new <= objective {
                let step_norm = actual_step.norm();
                let rel_change = (objective - objective_new) / objective.max(f64::MIN_POSITIVE);
                x = candidate;
                r = r_new;
                objective = objective_new;
                nu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
                growth = 2.0;
                accepted = true;

                if step_norm < opts.step_tol * (x.norm() + opts.step_tol) {
                    return Ok(LmOutcome {
                        params: x,
                        objective,
                        iterations: iteration,
                        converged: true,
                        stop: StopReason::StepSmall,
                    });
                }
                if opts.residual_change_tol > 0.0 && rel_change < opts.residual_change_tol {
                    return Ok(LmOutcome {
                        params: x,
                        objective,
                        iterations: iteration,
                        converged: true,
                        stop: StopReason::ResidualStalled,
                    });
                }
                break;
            }
            nu *= growth;
            growth *= 2.0;
            if !nu.is_finite() {
                break;
            }
        }

        if !accepted {
            // Damping grew past any useful step size: the iterate is a
            // local minimum at floating-point resolution.
            return Ok(LmOutcome {
                params: x,
                objective,
                iterations: iteration,
                converged: true,
                stop: StopReason::ResidualStalled,
            });
        }
        j = jacobian(&x)?;
    }

    Ok(LmOutcome {
        params: x,
        objective,
        iterations: opts.max_iterations,
        converged: false,
        stop: StopReason::MaxIterations,
    })
}

/// Forward-difference Jacobian helper with one-sided steps pulled inward at
/// the given bounds.
pub fn finite_difference_jacobian(
    x: &DVector<f64>,
    base: &DVector<f64>,
    step: f64,
    bounds: Option<(&DVector<f64>, &DVector<f64>)>,
    f: &mut dyn FnMut(&DVector<f64>) -> Result<DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let n = x.len();
    let m = base.len();
    let mut jac = DMatrix::zeros(m, n);
    for i in 0..n {
        let mut h = step;
        if let Some((lo, hi)) = bounds {
            if x[i] + h > hi[i] {
                h = -step;
                if x[i] + h < lo[i] {
                    return Err(BeamError::invalid(format!(
                        "bounds too tight for finite differences at component {i}"
                    )));
                }
            }
        }
        let mut bumped = x.clone();
        bumped[i] += h;
        let fb = f(&bumped)?;
        jac.column_mut(i).copy_from(&(&fb - base).unscale(h));
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_a_small_nonlinear_fit() {
        // Fit y = a * exp(b * t) to exact data.
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let truth = (2.0, -0.7);
        let data: Vec<f64> = ts.iter().map(|t| truth.0 * (truth.1 * t).exp()).collect();
        let mut residual = |p: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_iterator(
                ts.len(),
                ts.iter()
                    .zip(&data)
                    .map(|(&t, &y)| p[0] * (p[1] * t).exp() - y),
            ))
        };
        let mut jacobian = |p: &DVector<f64>| -> Result<DMatrix<f64>> {
            let base = (|p: &DVector<f64>| -> Result<DVector<f64>> {
                Ok(DVector::from_iterator(
                    ts.len(),
                    ts.iter()
                        .zip(&data)
                        .map(|(&t, &y)| p[0] * (p[1] * t).exp() - y),
                ))
            })(p)?;
            let mut res = |q: &DVector<f64>| -> Result<DVector<f64>> {
                Ok(DVector::from_iterator(
                    ts.len(),
                    ts.iter()
                        .zip(&data)
                        .map(|(&t, &y)| q[0] * (q[1] * t).exp() - y),
                ))
            };
            finite_difference_jacobian(p, &base, 1e-7, None, &mut res)
        };
        let outcome = minimize(
            DVector::from_column_slice(&[1.0, 0.0]),
            &mut residual,
            &mut jacobian,
            &|_| {},
            &LmOptions::default(),
        )
        .unwrap();
        assert!(outcome.converged);
        assert_relative_eq!(outcome.params[0], truth.0, max_relative = 1e-6);
        assert_relative_eq!(outcome.params[1], truth.1, max_relative = 1e-6);
    }

    #[test]
    fn respects_projection() {
        // Minimize (x - 2)^2 constrained to x <= 1.
        let mut residual =
            |p: &DVector<f64>| -> Result<DVector<f64>> { Ok(DVector::from_element(1, p[0] - 2.0)) };
        let mut jacobian =
            |_: &DVector<f64>| -> Result<DMatrix<f64>> { Ok(DMatrix::from_element(1, 1, 1.0)) };
        let outcome = minimize(
            DVector::from_element(1, 0.0),
            &mut residual,
            &mut jacobian,
            &|p: &mut DVector<f64>| p[0] = p[0].min(1.0),
            &LmOptions::default(),
        )
        .unwrap();
        assert_relative_eq!(outcome.params[0], 1.0, max_relative = 1e-9);
    }

    #[test]
    fn finds_the_rosenbrock_minimum() {
        let mut residual = |p: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(DVector::from_column_slice(&[
                10.0 * (p[1] - p[0] * p[0]),
                1.0 - p[0],
            ]))
        };
        let mut jacobian = |p: &DVector<f64>| -> Result<DMatrix<f64>> {
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[-20.0 * p[0], 10.0, -1.0, 0.0],
            ))
        };
        let outcome = minimize(
            DVector::from_column_slice(&[-1.2, 1.0]),
            &mut residual,
            &mut jacobian,
            &|_| {},
            &LmOptions {
                max_iterations: 500,
                ..LmOptions::default()
            },
        )
        .unwrap();
        assert!(outcome.objective < 1e-12);
        assert_relative_eq!(outcome.params[0], 1.0, max_relative = 1e-6);
    }
}
