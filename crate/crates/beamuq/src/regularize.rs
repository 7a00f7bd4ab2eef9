//! MAP damage estimation with a truncated-Gaussian prior.
//!
//! Minimizes `||S (m - f(d) - mu)||^2 + ||d||^2 / lambda^2` over the box
//! `[0, 1)^N` with projected Levenberg-Marquardt. The whitener `S` and the
//! noise mean `mu` come from the estimated noise model; `f` is the modal
//! forward map on the inversion mesh.

use nalgebra::{DMatrix, DVector};

use crate::error::{BeamError, Result};
use crate::fem::{BeamSystem, DamageVector};
use crate::lm;
use crate::modal::{forward_map, ModalObservation};
use crate::noise::NoiseModel;

/// Upper box bound: damage may approach but never reach 1.
pub const DAMAGE_UPPER_BOUND: f64 = 1.0 - 1e-9;

/// Finite-difference step for the data-misfit Jacobian.
pub const JACOBIAN_STEP: f64 = 1e-6;

/// One MAP estimation problem on a fixed inversion mesh.
pub struct MapProblem<'a> {
    pub system: &'a BeamSystem,
    pub measurement: &'a ModalObservation,
    pub noise: &'a NoiseModel,
    /// Prior scale; larger means weaker regularization.
    pub lambda: f64,
    pub initial: DamageVector,
    /// Levenberg-Marquardt iteration cap.
    pub max_iterations: usize,
}

impl<'a> MapProblem<'a> {
    /// Problem with the default zero initial iterate (the prior mode).
    pub fn new(
        system: &'a BeamSystem,
        measurement: &'a ModalObservation,
        noise: &'a NoiseModel,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(BeamError::invalid(format!(
                "prior scale lambda must be positive, got {lambda}"
            )));
        }
        let expected = measurement.len();
        if noise.dim() != expected {
            return Err(BeamError::DimensionMismatch {
                context: "MapProblem noise model".into(),
                expected,
                actual: noise.dim(),
            });
        }
        Ok(MapProblem {
            system,
            measurement,
            noise,
            lambda,
            initial: DamageVector::zeros(system.element_count()),
            max_iterations: 200,
        })
    }

    fn mode_count(&self) -> usize {
        self.measurement.mode_count()
    }

    /// Whitened data misfit `S (m - f(d) - mu)`.
    fn whitened_misfit(&self, d: &DamageVector) -> Result<DVector<f64>> {
        let predicted = forward_map(self.system, d, self.mode_count())?;
        let residual = self.measurement.entries() - predicted.entries() - self.noise.mean();
        Ok(self.noise.whitener() * residual)
    }
}

fn in_bounds(d: &DVector<f64>) -> bool {
    d.iter().all(|&v| (0.0..1.0).contains(&v))
}

/// The MAP objective; infinite outside the box (zero prior density there).
pub fn map_objective(d: &DVector<f64>, problem: &MapProblem) -> f64 {
    if !in_bounds(d) {
        return f64::INFINITY;
    }
    let damage = DamageVector::new(d.clone()).expect("bounds checked");
    match problem.whitened_misfit(&damage) {
        Ok(misfit) => misfit.norm_squared() + d.norm_squared() / (problem.lambda * problem.lambda),
        // The forward map cannot fail inside the box; treat a failure as an
        // infinite barrier so the optimizer retreats.
        Err(_) => f64::INFINITY,
    }
}

/// Forward-difference Jacobian of the whitened prediction `S f(d)`, with
/// one-sided inward steps at the box bounds.
pub fn map_jacobian(d: &DVector<f64>, problem: &MapProblem) -> Result<DMatrix<f64>> {
    if !in_bounds(d) {
        return Err(BeamError::invalid("jacobian requested outside the damage box"));
    }
    let n = d.len();
    let lo = DVector::zeros(n);
    let hi = DVector::from_element(n, DAMAGE_UPPER_BOUND);
    let mut whitened_prediction = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let damage = DamageVector::new(x.clone()).map_err(|_| {
            BeamError::invalid("finite-difference step left the damage box")
        })?;
        let predicted = forward_map(problem.system, &damage, problem.mode_count())?;
        Ok(problem.noise.whitener() * predicted.entries())
    };
    let base = whitened_prediction(d)?;
    lm::finite_difference_jacobian(
        d,
        &base,
        JACOBIAN_STEP,
        Some((&lo, &hi)),
        &mut whitened_prediction,
    )
}

/// Solver diagnostics reported alongside the MAP estimate.
#[derive(Debug, Clone)]
pub struct MapDiagnostics {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    /// Indices of components that ended on the box boundary.
    pub active_bounds: Vec<usize>,
}

/// Solves the MAP problem by projected Levenberg-Marquardt on the stacked
/// residual `(S (m - f(d) - mu); d / lambda)`.
pub fn solve_map(problem: &MapProblem) -> Result<(DamageVector, MapDiagnostics)> {
    let n = problem.system.element_count();
    let lambda_inv = 1.0 / problem.lambda;

    let mut residual = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let damage = DamageVector::new(x.clone())
            .map_err(|_| BeamError::invalid("iterate escaped the damage box"))?;
        let misfit = problem.whitened_misfit(&damage)?;
        let mut stacked = DVector::zeros(misfit.len() + n);
        stacked.rows_mut(0, misfit.len()).copy_from(&misfit);
        stacked
            .rows_mut(misfit.len(), n)
            .copy_from(&x.scale(lambda_inv));
        Ok(stacked)
    };

    let mut jacobian = |x: &DVector<f64>| -> Result<DMatrix<f64>> {
        let data_jac = map_jacobian(x, problem)?;
        let m = data_jac.nrows();
        let mut stacked = DMatrix::zeros(m + n, n);
        // Misfit rows carry -S df/dd; prior rows carry I / lambda.
        stacked.view_mut((0, 0), (m, n)).copy_from(&(-&data_jac));
        for i in 0..n {
            stacked[(m + i, i)] = lambda_inv;
        }
        Ok(stacked)
    };

    let project = |x: &mut DVector<f64>| {
        for v in x.iter_mut() {
            *v = v.clamp(0.0, DAMAGE_UPPER_BOUND);
        }
    };

    let opts = lm::LmOptions {
        max_iterations: problem.max_iterations,
        gradient_tol: 1e-8,
        step_tol: 1e-10,
        residual_change_tol: 0.0,
        initial_damping: 1e-3,
        scale_damping: false,
    };
    let outcome = lm::minimize(
        problem.initial.as_vector().clone(),
        &mut residual,
        &mut jacobian,
        &project,
        &opts,
    )?;

    let active_bounds = outcome
        .params
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= 0.0 || v >= DAMAGE_UPPER_BOUND)
        .map(|(i, _)| i)
        .collect();
    let diagnostics = MapDiagnostics {
        iterations: outcome.iterations,
        objective: outcome.objective,
        converged: outcome.converged,
        active_bounds,
    };
    Ok((DamageVector::new(outcome.params)?, diagnostics))
}

/// Element-wise statistics over a family of reconstructions.
#[derive(Debug, Clone)]
pub struct ElementStatistics {
    pub min: Vec<f64>,
    pub mean: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn reconstruction_statistics(reconstructions: &[DamageVector]) -> Result<ElementStatistics> {
    let first = reconstructions
        .first()
        .ok_or_else(|| BeamError::invalid("no reconstructions given"))?;
    let n = first.len();
    let mut min = vec![f64::INFINITY; n];
    let mut mean = vec![0.0; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for rec in reconstructions {
        if rec.len() != n {
            return Err(BeamError::DimensionMismatch {
                context: "reconstruction_statistics".into(),
                expected: n,
                actual: rec.len(),
            });
        }
        for (i, &v) in rec.as_vector().iter().enumerate() {
            min[i] = min[i].min(v);
            mean[i] += v;
            max[i] = max[i].max(v);
        }
    }
    for v in &mut mean {
        *v /= reconstructions.len() as f64;
    }
    Ok(ElementStatistics { min, mean, max })
}
