//! Measurement-noise statistics: mean, covariance, and whitener.
//!
//! The noise mean is estimated from undamaged-case observations against the
//! model's undamaged prediction (it absorbs the systematic model bias); the
//! covariance averages per-damage-case sample covariances, with a diagonal
//! jitter that keeps it invertible when samples are few.

use nalgebra::{DMatrix, DVector};

use crate::error::{BeamError, Result};
use crate::modal::ModalObservation;

/// Gaussian noise model with a symmetric whitener `S` satisfying
/// `S^T S = Sigma^-1`.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    whitener: DMatrix<f64>,
    sqrt_covariance: DMatrix<f64>,
}

impl NoiseModel {
    /// Builds the model from an already-jittered covariance. The whitener is
    /// the symmetric inverse square root.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if covariance.nrows() != dim || covariance.ncols() != dim {
            return Err(BeamError::DimensionMismatch {
                context: "NoiseModel covariance".into(),
                expected: dim,
                actual: covariance.nrows(),
            });
        }
        let symmetric = (&covariance + covariance.transpose()).scale(0.5);
        let eig = nalgebra::SymmetricEigen::try_new(symmetric.clone(), f64::EPSILON, 0)
            .ok_or_else(|| BeamError::numerical("covariance eigendecomposition failed"))?;
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(BeamError::numerical(format!(
                "noise covariance is not positive definite (min eigenvalue {:.3e})",
                eig.eigenvalues.min()
            )));
        }
        let v = &eig.eigenvectors;
        let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
        let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt()));
        let whitener = v * inv_sqrt * v.transpose();
        let sqrt_covariance = v * sqrt * v.transpose();

        // S^T S Sigma must be the identity.
        let check = whitener.transpose() * &whitener * &symmetric;
        let max_dev = (&check - DMatrix::identity(dim, dim)).amax();
        if max_dev > 1e-8 {
            return Err(BeamError::numerical(format!(
                "whitener verification failed: |S^T S Sigma - I| = {max_dev:.3e}"
            )));
        }
        Ok(NoiseModel {
            mean,
            covariance: symmetric,
            whitener,
            sqrt_covariance,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Symmetric `Sigma^-1/2`.
    pub fn whitener(&self) -> &DMatrix<f64> {
        &self.whitener
    }

    /// Symmetric `Sigma^1/2`, for drawing noise samples.
    pub fn sqrt_covariance(&self) -> &DMatrix<f64> {
        &self.sqrt_covariance
    }
}

/// Relative diagonal jitter added to estimated covariances: per-case sample
/// covariances from a handful of observations are singular without it.
pub const DEFAULT_JITTER_TAU: f64 = 1e-3;

/// Sample mean of the undamaged observations minus the model's undamaged
/// prediction. Needs at least two observations.
pub fn estimate_noise_mean(
    undamaged: &[ModalObservation],
    prediction: &ModalObservation,
) -> Result<DVector<f64>> {
    if undamaged.len() < 2 {
        return Err(BeamError::invalid(format!(
            "noise mean needs at least 2 undamaged observations, got {}",
            undamaged.len()
        )));
    }
    let dim = prediction.len();
    let mut mean = DVector::zeros(dim);
    for obs in undamaged {
        if obs.len() != dim {
            return Err(BeamError::DimensionMismatch {
                context: "estimate_noise_mean".into(),
                expected: dim,
                actual: obs.len(),
            });
        }
        mean += obs.entries();
    }
    mean /= undamaged.len() as f64;
    Ok(mean - prediction.entries())
}

/// Mean over damage-case groups of the per-group unbiased sample
/// covariances, plus diagonal jitter `tau * (trace/dim) * I` (the scale
/// falls back to 1 when the sample covariance is identically zero).
pub fn estimate_noise_cov(groups: &[Vec<ModalObservation>], jitter_tau: f64) -> Result<DMatrix<f64>> {
    if groups.is_empty() {
        return Err(BeamError::invalid("no observation groups given"));
    }
    let dim = groups[0]
        .first()
        .ok_or_else(|| BeamError::invalid("empty observation group"))?
        .len();
    let mut averaged = DMatrix::zeros(dim, dim);
    for (g, group) in groups.iter().enumerate() {
        if group.len() < 2 {
            return Err(BeamError::invalid(format!(
                "group {g} has {} observations; at least 2 are required",
                group.len()
            )));
        }
        let mut mean = DVector::zeros(dim);
        for obs in group {
            if obs.len() != dim {
                return Err(BeamError::DimensionMismatch {
                    context: format!("estimate_noise_cov group {g}"),
                    expected: dim,
                    actual: obs.len(),
                });
            }
            mean += obs.entries();
        }
        mean /= group.len() as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for obs in group {
            let centered = obs.entries() - &mean;
            cov += &centered * centered.transpose();
        }
        cov /= (group.len() - 1) as f64;
        averaged += cov;
    }
    averaged /= groups.len() as f64;

    let mut scale = averaged.trace() / dim as f64;
    if scale <= 0.0 {
        scale = 1.0;
    }
    for i in 0..dim {
        averaged[(i, i)] += jitter_tau * scale;
    }
    Ok(averaged)
}

/// Convenience: noise model from grouped observations. The first group must
/// be the undamaged case (used for the mean).
pub fn estimate_noise_model(
    groups: &[Vec<ModalObservation>],
    prediction: &ModalObservation,
    jitter_tau: f64,
) -> Result<NoiseModel> {
    let mean = estimate_noise_mean(
        groups
            .first()
            .ok_or_else(|| BeamError::invalid("no observation groups given"))?,
        prediction,
    )?;
    let covariance = estimate_noise_cov(groups, jitter_tau)?;
    NoiseModel::new(mean, covariance)
}
