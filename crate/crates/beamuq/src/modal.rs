//! Modal frequencies, mode shapes, and the modal forward map.
//!
//! Solves the generalized symmetric-definite eigenproblem
//! `K(d) v = omega^2 M v` by reducing it to a standard symmetric problem
//! through the Cholesky factor of M, and builds the stacked
//! (frequency, observable shape) vector used by the frequency-domain
//! inversion methods. All sizes here are dense (2N <= 200).

use nalgebra::DVector;

use crate::error::{BeamError, Result};
use crate::fem::{BeamSystem, DamageVector};

/// Stacked modal data `(omega_1, B v_1, ..., omega_n, B v_n)`.
///
/// Frequencies are strictly increasing and positive, each observable shape
/// block has unit Euclidean norm, and the component at the sensor closest
/// to the free end is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalObservation {
    entries: DVector<f64>,
    mode_count: usize,
    sensor_count: usize,
}

impl ModalObservation {
    pub fn new(entries: DVector<f64>, mode_count: usize, sensor_count: usize) -> Result<Self> {
        let expected = mode_count * (sensor_count + 1);
        if entries.len() != expected {
            return Err(BeamError::DimensionMismatch {
                context: "ModalObservation".into(),
                expected,
                actual: entries.len(),
            });
        }
        Ok(ModalObservation {
            entries,
            mode_count,
            sensor_count,
        })
    }

    pub fn entries(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn sensor_count(&self) -> usize {
        self.sensor_count
    }

    /// Angular frequency of mode `i` (zero-based).
    pub fn frequency(&self, i: usize) -> f64 {
        self.entries[i * (self.sensor_count + 1)]
    }

    /// Observable shape block of mode `i`.
    pub fn shape(&self, i: usize) -> DVector<f64> {
        let start = i * (self.sensor_count + 1) + 1;
        self.entries.rows(start, self.sensor_count).into_owned()
    }

    /// Checks the layout invariants (increasing positive frequencies,
    /// unit-norm shape blocks, non-negative free-end component).
    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for i in 0..self.mode_count {
            let omega = self.frequency(i);
            if !(omega > prev) {
                return Err(BeamError::invalid(format!(
                    "modal frequencies must be strictly increasing and positive (mode {i}: {omega})"
                )));
            }
            prev = omega;
            let shape = self.shape(i);
            let norm = shape.norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(BeamError::invalid(format!(
                    "observable shape {i} has norm {norm}, expected 1"
                )));
            }
            if shape[self.sensor_count - 1] < -1e-9 {
                return Err(BeamError::invalid(format!(
                    "observable shape {i} violates the free-end sign convention"
                )));
            }
        }
        Ok(())
    }
}

/// The `n` smallest eigenpairs of `K(d) v = omega^2 M v`, sorted by
/// ascending frequency.
///
/// The problem is reduced to standard symmetric form through the Cholesky
/// factor of K(d): with `K = R R^T`, the pencil becomes
/// `(R^-1 M R^-T) w = omega^-2 w`, so the sought smallest frequencies are
/// the *largest* eigenvalues of a well-conditioned symmetric matrix and are
/// resolved to near machine precision. Shapes are normalized in the K(d)
/// inner product.
pub fn solve_modes(
    system: &BeamSystem,
    damage: &DamageVector,
    n: usize,
) -> Result<Vec<(f64, DVector<f64>)>> {
    let ndof = system.dof_count();
    if n == 0 || n > ndof {
        return Err(BeamError::invalid(format!(
            "mode count {n} outside 1..={ndof}"
        )));
    }
    let k = system.damaged_stiffness(damage)?;
    let chol = nalgebra::Cholesky::new(k).ok_or_else(|| {
        BeamError::numerical("damaged stiffness is not positive definite")
    })?;
    let r = chol.l();

    // C = R^-1 M R^-T, symmetrized against rounding.
    let a = r
        .solve_lower_triangular(system.mass())
        .ok_or_else(|| BeamError::numerical("singular stiffness Cholesky factor"))?;
    let b = r
        .solve_lower_triangular(&a.transpose())
        .ok_or_else(|| BeamError::numerical("singular stiffness Cholesky factor"))?;
    let c = (&b + b.transpose()).scale(0.5);

    let eig = nalgebra::SymmetricEigen::try_new(c, f64::EPSILON, 0).ok_or_else(|| {
        BeamError::numerical(format!(
            "symmetric eigensolver failed to converge (size {ndof})"
        ))
    })?;

    let mut order: Vec<usize> = (0..ndof).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut modes = Vec::with_capacity(n);
    for &idx in order.iter().take(n) {
        let theta = eig.eigenvalues[idx];
        if theta <= 0.0 {
            return Err(BeamError::numerical(format!(
                "non-positive eigenvalue {theta} encountered; mass matrix lost definiteness"
            )));
        }
        let w = eig.eigenvectors.column(idx).into_owned();
        let shape = r
            .tr_solve_lower_triangular(&w)
            .ok_or_else(|| BeamError::numerical("singular stiffness Cholesky factor"))?;
        modes.push((theta.sqrt().recip(), shape));
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(modes)
}

/// Projects a mode shape to sensor space and normalizes it: unit Euclidean
/// norm, sign chosen so the component at the sensor closest to the free end
/// is non-negative.
pub fn normalize_observable(shape: &DVector<f64>, system: &BeamSystem) -> Result<DVector<f64>> {
    let observed = system.observation() * shape;
    let norm = observed.norm();
    if norm == 0.0 {
        return Err(BeamError::UnobservableMode);
    }
    let mut normalized = observed.unscale(norm);
    if normalized[normalized.len() - 1] < 0.0 {
        normalized.neg_mut();
    }
    Ok(normalized)
}

/// The modal forward map: the `n` smallest frequencies with their
/// normalized observable shapes, stacked per the [`ModalObservation`]
/// layout.
pub fn forward_map(system: &BeamSystem, damage: &DamageVector, n: usize) -> Result<ModalObservation> {
    let modes = solve_modes(system, damage, n)?;
    let p = system.config().sensor_count();
    let mut entries = DVector::zeros(n * (p + 1));
    for (i, (omega, shape)) in modes.iter().enumerate() {
        let observable = normalize_observable(shape, system)?;
        let base = i * (p + 1);
        entries[base] = *omega;
        entries.rows_mut(base + 1, p).copy_from(&observable);
    }
    ModalObservation::new(entries, n, p)
}
