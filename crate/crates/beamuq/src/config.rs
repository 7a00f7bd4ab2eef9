//! Beam configuration: geometry, material constants, damping, and sensors.

use serde::{Deserialize, Serialize};

use crate::error::{BeamError, Result};

/// Physical and discretization parameters of one cantilever beam model.
///
/// The beam is clamped at `x = 0` and free at `x = length`. Hermite degrees
/// of freedom are ordered `(value, slope)` per node, nodes left to right,
/// with the two clamped DOFs at `x = 0` eliminated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeamConfig {
    /// Beam length L in meters.
    pub length: f64,
    /// Flexural rigidity EI in N*m^2.
    pub ei: f64,
    /// Mass density per unit length in kg/m.
    pub mu: f64,
    /// Number of uniform elements N.
    pub elements: usize,
    /// Mass-proportional damping coefficient (1/s).
    pub alpha: f64,
    /// Stiffness-proportional damping coefficient (s).
    pub beta: f64,
    /// Sensor coordinates, strictly increasing, each in (0, L].
    pub sensors: Vec<f64>,
}

impl BeamConfig {
    /// Nominal simulation beam: L = 1.4 m, EI = 131.25 N*m^2,
    /// mu = 2.3 kg/m, 100 elements, alpha = 0.15, beta = 2e-5,
    /// seven uniformly spaced sensors including the free end.
    pub fn nominal_simulation() -> Self {
        Self::with_uniform_sensors(1.4, 131.25, 2.3, 100, 0.15, 2e-5, 7)
    }

    /// A beam with `p` sensors at `s * L / p`, `s = 1..=p`.
    ///
    /// The exact experimental sensor coordinates are not recoverable from
    /// the published description; this uniform layout (free end included)
    /// is the documented default and can be overridden via `sensors`.
    pub fn with_uniform_sensors(
        length: f64,
        ei: f64,
        mu: f64,
        elements: usize,
        alpha: f64,
        beta: f64,
        sensor_count: usize,
    ) -> Self {
        let sensors = (1..=sensor_count)
            .map(|s| s as f64 * length / sensor_count as f64)
            .collect();
        BeamConfig {
            length,
            ei,
            mu,
            elements,
            alpha,
            beta,
            sensors,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(BeamError::invalid("beam length must be positive"));
        }
        if !(self.ei > 0.0) {
            return Err(BeamError::invalid("flexural rigidity EI must be positive"));
        }
        if !(self.mu > 0.0) {
            return Err(BeamError::invalid("mass density mu must be positive"));
        }
        if self.elements < 2 {
            return Err(BeamError::invalid("element count must be at least 2"));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(BeamError::invalid("damping parameters must be non-negative"));
        }
        if self.sensors.is_empty() {
            return Err(BeamError::invalid("at least one sensor is required"));
        }
        if self.sensors.len() >= self.elements {
            return Err(BeamError::invalid(format!(
                "sensor count {} must be smaller than element count {}",
                self.sensors.len(),
                self.elements
            )));
        }
        let mut prev = 0.0;
        for &x in &self.sensors {
            if !(x > prev) {
                return Err(BeamError::invalid(
                    "sensor positions must be strictly increasing and positive",
                ));
            }
            if x > self.length {
                return Err(BeamError::invalid(format!(
                    "sensor position {x} lies outside (0, {}]",
                    self.length
                )));
            }
            prev = x;
        }
        Ok(())
    }

    /// Uniform element length h = L / N.
    pub fn element_length(&self) -> f64 {
        self.length / self.elements as f64
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    /// Same beam rescaled to a new length; sensors follow their material
    /// points, i.e. scale proportionally.
    pub fn rescaled_length(&self, new_length: f64) -> Self {
        let ratio = new_length / self.length;
        let mut cfg = self.clone();
        cfg.length = new_length;
        for x in &mut cfg.sensors {
            *x *= ratio;
        }
        cfg
    }
}
