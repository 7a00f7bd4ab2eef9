//! Damage identification and uncertainty quantification for a vibrating
//! cantilever beam.
//!
//! The library covers the full workflow from raw (simulated or recorded)
//! accelerometer time series to probability densities over localized
//! stiffness damage:
//!
//! - [`fem`]: Euler-Bernoulli cantilever finite elements with per-element
//!   stiffness reduction as the damage model.
//! - [`integrate`]: implicit-midpoint time stepping of the damped beam ODE.
//! - [`modal`]: generalized eigensolver and the modal forward map
//!   (frequencies + observable mode shapes).
//! - [`sim`]: synthetic measurement-set generation with randomized
//!   excitation, thermal drift, and additive sensor noise.
//! - [`modal_id`]: frequency-domain identification of damped harmonic
//!   oscillators from measured time series.
//! - [`noise`]: measurement-noise mean/covariance estimation and whitening.
//! - [`enkf`]: dual-model ensemble Kalman smoother for joint state and
//!   parameter estimation over time windows.
//! - [`regularize`]: MAP damage estimation with a truncated-Gaussian prior,
//!   solved by projected Levenberg-Marquardt.
//! - [`sacom`]: sample-based measure-theoretic inversion onto a
//!   three-parameter Gaussian damage family.
//! - [`pipeline`]: file formats, stage orchestration, and run manifests
//!   backing the `beamuq` CLI.

pub mod config;
pub mod enkf;
pub mod error;
pub mod fem;
pub mod integrate;
mod lm;
pub mod modal;
pub mod modal_id;
pub mod noise;
pub mod pipeline;
pub mod regularize;
pub mod rng;
pub mod sacom;
pub mod sim;

pub use config::BeamConfig;
pub use error::{BeamError, Result};
pub use fem::{assemble_system, BeamSystem, DamageVector};
pub use modal::ModalObservation;
