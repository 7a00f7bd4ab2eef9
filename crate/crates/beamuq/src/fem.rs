//! Euler-Bernoulli cantilever finite elements.
//!
//! Cubic Hermite (C^1) elements on a uniform mesh, clamped at the left end.
//! The clamped displacement and rotation DOFs are eliminated by row/column
//! removal, so all global matrices have size 2N x 2N for N elements.
//! Damage is a per-element stiffness reduction: K(d) = sum_i (1 - d_i) K_i.

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::config::BeamConfig;
use crate::error::{BeamError, Result};

/// Element-wise stiffness reductions, each in [0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DamageVector(DVector<f64>);

impl DamageVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, &d) in values.iter().enumerate() {
            if !(0.0..1.0).contains(&d) {
                return Err(BeamError::invalid(format!(
                    "damage component {i} = {d} outside [0, 1)"
                )));
            }
        }
        Ok(DamageVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn zeros(n: usize) -> Self {
        DamageVector(DVector::zeros(n))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, value))
    }

    /// Damage concentrated in a single element (zero-based index).
    pub fn single(n: usize, element: usize, value: f64) -> Result<Self> {
        if element >= n {
            return Err(BeamError::invalid(format!(
                "element index {element} out of range for {n} elements"
            )));
        }
        let mut v = DVector::zeros(n);
        v[element] = value;
        Self::new(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

/// One element's reference-EI stiffness block with its global DOF map.
///
/// `dofs[k] == None` marks a clamped (eliminated) local DOF; the first
/// element's left node is clamped.
#[derive(Debug, Clone)]
pub struct ElementStiffness {
    pub local: Matrix4<f64>,
    pub dofs: [Option<usize>; 4],
}

impl ElementStiffness {
    /// Adds `scale * local` into the global matrix.
    pub fn add_to(&self, global: &mut DMatrix<f64>, scale: f64) {
        for (a, ga) in self.dofs.iter().enumerate() {
            let Some(ga) = ga else { continue };
            for (b, gb) in self.dofs.iter().enumerate() {
                let Some(gb) = gb else { continue };
                global[(*ga, *gb)] += scale * self.local[(a, b)];
            }
        }
    }
}

/// Assembled cantilever system: mass, element stiffness blocks, and the
/// sensor observation matrix. Immutable after assembly; all methods are
/// pure and safe to call from many threads.
#[derive(Debug, Clone)]
pub struct BeamSystem {
    config: BeamConfig,
    mass: DMatrix<f64>,
    elements: Vec<ElementStiffness>,
    stiffness: DMatrix<f64>,
    observation: DMatrix<f64>,
}

/// Local mass and stiffness matrices of one Hermite beam element, in
/// `(value, slope, value, slope)` ordering.
///
/// Closed forms of the consistent matrices; validated against a quadrature
/// oracle in the tests.
pub fn hermite_element_matrices(h: f64, mu: f64, ei: f64) -> Result<(Matrix4<f64>, Matrix4<f64>)> {
    if !(h > 0.0) || !(mu > 0.0) || !(ei > 0.0) {
        return Err(BeamError::invalid(format!(
            "element matrices need h, mu, EI > 0 (got h={h}, mu={mu}, EI={ei})"
        )));
    }
    let m = mu * h / 420.0;
    #[rustfmt::skip]
    let mass = Matrix4::new(
        156.0 * m,       22.0 * h * m,    54.0 * m,       -13.0 * h * m,
        22.0 * h * m,    4.0 * h * h * m, 13.0 * h * m,   -3.0 * h * h * m,
        54.0 * m,        13.0 * h * m,    156.0 * m,      -22.0 * h * m,
        -13.0 * h * m,  -3.0 * h * h * m, -22.0 * h * m,   4.0 * h * h * m,
    );
    let k = ei / (h * h * h);
    #[rustfmt::skip]
    let stiffness = Matrix4::new(
        12.0 * k,       6.0 * h * k,     -12.0 * k,       6.0 * h * k,
        6.0 * h * k,    4.0 * h * h * k, -6.0 * h * k,    2.0 * h * h * k,
        -12.0 * k,     -6.0 * h * k,      12.0 * k,      -6.0 * h * k,
        6.0 * h * k,    2.0 * h * h * k, -6.0 * h * k,    4.0 * h * h * k,
    );
    Ok((mass, stiffness))
}

/// Hermite shape function values at local coordinate `xi` in [0, 1], with
/// slope DOFs scaled by the element length `h`.
fn hermite_shapes(xi: f64, h: f64) -> [f64; 4] {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        h * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        h * (xi3 - xi2),
    ]
}

/// Global DOF index of a node's value/slope pair, or `None` for the clamped
/// node 0. Nodes are numbered 0..=N left to right.
fn node_dofs(node: usize) -> [Option<usize>; 2] {
    if node == 0 {
        [None, None]
    } else {
        [Some(2 * (node - 1)), Some(2 * node - 1)]
    }
}

/// Assembles the global system for a validated configuration.
pub fn assemble_system(config: BeamConfig) -> Result<BeamSystem> {
    config.validate()?;
    let n = config.elements;
    let ndof = 2 * n;
    let h = config.element_length();
    let (local_mass, local_stiffness) = hermite_element_matrices(h, config.mu, config.ei)?;

    let mut mass = DMatrix::zeros(ndof, ndof);
    let mut elements = Vec::with_capacity(n);
    for e in 0..n {
        let [lv, ls] = node_dofs(e);
        let [rv, rs] = node_dofs(e + 1);
        let element = ElementStiffness {
            local: local_stiffness,
            dofs: [lv, ls, rv, rs],
        };
        // Scatter the mass block with the same index map.
        let mass_block = ElementStiffness {
            local: local_mass,
            dofs: element.dofs,
        };
        mass_block.add_to(&mut mass, 1.0);
        elements.push(element);
    }

    let mut stiffness = DMatrix::zeros(ndof, ndof);
    for element in &elements {
        element.add_to(&mut stiffness, 1.0);
    }

    let mut observation = DMatrix::zeros(config.sensor_count(), ndof);
    for (s, &x) in config.sensors.iter().enumerate() {
        let e = ((x / h).floor() as usize).min(n - 1);
        let xi = (x - e as f64 * h) / h;
        let shapes = hermite_shapes(xi, h);
        let [lv, ls] = node_dofs(e);
        let [rv, rs] = node_dofs(e + 1);
        for (value, dof) in shapes.iter().zip([lv, ls, rv, rs]) {
            if let Some(dof) = dof {
                observation[(s, dof)] += value;
            }
        }
    }

    Ok(BeamSystem {
        config,
        mass,
        elements,
        stiffness,
        observation,
    })
}

impl BeamSystem {
    pub fn config(&self) -> &BeamConfig {
        &self.config
    }

    /// Number of free DOFs, 2N.
    pub fn dof_count(&self) -> usize {
        self.mass.nrows()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Undamaged stiffness, the sum of all element blocks.
    pub fn stiffness_undamaged(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn elements(&self) -> &[ElementStiffness] {
        &self.elements
    }

    /// Sensor observation matrix B (p x 2N); each row interpolates the
    /// displacement at one sensor.
    pub fn observation(&self) -> &DMatrix<f64> {
        &self.observation
    }

    /// K(d) = sum_i (1 - d_i) K_i.
    pub fn damaged_stiffness(&self, damage: &DamageVector) -> Result<DMatrix<f64>> {
        self.damaged_stiffness_scaled(damage, 1.0)
    }

    /// `ei_scale * sum_i (1 - d_i) K_i`, used when the flexural rigidity is
    /// itself an unknown multiplying the reference-EI element blocks.
    pub fn damaged_stiffness_scaled(
        &self,
        damage: &DamageVector,
        ei_scale: f64,
    ) -> Result<DMatrix<f64>> {
        if damage.len() != self.elements.len() {
            return Err(BeamError::DimensionMismatch {
                context: "damaged_stiffness".into(),
                expected: self.elements.len(),
                actual: damage.len(),
            });
        }
        if !(ei_scale > 0.0) {
            return Err(BeamError::invalid(format!(
                "EI scale must be positive, got {ei_scale}"
            )));
        }
        let ndof = self.dof_count();
        let mut k = DMatrix::zeros(ndof, ndof);
        for (element, &d) in self.elements.iter().zip(damage.as_vector().iter()) {
            element.add_to(&mut k, ei_scale * (1.0 - d));
        }
        Ok(k)
    }

    /// Midpoint coordinate of each element.
    pub fn element_midpoints(&self) -> Vec<f64> {
        let h = self.config.element_length();
        (0..self.elements.len())
            .map(|i| (i as f64 + 0.5) * h)
            .collect()
    }

    /// Zero-based index of the element containing coordinate `x`.
    pub fn element_containing(&self, x: f64) -> usize {
        let h = self.config.element_length();
        ((x / h).floor() as usize).min(self.elements.len() - 1)
    }

    /// Global index of the free-end displacement DOF.
    pub fn tip_value_dof(&self) -> usize {
        self.dof_count() - 2
    }

    /// Global index of the free-end rotation DOF.
    pub fn tip_rotation_dof(&self) -> usize {
        self.dof_count() - 1
    }
}
