//! Damped Helmholtz problem with homogeneous Neumann conditions,
//!
//! ```text
//! −(1 + εi) Δu − (2πμ)² u = 10 exp(−‖x − p‖²)
//! ```
//!
//! posed on a planar rectangle. The source center `p` differs between the
//! best-knowledge model and the truth.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::mesh::{mass_local, stiffness_local, Point, Rectangle, StructuredMesh};
use super::{FieldSolution, ParameterDomain, ParametricModel};
use crate::error::{PbdwError, Result};

#[derive(Clone, Debug)]
pub struct Helmholtz {
    mesh: StructuredMesh,
    domain: ParameterDomain,
    pub damping: f64,
    pub source_bk: Point,
    pub source_true: Point,
}

impl Helmholtz {
    /// Slice of the acoustic cavity at the source height: domain
    /// `(−1.5, 1.5) × (0, 3)`, sources at `(0, 2)` and `(−0.02, 2.02)`,
    /// damping `ε = 10⁻²`, frequencies `μ ∈ [0.1, 0.5]`.
    pub fn new(grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(PbdwError::InvalidArgument("grid_n must be at least 2".into()));
        }
        let rect = Rectangle {
            x0: -1.5,
            x1: 1.5,
            y0: 0.0,
            y1: 3.0,
        };
        Ok(Self {
            mesh: StructuredMesh::new(rect, grid_n, grid_n),
            domain: ParameterDomain::new(vec![0.1], vec![0.5])?,
            damping: 1e-2,
            source_bk: [0.0, 2.0],
            source_true: [-0.02, 2.02],
        })
    }

    pub fn with_damping(mut self, damping: f64) -> Self {
        self.damping = damping;
        self
    }

    pub fn solve_with_source(&self, mu: f64, center: Point) -> Result<(nalgebra::DVector<Complex64>, f64)> {
        if !self.domain.contains(&[mu]) {
            log::warn!("frequency {mu} outside the best-knowledge domain");
        }
        let k2 = (2.0 * PI * mu).powi(2);
        let diffusion = Complex64::new(1.0, self.damping);
        let mesh = &self.mesh;
        let a = mesh.assemble_band::<Complex64>(|area, g, i, j| {
            diffusion * stiffness_local(area, g, i, j) - Complex64::from(k2 * mass_local(area, g, i, j))
        });
        let rhs = mesh.load(|x| {
            let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            Complex64::from(10.0 * (-d2).exp())
        });
        let lu = a.lu()?;
        if lu.pivot_ratio() > 1e10 {
            log::warn!(
                "Helmholtz system near resonance at mu = {mu} (pivot ratio {:.2e})",
                lu.pivot_ratio()
            );
        }
        let u = lu.solve(&rhs)?;
        let residual = (a.mul_vec(&u) - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
        Ok((u, residual))
    }
}

impl ParametricModel for Helmholtz {
    type Field = Complex64;

    fn parameter_domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    fn solve(&self, mu: &[f64], biased: bool) -> Result<FieldSolution<Complex64>> {
        if mu.len() != 1 {
            return Err(PbdwError::InvalidArgument(format!(
                "Helmholtz expects 1 parameter, got {}",
                mu.len()
            )));
        }
        let center = if biased { self.source_true } else { self.source_bk };
        let (state, residual) = self.solve_with_source(mu[0], center)?;
        Ok(FieldSolution {
            state,
            mu: mu.to_vec(),
            biased,
            residual,
        })
    }
}
