//! Steady advection–diffusion on the unit square:
//!
//! ```text
//! −Δu + b(μ)·∇u = x₁x₂ + g₁      in (0,1)²
//!             u = 4x₂(1−x₂)(1+g₂) on {0}×(0,1)
//!          ∂ₙu = 0               elsewhere
//! ```
//!
//! with `b(μ) = μ₁ [cos μ₂, sin μ₂]`. The best-knowledge model has `g = 0`;
//! the biased truth uses `g₁ = 0.2x₁²`, `g₂ = 0.1 sin(2πx₂)`.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::mesh::{advection_local, stiffness_local, Point, Rectangle, StructuredMesh};
use super::{FieldSolution, ParameterDomain, ParametricModel};
use crate::error::{PbdwError, Result};

#[derive(Clone, Debug)]
pub struct AdvectionDiffusion {
    mesh: StructuredMesh,
    domain: ParameterDomain,
}

pub fn bias_source(x: Point) -> f64 {
    0.2 * x[0] * x[0]
}

pub fn bias_inflow(x: Point) -> f64 {
    0.1 * (2.0 * PI * x[1]).sin()
}

impl AdvectionDiffusion {
    /// Model on an `n × n` grid over `𝒫 = [0.1, 10] × [0, π/4]`.
    pub fn new(grid_n: usize) -> Result<Self> {
        if grid_n < 2 {
            return Err(PbdwError::InvalidArgument("grid_n must be at least 2".into()));
        }
        Ok(Self {
            mesh: StructuredMesh::new(Rectangle::UNIT, grid_n, grid_n),
            domain: ParameterDomain::new(vec![0.1, 0.0], vec![10.0, PI / 4.0])?,
        })
    }

    /// Solve with explicit perturbation terms `g₁` (source) and `g₂` (inflow).
    pub fn solve_with(
        &self,
        mu: &[f64],
        g1: impl Fn(Point) -> f64,
        g2: impl Fn(Point) -> f64,
    ) -> Result<DVector<f64>> {
        Ok(self.solve_impl(mu, g1, g2)?.0)
    }

    fn solve_impl(
        &self,
        mu: &[f64],
        g1: impl Fn(Point) -> f64,
        g2: impl Fn(Point) -> f64,
    ) -> Result<(DVector<f64>, f64)> {
        if mu.len() != 2 {
            return Err(PbdwError::InvalidArgument(format!(
                "advection-diffusion expects 2 parameters, got {}",
                mu.len()
            )));
        }
        if !self.domain.contains(mu) {
            log::warn!("parameter {mu:?} outside the best-knowledge domain");
        }
        let velocity = [mu[0] * mu[1].cos(), mu[0] * mu[1].sin()];
        let mesh = &self.mesh;
        let mut a = mesh.assemble_band::<f64>(|area, g, i, j| {
            stiffness_local(area, g, i, j) + advection_local(velocity, area, g, i, j)
        });
        let mut rhs = mesh.load(|x| x[0] * x[1] + g1(x));
        for k in mesh.left_edge() {
            let x = mesh.point(k);
            a.set_identity_row(k);
            rhs[k] = 4.0 * x[1] * (1.0 - x[1]) * (1.0 + g2(x));
        }
        let u = a.lu()?.solve(&rhs)?;
        let residual = (a.mul_vec(&u) - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
        Ok((u, residual))
    }
}

impl ParametricModel for AdvectionDiffusion {
    type Field = f64;

    fn parameter_domain(&self) -> &ParameterDomain {
        &self.domain
    }

    fn mesh(&self) -> &StructuredMesh {
        &self.mesh
    }

    fn solve(&self, mu: &[f64], biased: bool) -> Result<FieldSolution<f64>> {
        let (state, residual) = if biased {
            self.solve_impl(mu, bias_source, bias_inflow)?
        } else {
            self.solve_impl(mu, |_| 0.0, |_| 0.0)?
        };
        Ok(FieldSolution {
            state,
            mu: mu.to_vec(),
            biased,
            residual,
        })
    }
}
