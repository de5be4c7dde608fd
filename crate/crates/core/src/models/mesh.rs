//! Structured P1 triangulation of a rectangle and the associated
//! finite-element matrices.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::banded::BandMatrix;
use crate::scalar::Scalar;

pub type Point = [f64; 2];

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rectangle {
    pub const UNIT: Rectangle = Rectangle {
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
    };

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Maps `(s, t) ∈ [0, 1]²` into the rectangle.
    pub fn map_unit(&self, s: f64, t: f64) -> Point {
        [self.x0 + s * self.width(), self.y0 + t * self.height()]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let s: f64 = rng.random();
        let t: f64 = rng.random();
        self.map_unit(s, t)
    }
}

/// Nodes of the high-fidelity grid together with lumped quadrature weights.
#[derive(Clone, Debug)]
pub struct Grid {
    pub domain: Rectangle,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// `nx × ny` cells, each split along the `(i, j)–(i+1, j+1)` diagonal.
#[derive(Clone, Debug)]
pub struct StructuredMesh {
    pub domain: Rectangle,
    pub nx: usize,
    pub ny: usize,
}

impl StructuredMesh {
    pub fn new(domain: Rectangle, nx: usize, ny: usize) -> Self {
        assert!(nx >= 1 && ny >= 1, "mesh needs at least one cell per direction");
        Self { domain, nx, ny }
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn point(&self, idx: usize) -> Point {
        let i = idx % (self.nx + 1);
        let j = idx / (self.nx + 1);
        self.domain
            .map_unit(i as f64 / self.nx as f64, j as f64 / self.ny as f64)
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.num_nodes()).map(|k| self.point(k)).collect()
    }

    /// Half-bandwidth of every assembled matrix under the natural ordering.
    pub fn bandwidth(&self) -> usize {
        self.nx + 2
    }

    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx).flat_map(move |i| {
                let n00 = self.node(i, j);
                let n10 = self.node(i + 1, j);
                let n01 = self.node(i, j + 1);
                let n11 = self.node(i + 1, j + 1);
                [[n00, n10, n11], [n00, n11, n01]]
            })
        })
    }

    fn local(&self, tri: [usize; 3]) -> (f64, [[f64; 2]; 3]) {
        let p: Vec<Point> = tri.iter().map(|&k| self.point(k)).collect();
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grads = [
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
        ];
        (det.abs() / 2.0, grads)
    }

    /// Assembles `Σ_T local(area, grads)` into a dense matrix.
    fn assemble_dense(&self, local: impl Fn(f64, &[[f64; 2]; 3], usize, usize) -> f64) -> DMatrix<f64> {
        let n = self.num_nodes();
        let mut m = DMatrix::zeros(n, n);
        for tri in self.triangles() {
            let (area, grads) = self.local(tri);
            for a in 0..3 {
                for b in 0..3 {
                    m[(tri[a], tri[b])] += local(area, &grads, a, b);
                }
            }
        }
        m
    }

    /// Assembles into band storage with an arbitrary field.
    pub fn assemble_band<T: Scalar>(
        &self,
        local: impl Fn(f64, &[[f64; 2]; 3], usize, usize) -> T,
    ) -> BandMatrix<T> {
        let bw = self.bandwidth();
        let mut m = BandMatrix::zeros(self.num_nodes(), bw, bw);
        for tri in self.triangles() {
            let (area, grads) = self.local(tri);
            for a in 0..3 {
                for b in 0..3 {
                    m.add(tri[a], tri[b], local(area, &grads, a, b));
                }
            }
        }
        m
    }

    pub fn stiffness(&self) -> DMatrix<f64> {
        self.assemble_dense(stiffness_local)
    }

    pub fn mass(&self) -> DMatrix<f64> {
        self.assemble_dense(mass_local)
    }

    /// H¹ Gram matrix `∫ ∇u·∇v + u v`.
    pub fn h1_gram(&self) -> DMatrix<f64> {
        self.assemble_dense(|area, g, a, b| stiffness_local(area, g, a, b) + mass_local(area, g, a, b))
    }

    /// Row sums of the consistent mass matrix.
    pub fn lumped_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.num_nodes()];
        for tri in self.triangles() {
            let (area, _) = self.local(tri);
            for &k in &tri {
                w[k] += area / 3.0;
            }
        }
        w
    }

    pub fn grid(&self) -> Grid {
        Grid {
            domain: self.domain,
            points: self.points(),
            weights: self.lumped_weights(),
        }
    }

    /// Consistent load vector `M f` for a nodal interpolant of `f`.
    pub fn load<T: Scalar>(&self, f: impl Fn(Point) -> T) -> DVector<T> {
        let nodal: Vec<T> = (0..self.num_nodes()).map(|k| f(self.point(k))).collect();
        let mut out = DVector::from_element(self.num_nodes(), T::zero());
        for tri in self.triangles() {
            let (area, _) = self.local(tri);
            for a in 0..3 {
                for b in 0..3 {
                    let w = if a == b { area / 6.0 } else { area / 12.0 };
                    out[tri[a]] += nodal[tri[b]] * T::from_real(w);
                }
            }
        }
        out
    }

    /// Node indices on the edge `x = x0`.
    pub fn left_edge(&self) -> Vec<usize> {
        (0..=self.ny).map(|j| self.node(0, j)).collect()
    }
}

pub fn stiffness_local(area: f64, g: &[[f64; 2]; 3], a: usize, b: usize) -> f64 {
    area * (g[a][0] * g[b][0] + g[a][1] * g[b][1])
}

pub fn mass_local(area: f64, _g: &[[f64; 2]; 3], a: usize, b: usize) -> f64 {
    if a == b {
        area / 6.0
    } else {
        area / 12.0
    }
}

/// `∫ (β·∇φ_b) φ_a` for a constant velocity `β`.
pub fn advection_local(velocity: [f64; 2], area: f64, g: &[[f64; 2]; 3], _a: usize, b: usize) -> f64 {
    (velocity[0] * g[b][0] + velocity[1] * g[b][1]) * area / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_integrates_constants_and_stiffness_kills_them() {
        let mesh = StructuredMesh::new(Rectangle { x0: 0.0, x1: 2.0, y0: -1.0, y1: 0.5 }, 5, 3);
        let ones = DVector::from_element(mesh.num_nodes(), 1.0);
        let area = ones.dot(&(mesh.mass() * &ones));
        assert!((area - 3.0).abs() < 1e-12);
        assert!((mesh.stiffness() * &ones).amax() < 1e-12);
        let lumped: f64 = mesh.lumped_weights().iter().sum();
        assert!((lumped - 3.0).abs() < 1e-12);
    }

    #[test]
    fn stiffness_integrates_linear_gradient() {
        let mesh = StructuredMesh::new(Rectangle::UNIT, 4, 4);
        let x = DVector::from_fn(mesh.num_nodes(), |k, _| mesh.point(k)[0]);
        let energy = x.dot(&(mesh.stiffness() * &x));
        assert!((energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_assembly_matches_dense() {
        let mesh = StructuredMesh::new(Rectangle::UNIT, 3, 4);
        let band = mesh.assemble_band::<f64>(stiffness_local);
        let dense = mesh.stiffness();
        for i in 0..mesh.num_nodes() {
            for j in 0..mesh.num_nodes() {
                assert!((band.get(i, j) - dense[(i, j)]).abs() < 1e-14);
            }
        }
    }
}
