//! Uniform P1 meshes on an interval or a rectangle, with element quadrature.
//!
//! 1D meshes are subdivided intervals. 2D meshes are structured rectangles
//! where every cell is split into two triangles along the diagonal from the
//! lower-left to the upper-right corner. Nodes are numbered x-fastest, so in
//! 1D the node index is also the position along the axis.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, Vec2};

/// Uniform mesh request: extents and cell counts per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    pub dim: usize,
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

impl MeshSpec {
    pub fn interval(length: f64, cells: usize) -> Self {
        Self {
            dim: 1,
            extent: vec![length],
            cells: vec![cells],
        }
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        Self {
            dim: 2,
            extent: vec![lx, ly],
            cells: vec![nx, ny],
        }
    }

    /// Same domain with every cell count doubled.
    pub fn refined(&self) -> Self {
        Self {
            dim: self.dim,
            extent: self.extent.clone(),
            cells: self.cells.iter().map(|c| 2 * c).collect(),
        }
    }
}

/// Reference-element quadrature in barycentric coordinates.
///
/// The weights sum to the reference measure (1 for the unit interval, 1/2 for
/// the unit triangle).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
    pub reference_measure: f64,
}

impl QuadratureRule {
    /// Two-point Gauss–Legendre on the unit interval (exact to degree 3).
    pub fn gauss2_interval() -> Self {
        let d = 0.5 / math::sqrt(3.0);
        let xi = [0.5 - d, 0.5 + d];
        Self {
            points: xi.iter().map(|&s| [1.0 - s, s, 0.0]).collect(),
            weights: vec![0.5, 0.5],
            degree: 3,
            reference_measure: 1.0,
        }
    }

    /// Edge-midpoint rule on the unit triangle (exact to degree 2).
    pub fn edge_midpoint_triangle() -> Self {
        Self {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 6.0; 3],
            degree: 2,
            reference_measure: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ElementGeometry {
    measure: f64,
    grads: [Vec2; 3],
}

/// One quadrature point of one element, in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint<'a> {
    pub x: Vec2,
    /// Physical quadrature weight (reference weight scaled by the Jacobian).
    pub weight: f64,
    /// Values of the element's P1 basis functions at `x`.
    pub basis: &'a [f64],
    /// Gradients of the element's P1 basis functions (constant per element).
    pub grads: &'a [Vec2],
}

/// A uniform P1 mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    extent: [f64; 2],
    cells: [usize; 2],
    nodes: Vec<Vec2>,
    elements: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    geometry: Vec<ElementGeometry>,
    quadrature: QuadratureRule,
}

impl Mesh {
    pub fn build(spec: &MeshSpec) -> Result<Self> {
        if spec.dim != 1 && spec.dim != 2 {
            return Err(Error::config(format!("mesh dim must be 1 or 2, got {}", spec.dim)));
        }
        if spec.extent.len() != spec.dim || spec.cells.len() != spec.dim {
            return Err(Error::config(format!(
                "mesh needs {} extents and cell counts, got {} and {}",
                spec.dim,
                spec.extent.len(),
                spec.cells.len()
            )));
        }
        for (axis, (&l, &n)) in spec.extent.iter().zip(&spec.cells).enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::config(format!("mesh extent on axis {axis} must be positive, got {l}")));
            }
            if n < 2 {
                return Err(Error::config(format!("mesh needs at least 2 cells on axis {axis}, got {n}")));
            }
        }
        Ok(if spec.dim == 1 {
            Self::build_interval(spec.extent[0], spec.cells[0])
        } else {
            Self::build_rectangle(spec.extent[0], spec.extent[1], spec.cells[0], spec.cells[1])
        })
    }

    fn build_interval(length: f64, n: usize) -> Self {
        let nodes: Vec<Vec2> = (0..=n)
            .map(|i| [if i == n { length } else { i as f64 * length / n as f64 }, 0.0])
            .collect();
        let elements: Vec<[usize; 3]> = (0..n).map(|i| [i, i + 1, usize::MAX]).collect();
        let geometry = elements
            .iter()
            .map(|e| {
                let he = nodes[e[1]][0] - nodes[e[0]][0];
                ElementGeometry {
                    measure: he,
                    grads: [[-1.0 / he, 0.0], [1.0 / he, 0.0], [0.0, 0.0]],
                }
            })
            .collect();
        Self {
            dim: 1,
            extent: [length, 0.0],
            cells: [n, 0],
            nodes,
            elements,
            boundary_nodes: vec![0, n],
            geometry,
            quadrature: QuadratureRule::gauss2_interval(),
        }
    }

    fn build_rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Self {
        let coord = |i: usize, n: usize, l: f64| if i == n { l } else { i as f64 * l / n as f64 };
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        let mut boundary_nodes = Vec::new();
        for j in 0..=ny {
            for i in 0..=nx {
                if i == 0 || i == nx || j == 0 || j == ny {
                    boundary_nodes.push(nodes.len());
                }
                nodes.push([coord(i, nx, lx), coord(j, ny, ly)]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
                elements.push([n00, n10, n11]);
                elements.push([n00, n11, n01]);
            }
        }
        let geometry = elements
            .iter()
            .map(|e| triangle_geometry(nodes[e[0]], nodes[e[1]], nodes[e[2]]))
            .collect();
        Self {
            dim: 2,
            extent: [lx, ly],
            cells: [nx, ny],
            nodes,
            elements,
            boundary_nodes,
            geometry,
            quadrature: QuadratureRule::edge_midpoint_triangle(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Extent of Ω along `axis`.
    pub fn extent(&self, axis: usize) -> f64 {
        self.extent[axis]
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    /// Uniform spacing along `axis`.
    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    /// |Ω|.
    pub fn domain_measure(&self) -> f64 {
        if self.dim == 1 {
            self.extent[0]
        } else {
            self.extent[0] * self.extent[1]
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    /// Vertices per element: 2 in 1D, 3 in 2D.
    pub fn nodes_per_element(&self) -> usize {
        self.dim + 1
    }

    /// Vertex indices of element `e`.
    pub fn element(&self, e: usize) -> &[usize] {
        &self.elements[e][..self.nodes_per_element()]
    }

    pub fn element_measure(&self, e: usize) -> f64 {
        self.geometry[e].measure
    }

    pub fn element_centroid(&self, e: usize) -> Vec2 {
        let verts = self.element(e);
        let k = verts.len() as f64;
        let mut c = [0.0; 2];
        for &v in verts {
            c[0] += self.nodes[v][0] / k;
            c[1] += self.nodes[v][1] / k;
        }
        c
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    /// Calls `visit` at every quadrature point of element `e`.
    pub fn for_each_quad_point(&self, e: usize, mut visit: impl FnMut(&QuadPoint<'_>)) {
        let nv = self.nodes_per_element();
        let verts = self.element(e);
        let geo = &self.geometry[e];
        let scale = geo.measure / self.quadrature.reference_measure;
        for (bary, &w) in self.quadrature.points.iter().zip(&self.quadrature.weights) {
            let mut x = [0.0; 2];
            for (j, &v) in verts.iter().enumerate() {
                x[0] += bary[j] * self.nodes[v][0];
                x[1] += bary[j] * self.nodes[v][1];
            }
            visit(&QuadPoint {
                x,
                weight: w * scale,
                basis: &bary[..nv],
                grads: &geo.grads[..nv],
            });
        }
    }

    /// Quadrature approximation of `∫_e integrand`.
    ///
    /// Fails with [`Error::Numeric`] if the integrand is non-finite at any
    /// quadrature point.
    pub fn element_integrate(&self, e: usize, mut integrand: impl FnMut(&QuadPoint<'_>) -> f64) -> Result<f64> {
        if e >= self.elements.len() {
            return Err(Error::contract(format!("element {e} out of range")));
        }
        let mut acc = 0.0;
        let mut bad = None;
        self.for_each_quad_point(e, |qp| {
            let v = integrand(qp);
            if !v.is_finite() && bad.is_none() {
                bad = Some(qp.x);
            }
            acc += qp.weight * v;
        });
        match bad {
            Some(x) => Err(Error::numeric(format!("non-finite integrand in element {e} at {x:?}"))),
            None => Ok(acc),
        }
    }

    /// Outward unit normals of the boundary sides containing node `i`.
    pub fn boundary_normals(&self, i: usize) -> Vec<Vec2> {
        let x = self.nodes[i];
        let mut out = Vec::new();
        for axis in 0..self.dim {
            let mut n = [0.0; 2];
            if x[axis] == 0.0 {
                n[axis] = -1.0;
                out.push(n);
            } else if x[axis] == self.extent[axis] {
                n[axis] = 1.0;
                out.push(n);
            }
        }
        out
    }
}

fn triangle_geometry(p0: Vec2, p1: Vec2, p2: Vec2) -> ElementGeometry {
    let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    ElementGeometry {
        measure: 0.5 * det.abs(),
        grads: [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn interval_nodes_and_elements() {
        let m = Mesh::build(&MeshSpec::interval(1.0, 4)).unwrap();
        assert_eq!(m.num_nodes(), 5);
        assert_eq!(m.num_elements(), 4);
        let xs: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.boundary_nodes(), &[0, 4]);
    }

    #[test]
    fn rectangle_counts() {
        let m = Mesh::build(&MeshSpec::rectangle(1.0, 1.0, 2, 2)).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_elements(), 8);
        // every node except the centre is on the boundary
        assert_eq!(m.boundary_nodes().len(), 8);
        assert!(!m.boundary_nodes().contains(&4));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(Mesh::build(&MeshSpec::interval(1.0, 1)), Err(Error::Config(_))));
        assert!(matches!(Mesh::build(&MeshSpec::interval(-1.0, 4)), Err(Error::Config(_))));
        assert!(matches!(Mesh::build(&MeshSpec::interval(0.0, 4)), Err(Error::Config(_))));
        assert!(matches!(
            Mesh::build(&MeshSpec::rectangle(1.0, 1.0, 4, 1)),
            Err(Error::Config(_))
        ));
        let bad_dim = MeshSpec {
            dim: 3,
            extent: vec![1.0; 3],
            cells: vec![2; 3],
        };
        assert!(Mesh::build(&bad_dim).is_err());
    }

    #[test]
    fn element_measures_tile_domain() {
        for spec in [MeshSpec::interval(2.5, 7), MeshSpec::rectangle(1.5, 0.75, 5, 3)] {
            let m = Mesh::build(&spec).unwrap();
            let total: f64 = (0..m.num_elements()).map(|e| m.element_measure(e)).sum();
            assert!(close(total, m.domain_measure(), 1e-12));
        }
    }

    #[test]
    fn refinement_halves_measures() {
        let spec = MeshSpec::rectangle(1.0, 2.0, 3, 4);
        let m = Mesh::build(&spec).unwrap();
        let r = Mesh::build(&spec.refined()).unwrap();
        // uniform meshes: in 2D a refined cell has a quarter of the area
        assert!(close(r.element_measure(0) * 4.0, m.element_measure(0), 1e-14));
        let m1 = Mesh::build(&MeshSpec::interval(1.0, 6)).unwrap();
        let r1 = Mesh::build(&MeshSpec::interval(1.0, 6).refined()).unwrap();
        assert!(close(r1.element_measure(0) * 2.0, m1.element_measure(0), 1e-14));
    }

    #[test]
    fn integrate_constant_hat_and_square() {
        let m = Mesh::build(&MeshSpec::interval(1.0, 4)).unwrap();
        let h = 0.25;
        assert!(close(m.element_integrate(1, |_| 1.0).unwrap(), h, 1e-15));
        assert!(close(m.element_integrate(1, |qp| qp.basis[0]).unwrap(), h / 2.0, 1e-15));
        // closed form ∫₀ʰ (x/h)² dx = h/3
        let sq = m.element_integrate(2, |qp| qp.basis[1] * qp.basis[1]).unwrap();
        assert!(close(sq, h / 3.0, 1e-14));
    }

    #[test]
    fn integrate_reports_non_finite() {
        let m = Mesh::build(&MeshSpec::interval(1.0, 4)).unwrap();
        assert!(matches!(m.element_integrate(0, |_| f64::NAN), Err(Error::Numeric(_))));
        assert!(matches!(m.element_integrate(9, |_| 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn triangle_rule_exact_for_quadratics() {
        let m = Mesh::build(&MeshSpec::rectangle(1.0, 1.0, 1 + 1, 2)).unwrap();
        // ∫ φ_i φ_j over a triangle: |T|/6 (i = j), |T|/12 (i ≠ j)
        for e in 0..m.num_elements() {
            let area = m.element_measure(e);
            let d = m.element_integrate(e, |qp| qp.basis[0] * qp.basis[0]).unwrap();
            let o = m.element_integrate(e, |qp| qp.basis[0] * qp.basis[2]).unwrap();
            assert!(close(d, area / 6.0, 1e-14));
            assert!(close(o, area / 12.0, 1e-14));
        }
    }

    #[test]
    fn basis_partition_of_unity_and_gradients() {
        for spec in [MeshSpec::interval(1.0, 5), MeshSpec::rectangle(2.0, 1.0, 3, 4)] {
            let m = Mesh::build(&spec).unwrap();
            for e in 0..m.num_elements() {
                m.for_each_quad_point(e, |qp| {
                    let s: f64 = qp.basis.iter().sum();
                    assert!((s - 1.0).abs() < 1e-14);
                    let g = qp.grads.iter().fold([0.0, 0.0], |a, g| [a[0] + g[0], a[1] + g[1]]);
                    assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
                });
            }
        }
    }

    #[test]
    fn interior_gradient_integrals_vanish_in_1d() {
        let m = Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap();
        let mut acc = vec![0.0; m.num_nodes()];
        for e in 0..m.num_elements() {
            for (j, &v) in m.element(e).iter().enumerate() {
                acc[v] += m.element_integrate(e, |qp| qp.grads[j][0]).unwrap();
            }
        }
        for (i, a) in acc.iter().enumerate().skip(1).take(m.num_nodes() - 2) {
            assert!(a.abs() < 1e-13, "node {i}: {a}");
        }
    }

    #[test]
    fn coordinates_strictly_increasing() {
        let m = Mesh::build(&MeshSpec::rectangle(1.0, 1.0, 4, 3)).unwrap();
        for j in 0..=3 {
            for i in 0..4 {
                let a = m.node(j * 5 + i);
                let b = m.node(j * 5 + i + 1);
                assert!(b[0] > a[0]);
                assert_eq!(a[1], b[1]);
            }
        }
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = Mesh::build(&MeshSpec::rectangle(1.0, 1.0, 2, 2)).unwrap();
        assert_eq!(m.boundary_normals(0), vec![[-1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(m.boundary_normals(5), vec![[1.0, 0.0]]);
        assert!(m.boundary_normals(4).is_empty());
    }
}
