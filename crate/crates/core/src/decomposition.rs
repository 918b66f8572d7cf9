//! Overlapping strip decompositions of Ω along the first axis and their
//! partition-of-unity weights.
//!
//! Strip ℓ (0-based here, `ℓ = 0..q`) reaches from the start of its left
//! overlap to the end of its right overlap. On each overlap `[o₀, o₁]` of
//! width w, with `s = (x - o₀)/w`:
//!
//! ```text
//! left strip:   a = 1 - s,   b = g = (1 - c_min) - (1 - 2 c_min) s
//! right strip:  a = s,       b = g = c_min + (1 - 2 c_min) s
//! ```
//!
//! and `a = b = g = 1` on the part of a strip no other strip covers. So `a` is
//! continuous and vanishes on the internal boundary, while `b` jumps from
//! `c_min` to 0 there; `b` is stored per element (discontinuous P1).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::math;
use crate::mesh::Mesh;
use crate::model::Capacity;

const NONE: usize = usize::MAX;

/// One overlapping strip Ω_ℓ.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdomain {
    pub id: usize,
    nodes: Vec<usize>,
    elements: Vec<usize>,
    local_elements: Vec<[usize; 3]>,
    local_of_global: Vec<usize>,
    internal_boundary: Vec<usize>,
    x_range: (f64, f64),
}

impl Subdomain {
    /// Global indices of the nodes of Ω̄_ℓ, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Global indices of the elements inside Ω_ℓ.
    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    /// Element connectivity in local node numbering.
    pub fn local_element(&self, local_e: usize) -> &[usize; 3] {
        &self.local_elements[local_e]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        match self.local_of_global.get(global) {
            Some(&l) if l != NONE => Some(l),
            _ => None,
        }
    }

    pub fn contains_node(&self, global: usize) -> bool {
        self.local_index(global).is_some()
    }

    /// Nodes of ∂Ω_ℓ \ ∂Ω (global indices).
    pub fn internal_boundary(&self) -> &[usize] {
        &self.internal_boundary
    }

    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }
}

/// Weights of one subdomain: `a` per local node, `b` and `g` per local
/// element vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightFamily {
    pub a: Vec<f64>,
    pub b: Vec<[f64; 3]>,
    pub g: Vec<[f64; 3]>,
}

/// Overlapping strips plus their weight families.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    q: usize,
    c_min: f64,
    subdomains: Vec<Subdomain>,
    weights: Vec<WeightFamily>,
    overlaps: Vec<(f64, f64)>,
    num_global_nodes: usize,
}

/// Position of a node along the first axis as a grid index.
fn axis_index(mesh: &Mesh, x: f64) -> usize {
    math::round(x / mesh.spacing(0)) as usize
}

impl Decomposition {
    /// Splits Ω into `q` strips along the first axis.
    ///
    /// Overlap j is centred at `(j + 1)·L/q` with width `overlap_fraction·L`,
    /// both snapped to mesh nodes.
    pub fn build(mesh: &Mesh, q: usize, overlap_fraction: f64, c_min: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::config(format!("decomposition needs q >= 2, got {q}")));
        }
        if !(overlap_fraction > 0.0 && overlap_fraction < 1.0) {
            return Err(Error::config(format!(
                "overlap_fraction must be in (0, 1), got {overlap_fraction}"
            )));
        }
        if !(c_min > 0.0 && c_min < 0.5) {
            return Err(Error::config(format!(
                "c_min must be in (0, 0.5) so that b stays positive, got {c_min}"
            )));
        }
        let length = mesh.extent(0);
        let h = mesh.spacing(0);
        let cells = mesh.cells(0);
        let width = math::round(overlap_fraction * length / h) as usize;
        if width < 2 {
            return Err(Error::config(format!(
                "overlaps span {width} element(s); at least 2 are required"
            )));
        }

        let mut overlap_idx = Vec::with_capacity(q - 1);
        for j in 0..q - 1 {
            // twice the centre index, so odd widths snap consistently
            let c2 = math::round(2.0 * (j + 1) as f64 * cells as f64 / q as f64) as usize;
            if c2 < width + 2 || (c2 - width) / 2 + width > cells - 1 {
                return Err(Error::config(format!(
                    "overlap {j} leaves no exclusive part for a boundary strip; reduce q or overlap_fraction"
                )));
            }
            let lo = (c2 - width) / 2;
            overlap_idx.push((lo, lo + width));
        }
        for j in 1..overlap_idx.len() {
            if overlap_idx[j].0 <= overlap_idx[j - 1].1 {
                return Err(Error::config(format!(
                    "q = {q} strips do not fit: overlaps {} and {j} touch; use fewer strips or thinner overlaps",
                    j - 1
                )));
            }
        }

        let coord = |i: usize| if i == cells { length } else { i as f64 * length / cells as f64 };
        let overlaps: Vec<(f64, f64)> = overlap_idx.iter().map(|&(lo, hi)| (coord(lo), coord(hi))).collect();

        let mut subdomains = Vec::with_capacity(q);
        let mut weights = Vec::with_capacity(q);
        for l in 0..q {
            let left = (l > 0).then(|| overlap_idx[l - 1]);
            let right = (l + 1 < q).then(|| overlap_idx[l]);
            let i_lo = left.map_or(0, |o| o.0);
            let i_hi = right.map_or(cells, |o| o.1);

            let mut local_of_global = vec![NONE; mesh.num_nodes()];
            let mut nodes = Vec::new();
            let mut internal_boundary = Vec::new();
            for (g, x) in mesh.nodes().iter().enumerate() {
                let ix = axis_index(mesh, x[0]);
                if ix >= i_lo && ix <= i_hi {
                    local_of_global[g] = nodes.len();
                    nodes.push(g);
                    if (left.is_some() && ix == i_lo) || (right.is_some() && ix == i_hi) {
                        internal_boundary.push(g);
                    }
                }
            }

            let mut elements = Vec::new();
            let mut local_elements = Vec::new();
            let mut b = Vec::new();
            for e in 0..mesh.num_elements() {
                let verts = mesh.element(e);
                if verts.iter().all(|&v| local_of_global[v] != NONE) {
                    let mut le = [NONE; 3];
                    for (j, &v) in verts.iter().enumerate() {
                        le[j] = local_of_global[v];
                    }
                    elements.push(e);
                    local_elements.push(le);

                    // region by centroid; element edges never straddle an overlap end
                    let xc = mesh.element_centroid(e)[0] / h;
                    let mut bv = [0.0; 3];
                    for (j, &v) in verts.iter().enumerate() {
                        let x = mesh.node(v)[0];
                        bv[j] = match (left, right) {
                            (Some((lo, hi)), _) if xc < hi as f64 => {
                                let s = ((x - coord(lo)) / (coord(hi) - coord(lo))).clamp(0.0, 1.0);
                                c_min + (1.0 - 2.0 * c_min) * s
                            }
                            (_, Some((lo, hi))) if xc > lo as f64 => {
                                let s = ((x - coord(lo)) / (coord(hi) - coord(lo))).clamp(0.0, 1.0);
                                (1.0 - c_min) - (1.0 - 2.0 * c_min) * s
                            }
                            _ => 1.0,
                        };
                    }
                    b.push(bv);
                }
            }

            let a = nodes
                .iter()
                .map(|&g| {
                    let x = mesh.node(g)[0];
                    let ix = axis_index(mesh, x);
                    match (left, right) {
                        (Some((lo, hi)), _) if ix <= hi => (x - coord(lo)) / (coord(hi) - coord(lo)),
                        (_, Some((lo, hi))) if ix >= lo => (coord(hi) - x) / (coord(hi) - coord(lo)),
                        _ => 1.0,
                    }
                })
                .collect();

            subdomains.push(Subdomain {
                id: l,
                nodes,
                elements,
                local_elements,
                local_of_global,
                internal_boundary,
                x_range: (coord(i_lo), coord(i_hi)),
            });
            weights.push(WeightFamily { a, g: b.clone(), b });
        }

        Ok(Self {
            q,
            c_min,
            subdomains,
            weights,
            overlaps,
            num_global_nodes: mesh.num_nodes(),
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn subdomain(&self, l: usize) -> &Subdomain {
        &self.subdomains[l]
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn weights(&self, l: usize) -> &WeightFamily {
        &self.weights[l]
    }

    /// Overlap intervals along the first axis (after snapping to nodes).
    pub fn overlaps(&self) -> &[(f64, f64)] {
        &self.overlaps
    }

    pub fn num_global_nodes(&self) -> usize {
        self.num_global_nodes
    }

    fn check_subdomain(&self, l: usize) -> Result<&Subdomain> {
        self.subdomains
            .get(l)
            .ok_or_else(|| Error::contract(format!("subdomain {l} out of range (q = {})", self.q)))
    }

    /// `R_ℓ u`: nodal restriction to Ω̄_ℓ at every time level.
    pub fn restrict(&self, l: usize, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        let sub = self.check_subdomain(l)?;
        if u.n_nodes() != self.num_global_nodes {
            return Err(Error::contract(format!(
                "restrict expects {} global nodes, got {}",
                self.num_global_nodes,
                u.n_nodes()
            )));
        }
        let grid = u.grid();
        let mut out = SpaceTimeField::zeros(grid, sub.num_nodes());
        for k in 1..=grid.steps() {
            let src = u.level(k);
            for (dst, &g) in out.level_mut(k).iter_mut().zip(&sub.nodes) {
                *dst = src[g];
            }
        }
        Ok(out)
    }

    /// `E_ℓ u_ℓ`: zero extension to the global mesh.
    pub fn extend(&self, l: usize, u_l: &SpaceTimeField) -> Result<SpaceTimeField> {
        let grid = u_l.grid();
        let mut out = SpaceTimeField::zeros(grid, self.num_global_nodes);
        self.extend_add(l, u_l, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += c·E_ℓ u_ℓ`.
    pub fn extend_add(&self, l: usize, u_l: &SpaceTimeField, c: f64, out: &mut SpaceTimeField) -> Result<()> {
        let sub = self.check_subdomain(l)?;
        if u_l.n_nodes() != sub.num_nodes() || out.n_nodes() != self.num_global_nodes || out.grid() != u_l.grid() {
            return Err(Error::contract(format!(
                "extend expects {} subdomain nodes into {} global nodes",
                sub.num_nodes(),
                self.num_global_nodes
            )));
        }
        for k in 1..=u_l.grid().steps() {
            let src = u_l.level(k);
            let dst = out.level_mut(k);
            for (&v, &g) in src.iter().zip(&sub.nodes) {
                dst[g] += c * v;
            }
        }
        Ok(())
    }

    /// Largest deviation of `Σ_ℓ E_ℓ w_ℓ` from 1 over all quadrature points,
    /// for `w = a, b, g` respectively.
    pub fn partition_of_unity_error(&self, mesh: &Mesh) -> [f64; 3] {
        let mut sums = vec![[0.0f64; 3]; mesh.num_elements() * mesh.quadrature().points.len()];
        let nq = mesh.quadrature().points.len();
        for (sub, w) in self.subdomains.iter().zip(&self.weights) {
            for (le, &e) in sub.elements.iter().enumerate() {
                let conn = &sub.local_elements[le];
                let mut iq = 0;
                mesh.for_each_quad_point(e, |qp| {
                    let s = &mut sums[e * nq + iq];
                    for (j, &phi) in qp.basis.iter().enumerate() {
                        s[0] += phi * w.a[conn[j]];
                        s[1] += phi * w.b[le][j];
                        s[2] += phi * w.g[le][j];
                    }
                    iq += 1;
                });
            }
        }
        sums.iter().fold([0.0; 3], |acc, s| {
            [
                acc[0].max((s[0] - 1.0).abs()),
                acc[1].max((s[1] - 1.0).abs()),
                acc[2].max((s[2] - 1.0).abs()),
            ]
        })
    }

    /// Largest deviation of `Σ_ℓ E_ℓ(g_ℓ R_ℓγ)` from γ over all quadrature points.
    pub fn capacity_reconstruction_error(&self, mesh: &Mesh, capacity: &Capacity) -> f64 {
        let nq = mesh.quadrature().points.len();
        let mut sums = vec![0.0; mesh.num_elements() * nq];
        for (sub, w) in self.subdomains.iter().zip(&self.weights) {
            for (le, &e) in sub.elements.iter().enumerate() {
                let mut iq = 0;
                mesh.for_each_quad_point(e, |qp| {
                    let g: f64 = qp.basis.iter().zip(&w.g[le]).map(|(p, v)| p * v).sum();
                    sums[e * nq + iq] += g * capacity.eval(qp.x);
                    iq += 1;
                });
            }
        }
        let mut worst: f64 = 0.0;
        for e in 0..mesh.num_elements() {
            let mut iq = 0;
            mesh.for_each_quad_point(e, |qp| {
                worst = worst.max((sums[e * nq + iq] - capacity.eval(qp.x)).abs());
                iq += 1;
            });
        }
        worst
    }

    /// Smallest value of `b_ℓ` over all subdomain elements and vertices.
    pub fn min_b(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (sub, w) in self.subdomains.iter().zip(&self.weights) {
            for (le, bv) in sub.local_elements.iter().zip(&w.b) {
                for (v, b) in le.iter().zip(bv) {
                    if *v != NONE {
                        m = m.min(*b);
                    }
                }
            }
        }
        m
    }
}
