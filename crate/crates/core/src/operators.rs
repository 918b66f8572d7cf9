//! Discrete space-time operators `F`, `F_ℓ`, `A`, `A_ℓ`, the lumped-mass
//! inner product and the weighted `V_ℓ` norms.
//!
//! Residuals are assembled in dual form, `rᵢ = ⟨·, φᵢ⟩`. The 𝓗 = L²(0,T;L²(Ω))
//! representative of a dual vector is `rᵢ / mᵢ` with the lumped mass `mᵢ`,
//! which is what [`OperatorContext::to_h`] returns. Subdomains use the global
//! lumped mass restricted to their nodes, so `E_ℓ` and `R_ℓ` are adjoint.
//!
//! Level k of the residual of a field u is
//!
//! ```text
//! C(u_k - u_{k-1})/Δt + κ·C u_k + A(t_k)u_k + f(t_k),   u_0 = 0,
//! ```
//!
//! where `C` is the lumped capacity mass (`∫ g_ℓ γ φᵢ` on a subdomain) and κ
//! is the model's `capacity_reaction` (zero unless the model is shifted).

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::decomposition::Decomposition;
use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::linalg::CsrMatrix;
use crate::math::{self, Vec2};
use crate::mesh::Mesh;
use crate::model::PStructureModel;

/// Which operator: the undecomposed one or subdomain ℓ (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Global,
    Sub(usize),
}

/// Element data of one (sub)mesh in local numbering.
#[derive(Debug, Clone)]
struct Patch {
    nodes: Vec<usize>,
    elements: Vec<usize>,
    conn: Vec<[usize; 3]>,
    a: Vec<[f64; 3]>,
    b: Vec<[f64; 3]>,
    g: Vec<[f64; 3]>,
    lumped_mass: Vec<f64>,
    capacity_mass: Vec<f64>,
    pattern: CsrMatrix,
}

impl Patch {
    fn global(mesh: &Mesh) -> Self {
        let nv = mesh.nodes_per_element();
        let conn: Vec<[usize; 3]> = (0..mesh.num_elements())
            .map(|e| {
                let mut c = [usize::MAX; 3];
                c[..nv].copy_from_slice(mesh.element(e));
                c
            })
            .collect();
        let ones = vec![[1.0; 3]; mesh.num_elements()];
        Self::assemble(
            mesh,
            (0..mesh.num_nodes()).collect(),
            (0..mesh.num_elements()).collect(),
            conn,
            ones.clone(),
            ones.clone(),
            ones,
        )
    }

    fn subdomain(mesh: &Mesh, dec: &Decomposition, l: usize) -> Self {
        let sub = dec.subdomain(l);
        let w = dec.weights(l);
        let conn: Vec<[usize; 3]> = (0..sub.elements().len()).map(|le| *sub.local_element(le)).collect();
        let a = conn
            .iter()
            .map(|c| {
                let mut v = [0.0; 3];
                for j in 0..mesh.nodes_per_element() {
                    v[j] = w.a[c[j]];
                }
                v
            })
            .collect();
        Self::assemble(
            mesh,
            sub.nodes().to_vec(),
            sub.elements().to_vec(),
            conn,
            a,
            w.b.clone(),
            w.g.clone(),
        )
    }

    fn assemble(
        mesh: &Mesh,
        nodes: Vec<usize>,
        elements: Vec<usize>,
        conn: Vec<[usize; 3]>,
        a: Vec<[f64; 3]>,
        b: Vec<[f64; 3]>,
        g: Vec<[f64; 3]>,
    ) -> Self {
        let nv = mesh.nodes_per_element();
        let mut global_mass = vec![0.0; mesh.num_nodes()];
        for e in 0..mesh.num_elements() {
            mesh.for_each_quad_point(e, |qp| {
                for (j, &v) in mesh.element(e).iter().enumerate() {
                    global_mass[v] += qp.weight * qp.basis[j];
                }
            });
        }
        let lumped_mass = nodes.iter().map(|&gi| global_mass[gi]).collect();
        let pattern = CsrMatrix::from_elements(nodes.len(), conn.iter().map(|c| &c[..nv]));
        Self {
            nodes,
            elements,
            conn,
            a,
            b,
            g,
            lumped_mass,
            capacity_mass: Vec::new(),
            pattern,
        }
    }

    fn with_capacity(mut self, mesh: &Mesh, model: &PStructureModel) -> Self {
        let mut cm = vec![0.0; self.nodes.len()];
        for (le, &e) in self.elements.iter().enumerate() {
            let conn = &self.conn[le];
            let gw = &self.g[le];
            mesh.for_each_quad_point(e, |qp| {
                let g: f64 = qp.basis.iter().zip(gw).map(|(p, v)| p * v).sum();
                let gamma = model.gamma(qp.x);
                for (j, &phi) in qp.basis.iter().enumerate() {
                    cm[conn[j]] += qp.weight * g * gamma * phi;
                }
            });
        }
        self.capacity_mass = cm;
        self
    }
}

/// Weighted values at one quadrature point of one patch element.
struct PointData {
    u: f64,
    grad: Vec2,
    a: f64,
    b: f64,
}

fn point_data(basis: &[f64], grads: &[Vec2], conn: &[usize; 3], u: &[f64], aw: &[f64; 3], bw: &[f64; 3]) -> PointData {
    let mut d = PointData {
        u: 0.0,
        grad: [0.0; 2],
        a: 0.0,
        b: 0.0,
    };
    for (j, &phi) in basis.iter().enumerate() {
        let uj = u[conn[j]];
        d.u += phi * uj;
        d.grad[0] += uj * grads[j][0];
        d.grad[1] += uj * grads[j][1];
        d.a += phi * aw[j];
        d.b += phi * bw[j];
    }
    d
}

/// Linearisation used by [`OperatorContext::jacobian`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linearization {
    /// ε-regularised Newton Jacobian.
    Newton { eps: f64 },
    /// Frozen-coefficient (secant) operator.
    Picard { eps: f64 },
}

/// Mesh, model and decomposition with the derived mass matrices.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    mesh: Arc<Mesh>,
    model: PStructureModel,
    dec: Arc<Decomposition>,
    grid: TimeGrid,
    global: Patch,
    subs: Vec<Patch>,
}

impl OperatorContext {
    pub fn new(mesh: Arc<Mesh>, model: PStructureModel, dec: Arc<Decomposition>, grid: TimeGrid) -> Result<Self> {
        if dec.num_global_nodes() != mesh.num_nodes() {
            return Err(Error::contract("decomposition was built for a different mesh"));
        }
        let global = Patch::global(&mesh).with_capacity(&mesh, &model);
        let subs = (0..dec.q())
            .map(|l| Patch::subdomain(&mesh, &dec, l).with_capacity(&mesh, &model))
            .collect();
        Ok(Self {
            mesh,
            model,
            dec,
            grid,
            global,
            subs,
        })
    }

    /// Same mesh, decomposition and time grid with a different model.
    pub fn with_model(&self, model: PStructureModel) -> Self {
        let global = self.global.clone().with_capacity(&self.mesh, &model);
        let subs = self
            .subs
            .iter()
            .map(|p| p.clone().with_capacity(&self.mesh, &model))
            .collect();
        Self {
            mesh: self.mesh.clone(),
            model,
            dec: self.dec.clone(),
            grid: self.grid,
            global,
            subs,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn model(&self) -> &PStructureModel {
        &self.model
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.dec
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn q(&self) -> usize {
        self.dec.q()
    }

    fn patch(&self, part: Part) -> Result<&Patch> {
        match part {
            Part::Global => Ok(&self.global),
            Part::Sub(l) => self
                .subs
                .get(l)
                .ok_or_else(|| Error::contract(format!("subdomain {l} out of range (q = {})", self.subs.len()))),
        }
    }

    pub fn num_nodes(&self, part: Part) -> usize {
        self.patch(part).map_or(0, |p| p.nodes.len())
    }

    /// Lumped L² mass of the part's nodes (global weights).
    pub fn lumped_mass(&self, part: Part) -> &[f64] {
        &self.patch(part).expect("valid part").lumped_mass
    }

    /// Lumped capacity mass `∫ g_ℓ γ φᵢ` (γφᵢ for the global part).
    pub fn capacity_mass(&self, part: Part) -> &[f64] {
        &self.patch(part).expect("valid part").capacity_mass
    }

    pub fn zeros(&self, part: Part) -> SpaceTimeField {
        SpaceTimeField::zeros(self.grid, self.num_nodes(part))
    }

    pub fn restrict(&self, part: Part, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        match part {
            Part::Global => Ok(u.clone()),
            Part::Sub(l) => self.dec.restrict(l, u),
        }
    }

    pub fn extend(&self, part: Part, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        match part {
            Part::Global => Ok(u.clone()),
            Part::Sub(l) => self.dec.extend(l, u),
        }
    }

    fn check_field(&self, part: Part, u: &SpaceTimeField) -> Result<()> {
        let n = self.patch(part)?.nodes.len();
        if u.n_nodes() != n || u.grid() != self.grid {
            return Err(Error::contract(format!(
                "{part:?} expects {n} nodes x {} levels, got {} x {}",
                self.grid.steps(),
                u.n_nodes(),
                u.grid().steps()
            )));
        }
        Ok(())
    }

    /// `⟨A_ℓ(t_k)u, φᵢ⟩ = ∫ a α(t_k, ∇u)·∇φᵢ + b β(t_k, u) φᵢ`.
    pub fn apply_a(&self, part: Part, k: usize, u: &[f64]) -> Result<Vec<f64>> {
        let patch = self.patch(part)?;
        if u.len() != patch.nodes.len() {
            return Err(Error::contract(format!("apply_a: expected {} values, got {}", patch.nodes.len(), u.len())));
        }
        let t = self.grid.time(k);
        let coeffs = &*self.model.coefficients;
        let mut r = vec![0.0; u.len()];
        for (le, &e) in patch.elements.iter().enumerate() {
            let conn = &patch.conn[le];
            self.mesh.for_each_quad_point(e, |qp| {
                let d = point_data(qp.basis, qp.grads, conn, u, &patch.a[le], &patch.b[le]);
                let flux = coeffs.alpha(qp.x, t, d.grad);
                let reac = coeffs.beta(qp.x, t, d.u);
                for (i, &phi) in qp.basis.iter().enumerate() {
                    r[conn[i]] += qp.weight * (d.a * math::dot(flux, qp.grads[i]) + d.b * reac * phi);
                }
            });
        }
        finite_or(r, "apply_a")
    }

    /// `⟨f_ℓ(t_k), φᵢ⟩ = ∫ b η₀ φᵢ + a η·∇φᵢ`.
    pub fn source_load(&self, part: Part, k: usize) -> Result<Vec<f64>> {
        let patch = self.patch(part)?;
        let t = self.grid.time(k);
        let src = &*self.model.source;
        let mut r = vec![0.0; patch.nodes.len()];
        for (le, &e) in patch.elements.iter().enumerate() {
            let conn = &patch.conn[le];
            let (aw, bw) = (&patch.a[le], &patch.b[le]);
            self.mesh.for_each_quad_point(e, |qp| {
                let a: f64 = qp.basis.iter().zip(aw).map(|(p, v)| p * v).sum();
                let b: f64 = qp.basis.iter().zip(bw).map(|(p, v)| p * v).sum();
                let eta0 = src.eta0(qp.x, t);
                let eta = src.eta(qp.x, t);
                for (i, &phi) in qp.basis.iter().enumerate() {
                    r[conn[i]] += qp.weight * (b * eta0 * phi + a * math::dot(eta, qp.grads[i]));
                }
            });
        }
        finite_or(r, "source_load")
    }

    /// Dual residual of one implicit-Euler level with an optional resolvent
    /// shift s and right-hand side `rhs` (dual):
    ///
    /// `s·m∘u + C(u - u_prev)/Δt + κC u + A(t_k)u + f(t_k) - rhs`.
    pub fn level_residual(
        &self,
        part: Part,
        k: usize,
        u: &[f64],
        u_prev: &[f64],
        s: f64,
        rhs: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let patch = self.patch(part)?;
        let mut r = self.apply_a(part, k, u)?;
        let load = self.source_load(part, k)?;
        let dt = self.grid.dt();
        let kappa = self.model.capacity_reaction;
        for i in 0..r.len() {
            let c = patch.capacity_mass[i];
            r[i] += s * patch.lumped_mass[i] * u[i] + c * (u[i] - u_prev[i]) / dt + kappa * c * u[i] + load[i];
            if let Some(rhs) = rhs {
                r[i] -= rhs[i];
            }
        }
        Ok(r)
    }

    /// Jacobian (or secant operator) of [`Self::level_residual`] at `u`.
    pub fn jacobian(&self, part: Part, k: usize, u: &[f64], s: f64, lin: Linearization) -> Result<CsrMatrix> {
        let patch = self.patch(part)?;
        let t = self.grid.time(k);
        let coeffs = &*self.model.coefficients;
        let mut m = patch.pattern.clone();
        m.clear();
        for (le, &e) in patch.elements.iter().enumerate() {
            let conn = &patch.conn[le];
            self.mesh.for_each_quad_point(e, |qp| {
                let d = point_data(qp.basis, qp.grads, conn, u, &patch.a[le], &patch.b[le]);
                let (ja, db) = match lin {
                    Linearization::Newton { eps } => (
                        coeffs.alpha_jacobian(qp.x, t, d.grad, eps),
                        coeffs.beta_derivative(qp.x, t, d.u, eps),
                    ),
                    Linearization::Picard { eps } => {
                        let ka = coeffs.alpha_secant(qp.x, t, d.grad, eps);
                        ([[ka, 0.0], [0.0, ka]], coeffs.beta_secant(qp.x, t, d.u, eps))
                    }
                };
                for (i, gi) in qp.grads.iter().enumerate() {
                    for (j, gj) in qp.grads.iter().enumerate() {
                        let jg = [
                            ja[0][0] * gj[0] + ja[0][1] * gj[1],
                            ja[1][0] * gj[0] + ja[1][1] * gj[1],
                        ];
                        let v = d.a * math::dot(jg, *gi) + d.b * db * qp.basis[j] * qp.basis[i];
                        m.add(conn[i], conn[j], qp.weight * v);
                    }
                }
            });
        }
        let dt = self.grid.dt();
        let kappa = self.model.capacity_reaction;
        for i in 0..patch.nodes.len() {
            let c = patch.capacity_mass[i];
            m.add(i, i, s * patch.lumped_mass[i] + c / dt + kappa * c);
        }
        Ok(m)
    }

    /// Dual residual of `F` (or `F_ℓ` with u on the subdomain) at every level.
    pub fn apply_f(&self, part: Part, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_field(part, u)?;
        let n = u.n_nodes();
        let zero = vec![0.0; n];
        let mut out = SpaceTimeField::zeros(self.grid, n);
        for k in 1..=self.grid.steps() {
            let prev = if k == 1 { &zero[..] } else { u.level(k - 1) };
            let r = self.level_residual(part, k, u.level(k), prev, 0.0, None)?;
            out.level_mut(k).copy_from_slice(&r);
        }
        Ok(out)
    }

    /// 𝓗 representative of a dual field: divide by the lumped mass.
    pub fn to_h(&self, part: Part, dual: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.check_field(part, dual)?;
        let m = &self.patch(part)?.lumped_mass;
        let mut out = dual.clone();
        for k in 1..=self.grid.steps() {
            for (v, mi) in out.level_mut(k).iter_mut().zip(m) {
                *v /= mi;
            }
        }
        Ok(out)
    }

    /// `E_ℓ F_ℓ u` (or `F u`) as a global 𝓗 field, for a global field u.
    pub fn apply_f_global_h(&self, part: Part, u: &SpaceTimeField) -> Result<SpaceTimeField> {
        let ul = self.restrict(part, u)?;
        let r = self.apply_f(part, &ul)?;
        self.extend(part, &self.to_h(part, &r)?)
    }

    /// `(u, v)_𝓗 = Σ_k Δt Σᵢ mᵢ u_{k,i} v_{k,i}`.
    pub fn h_inner(&self, part: Part, u: &SpaceTimeField, v: &SpaceTimeField) -> Result<f64> {
        self.check_field(part, u)?;
        self.check_field(part, v)?;
        let m = &self.patch(part)?.lumped_mass;
        let mut acc = 0.0;
        for k in 1..=self.grid.steps() {
            acc += u.level(k).iter().zip(v.level(k)).zip(m).map(|((a, b), mi)| mi * a * b).sum::<f64>();
        }
        Ok(self.grid.dt() * acc)
    }

    pub fn h_norm(&self, part: Part, u: &SpaceTimeField) -> Result<f64> {
        Ok(math::sqrt(self.h_inner(part, u, u)?))
    }

    /// `‖u‖ = (Σ_k Δt ∫ a|∇u_k|^p + b|u_k|^p)^{1/p}` over the part.
    pub fn v_norm_p(&self, part: Part, u: &SpaceTimeField) -> Result<f64> {
        Ok(math::powf(self.v_norm_p_pow(part, u)?, 1.0 / self.model.p()))
    }

    /// `‖u‖^p` of [`Self::v_norm_p`].
    pub fn v_norm_p_pow(&self, part: Part, u: &SpaceTimeField) -> Result<f64> {
        self.check_field(part, u)?;
        let patch = self.patch(part)?;
        let p = self.model.p();
        let mut acc = 0.0;
        for k in 1..=self.grid.steps() {
            let uk = u.level(k);
            for (le, &e) in patch.elements.iter().enumerate() {
                let conn = &patch.conn[le];
                self.mesh.for_each_quad_point(e, |qp| {
                    let d = point_data(qp.basis, qp.grads, conn, uk, &patch.a[le], &patch.b[le]);
                    acc += qp.weight * (d.a * math::powf(math::norm2(d.grad), p) + d.b * math::powf(d.u.abs(), p));
                });
            }
        }
        Ok(self.grid.dt() * acc)
    }

    /// Lumped-mass norm of a dual vector, `(Σ rᵢ²/mᵢ)^{1/2}`.
    pub fn dual_norm(&self, part: Part, r: &[f64]) -> f64 {
        let m = &self.patch(part).expect("valid part").lumped_mass;
        math::sqrt(r.iter().zip(m).map(|(v, mi)| v * v / mi).sum())
    }
}

fn finite_or(r: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if r.iter().all(|v| v.is_finite()) {
        Ok(r)
    } else {
        Err(Error::numeric(format!("{what} produced a non-finite value")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshSpec;
    use crate::model::{Capacity, ConstantSource, ZeroSource};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(cells: usize, steps: usize, p: f64, lambda: f64, q: usize) -> OperatorContext {
        let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, cells)).unwrap());
        let model = PStructureModel::p_laplace(
            p,
            lambda,
            Capacity::Constant(1.0),
            Arc::new(ConstantSource {
                eta0: 0.3,
                eta: [-0.2, 0.0],
            }),
        )
        .unwrap();
        let overlap = if cells < 8 { 0.5 } else { 0.25 };
        let dec = Arc::new(Decomposition::build(&mesh, q, overlap, 0.1).unwrap());
        OperatorContext::new(mesh, model, dec, TimeGrid::new(1.0, steps).unwrap()).unwrap()
    }

    fn random_field(rng: &mut ChaCha8Rng, grid: TimeGrid, n: usize) -> SpaceTimeField {
        SpaceTimeField::from_fn(grid, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn apply_a_vanishes_at_zero() {
        let c = ctx(8, 2, 3.0, 2.5, 2);
        for part in [Part::Global, Part::Sub(0), Part::Sub(1)] {
            let r = c.apply_a(part, 1, &vec![0.0; c.num_nodes(part)]).unwrap();
            assert!(r.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_operator_matches_hand_assembly() {
        // p = 2, λ = 0, unit weights on 4 elements: stiffness h⁻¹(-1, 2, -1)
        // plus the consistent mass h/6 (1, 4, 1) from full quadrature.
        let c = ctx(4, 1, 2.0, 0.0, 2);
        let h = 0.25;
        let n = 5;
        let mut dense = vec![vec![0.0; n]; n];
        for e in 0..4 {
            let (i, j) = (e, e + 1);
            let k = [[1.0 / h + h / 3.0, -1.0 / h + h / 6.0], [-1.0 / h + h / 6.0, 1.0 / h + h / 3.0]];
            dense[i][i] += k[0][0];
            dense[i][j] += k[0][1];
            dense[j][i] += k[1][0];
            dense[j][j] += k[1][1];
        }
        let u = [0.3, -1.0, 2.0, 0.5, 1.5];
        let r = c.apply_a(Part::Global, 1, &u).unwrap();
        for i in 0..n {
            let expect: f64 = (0..n).map(|j| dense[i][j] * u[j]).sum();
            assert!((r[i] - expect).abs() < 1e-13, "row {i}: {} vs {expect}", r[i]);
        }
    }

    #[test]
    fn apply_a_monotone_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = ctx(16, 1, 3.0, 0.5, 2);
        for part in [Part::Global, Part::Sub(0), Part::Sub(1)] {
            let n = c.num_nodes(part);
            for _ in 0..100 {
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let au = c.apply_a(part, 1, &u).unwrap();
                let av = c.apply_a(part, 1, &v).unwrap();
                let pairing: f64 = (0..n).map(|i| (au[i] - av[i]) * (u[i] - v[i])).sum();
                assert!(pairing >= 0.0);
            }
        }
    }

    #[test]
    fn zero_solves_homogeneous_problem() {
        let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap());
        let model = PStructureModel::p_laplace(3.0, 1.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let dec = Arc::new(Decomposition::build(&mesh, 2, 0.25, 0.1).unwrap());
        let c = OperatorContext::new(mesh, model, dec, TimeGrid::new(1.0, 3).unwrap()).unwrap();
        let r = c.apply_f(Part::Global, &c.zeros(Part::Global)).unwrap();
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decomposition_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for q in [2, 3] {
            let c = ctx(24, 4, 3.0, 1.0, q);
            for _ in 0..5 {
                let u = random_field(&mut rng, c.grid(), c.num_nodes(Part::Global));
                let full = c.apply_f(Part::Global, &u).unwrap();
                let mut sum = c.zeros(Part::Global);
                for l in 0..q {
                    let fl = c.apply_f(Part::Sub(l), &c.restrict(Part::Sub(l), &u).unwrap()).unwrap();
                    c.decomposition().extend_add(l, &fl, 1.0, &mut sum).unwrap();
                }
                let diff = sum.minus(&full).unwrap().max_abs();
                assert!(diff <= 1e-11 * full.max_abs(), "q = {q}: {diff}");
            }
        }
    }

    #[test]
    fn adjointness_of_restriction_and_extension() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = ctx(20, 3, 2.0, 0.0, 2);
        for l in 0..2 {
            let part = Part::Sub(l);
            for _ in 0..100 {
                let ul = random_field(&mut rng, c.grid(), c.num_nodes(part));
                let v = random_field(&mut rng, c.grid(), c.num_nodes(Part::Global));
                let lhs = c.h_inner(Part::Global, &c.extend(part, &ul).unwrap(), &v).unwrap();
                let rhs = c.h_inner(part, &ul, &c.restrict(part, &v).unwrap()).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn h_inner_examples() {
        let c = ctx(10, 4, 2.0, 0.0, 2);
        let ones = SpaceTimeField::from_fn(c.grid(), 11, |_, _| 1.0);
        assert!((c.h_inner(Part::Global, &ones, &ones).unwrap() - 1.0).abs() < 1e-14);
        let left = SpaceTimeField::from_fn(c.grid(), 11, |_, i| if i < 5 { 1.0 } else { 0.0 });
        let right = SpaceTimeField::from_fn(c.grid(), 11, |_, i| if i >= 5 { 1.0 } else { 0.0 });
        assert_eq!(c.h_inner(Part::Global, &left, &right).unwrap(), 0.0);
        // hat at node 3: Δt·Σ_k m₃ = T·h
        let hat = SpaceTimeField::from_fn(c.grid(), 11, |_, i| if i == 3 { 1.0 } else { 0.0 });
        assert!((c.h_inner(Part::Global, &hat, &hat).unwrap() - 0.1).abs() < 1e-14);
        assert!(c.h_inner(Part::Global, &hat, &c.zeros(Part::Sub(0))).is_err());
    }

    #[test]
    fn v_norm_examples() {
        let c = ctx(20, 4, 3.0, 0.0, 2);
        assert_eq!(c.v_norm_p(Part::Sub(0), &c.zeros(Part::Sub(0))).unwrap(), 0.0);
        // u ≡ 1 on Ω_ℓ: (T ∫ b_ℓ)^{1/p}; oracle integrates b_ℓ by quadrature
        for l in 0..2 {
            let part = Part::Sub(l);
            let ones = SpaceTimeField::from_fn(c.grid(), c.num_nodes(part), |_, _| 1.0);
            let sub = c.decomposition().subdomain(l);
            let w = c.decomposition().weights(l);
            let mut int_b = 0.0;
            for (le, &e) in sub.elements().iter().enumerate() {
                int_b += c
                    .mesh()
                    .element_integrate(e, |qp| qp.basis.iter().zip(&w.b[le]).map(|(p, v)| p * v).sum())
                    .unwrap();
            }
            let expect = math::powf(int_b, 1.0 / 3.0);
            assert!((c.v_norm_p(part, &ones).unwrap() - expect).abs() < 1e-13);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_field(&mut rng, c.grid(), c.num_nodes(Part::Sub(1)));
        let n1 = c.v_norm_p(Part::Sub(1), &u).unwrap();
        let n2 = c.v_norm_p(Part::Sub(1), &u.scaled(-2.5)).unwrap();
        assert!((n2 - 2.5 * n1).abs() < 1e-12 * n2);
    }

    #[test]
    fn capacity_masses_sum_to_global() {
        let c = ctx(32, 2, 2.0, 0.0, 3);
        let mut sum = vec![0.0; c.num_nodes(Part::Global)];
        for l in 0..3 {
            for (&g, &m) in c.decomposition().subdomain(l).nodes().iter().zip(c.capacity_mass(Part::Sub(l))) {
                sum[g] += m;
            }
        }
        for (s, m) in sum.iter().zip(c.capacity_mass(Part::Global)) {
            assert!((s - m).abs() <= 1e-12);
        }
        assert!(c.lumped_mass(Part::Global).iter().all(|&m| m > 0.0));
    }
}
