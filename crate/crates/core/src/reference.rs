//! The monolithic discrete solution `u_h` of `F u = 0` and manufactured
//! solutions.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::math::{self, Vec2};
use crate::mesh::Mesh;
use crate::model::{Capacity, Coefficients, PStructureModel, SourceTerm};
use crate::operators::{OperatorContext, Part};
use crate::resolvent::{newton_time_step, NewtonStats, SolverConfig};

/// Time-marches `C(u_k - u_{k-1})/Δt + A(t_k)u_k + f(t_k) = 0` on the
/// global mesh.
pub fn solve_monolithic(ctx: &OperatorContext, solver: &SolverConfig) -> Result<SpaceTimeField> {
    solve_monolithic_from(ctx, solver, None).map(|(u, _)| u)
}

/// [`solve_monolithic`] with an optional Newton initial guess per level.
pub fn solve_monolithic_from(
    ctx: &OperatorContext,
    solver: &SolverConfig,
    guess: Option<&SpaceTimeField>,
) -> Result<(SpaceTimeField, NewtonStats)> {
    solver.validate()?;
    let n = ctx.num_nodes(Part::Global);
    if let Some(g) = guess {
        if g.n_nodes() != n || g.grid() != ctx.grid() {
            return Err(Error::contract("initial guess must be a global field on the context grid"));
        }
    }
    let zero = vec![0.0; n];
    let mut u = ctx.zeros(Part::Global);
    let mut worst = NewtonStats::default();
    for k in 1..=ctx.grid().steps() {
        let prev = if k == 1 { zero.clone() } else { u.level(k - 1).to_vec() };
        let (uk, st) = newton_time_step(ctx, Part::Global, 0.0, solver, k, &prev, &zero, guess.map(|g| g.level(k)))?;
        u.level_mut(k).copy_from_slice(&uk);
        if st.residual >= worst.residual {
            worst.residual = st.residual;
            worst.tolerance = st.tolerance;
        }
        worst.iterations = worst.iterations.max(st.iterations);
        worst.picard_steps += st.picard_steps;
    }
    Ok((u, worst))
}

/// A smooth exact solution with analytic derivatives.
pub trait ExactSolution: core::fmt::Debug + Send + Sync {
    fn value(&self, x: Vec2, t: f64) -> f64;
    fn time_derivative(&self, x: Vec2, t: f64) -> f64;
    fn gradient(&self, x: Vec2, t: f64) -> Vec2;
}

/// `u(x, t) = t·cos(πx₁/L)`, which satisfies homogeneous Neumann conditions
/// on `(0, L)` and on rectangles `(0, L) × (0, L₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineInTime {
    pub length: f64,
}

impl ExactSolution for CosineInTime {
    fn value(&self, x: Vec2, t: f64) -> f64 {
        t * math::cos(core::f64::consts::PI * x[0] / self.length)
    }

    fn time_derivative(&self, x: Vec2, _t: f64) -> f64 {
        math::cos(core::f64::consts::PI * x[0] / self.length)
    }

    fn gradient(&self, x: Vec2, t: f64) -> Vec2 {
        let k = core::f64::consts::PI / self.length;
        [-k * t * math::sin(k * x[0]), 0.0]
    }
}

/// `η₀ = -(γ ∂t u + β(u))`, `η = -α(∇u)` for an exact solution u.
#[derive(Debug, Clone)]
pub struct ManufacturedSource {
    coefficients: Arc<dyn Coefficients>,
    capacity: Capacity,
    exact: Arc<dyn ExactSolution>,
}

impl SourceTerm for ManufacturedSource {
    fn eta0(&self, x: Vec2, t: f64) -> f64 {
        let u = self.exact.value(x, t);
        -(self.capacity.eval(x) * self.exact.time_derivative(x, t) + self.coefficients.beta(x, t, u))
    }

    fn eta(&self, x: Vec2, t: f64) -> Vec2 {
        let a = self.coefficients.alpha(x, t, self.exact.gradient(x, t));
        [-a[0], -a[1]]
    }
}

/// Source densities for which `exact` solves the model problem.
///
/// Checks `γu(0) = 0` at every node and `α(∇u)·n = 0` at every boundary node
/// and time level to 1e-10.
pub fn manufactured_rhs(
    model: &PStructureModel,
    exact: Arc<dyn ExactSolution>,
    mesh: &Mesh,
    grid: TimeGrid,
) -> Result<ManufacturedSource> {
    const TOL: f64 = 1e-10;
    for (i, &x) in mesh.nodes().iter().enumerate() {
        let v = model.gamma(x) * exact.value(x, 0.0);
        if !(v.abs() <= TOL) {
            return Err(Error::config(format!(
                "manufactured solution violates gamma*u(0) = 0 at node {i} {x:?}: {v:e}"
            )));
        }
    }
    for &i in mesh.boundary_nodes() {
        let x = mesh.node(i);
        for normal in mesh.boundary_normals(i) {
            for k in 0..=grid.steps() {
                let t = grid.time(k);
                let flux = model.eval_alpha(x, t, exact.gradient(x, t))?;
                let v = math::dot(flux, normal);
                if !(v.abs() <= TOL) {
                    return Err(Error::config(format!(
                        "manufactured solution violates the Neumann condition at {x:?}, t = {t}: {v:e}"
                    )));
                }
            }
        }
    }
    Ok(ManufacturedSource {
        coefficients: model.coefficients.clone(),
        capacity: model.capacity,
        exact,
    })
}

/// Nodal interpolant of an exact solution.
pub fn interpolate(mesh: &Mesh, grid: TimeGrid, exact: &dyn ExactSolution) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, mesh.num_nodes(), |k, i| exact.value(mesh.node(i), grid.time(k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Decomposition;
    use crate::mesh::MeshSpec;
    use crate::model::ZeroSource;

    fn context(model: PStructureModel, cells: usize, steps: usize) -> OperatorContext {
        let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, cells)).unwrap());
        let dec = Arc::new(Decomposition::build(&mesh, 2, 0.25, 0.1).unwrap());
        OperatorContext::new(mesh, model, dec, TimeGrid::new(1.0, steps).unwrap()).unwrap()
    }

    #[test]
    fn zero_source_gives_zero() {
        let model = PStructureModel::p_laplace(3.0, 1.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let c = context(model, 16, 4);
        let u = solve_monolithic(&c, &SolverConfig::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn cosine_densities_linear() {
        let model = PStructureModel::p_laplace(2.0, 0.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let mesh = Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let src = manufactured_rhs(&model, Arc::new(CosineInTime { length: 1.0 }), &mesh, grid).unwrap();
        let pi = core::f64::consts::PI;
        for &(x, t) in &[(0.1, 0.3), (0.6, 0.9), (0.95, 0.0)] {
            let e0 = -(1.0 + t) * math::cos(pi * x);
            let e = pi * t * math::sin(pi * x);
            assert!((src.eta0([x, 0.0], t) - e0).abs() < 1e-14);
            assert!((src.eta([x, 0.0], t)[0] - e).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_flux_p4() {
        let model = PStructureModel::p_laplace(4.0, 0.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let mesh = Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let src = manufactured_rhs(&model, Arc::new(CosineInTime { length: 1.0 }), &mesh, grid).unwrap();
        let pi = core::f64::consts::PI;
        let (x, t) = (0.3, 0.7);
        let g = -pi * t * math::sin(pi * x);
        let expect = -(g * g) * g;
        assert!((src.eta([x, 0.0], t)[0] - expect).abs() < 1e-13);
    }

    #[derive(Debug)]
    struct Sine;

    impl ExactSolution for Sine {
        fn value(&self, x: Vec2, t: f64) -> f64 {
            t * math::sin(core::f64::consts::PI * x[0])
        }
        fn time_derivative(&self, x: Vec2, _t: f64) -> f64 {
            math::sin(core::f64::consts::PI * x[0])
        }
        fn gradient(&self, x: Vec2, t: f64) -> Vec2 {
            [core::f64::consts::PI * t * math::cos(core::f64::consts::PI * x[0]), 0.0]
        }
    }

    #[derive(Debug)]
    struct Offset;

    impl ExactSolution for Offset {
        fn value(&self, _x: Vec2, _t: f64) -> f64 {
            1.0
        }
        fn time_derivative(&self, _x: Vec2, _t: f64) -> f64 {
            0.0
        }
        fn gradient(&self, _x: Vec2, _t: f64) -> Vec2 {
            [0.0, 0.0]
        }
    }

    #[test]
    fn incompatible_solutions_rejected() {
        let model = PStructureModel::p_laplace(2.0, 0.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let mesh = Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(manufactured_rhs(&model, Arc::new(Sine), &mesh, grid), Err(Error::Config(_))));
        assert!(matches!(manufactured_rhs(&model, Arc::new(Offset), &mesh, grid), Err(Error::Config(_))));
    }
}
