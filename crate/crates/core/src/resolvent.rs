//! Subdomain resolvents `u = (sI + F_ℓ)⁻¹ g` by implicit-Euler time marching
//! with a damped Newton method per level.
//!
//! On Ω_ℓ the level-k system, in dual form, is
//!
//! ```text
//! s·M u_k + C(u_k - u_{k-1})/Δt + A_ℓ(t_k)u_k + f_ℓ(t_k) = M (R_ℓ g)_k
//! ```
//!
//! with M the lumped mass. Off Ω_ℓ the operator vanishes, so `u = g/s` there.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::SpaceTimeField;
use crate::linalg::{pcg, CsrMatrix};
use crate::operators::{Linearization, OperatorContext, Part};

/// Linear solver for the Newton systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Tridiagonal elimination in 1D, conjugate gradients otherwise.
    Auto,
    TridiagonalDirect,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Initial step length in (0, 1].
    pub damping: f64,
    /// Regularisation of the flux Jacobian; the residual is never regularised.
    pub epsilon_reg: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            damping: 1.0,
            epsilon_reg: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearConfig {
    pub solver: LinearSolver,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            solver: LinearSolver::Auto,
            cg_tol: 1e-13,
            cg_max_iters: 20_000,
        }
    }
}

/// Newton and linear solver settings without the resolvent parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverConfig {
    pub newton: NewtonConfig,
    pub linear: LinearConfig,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let n = &self.newton;
        if n.max_iters == 0 {
            return Err(Error::config("newton.max_iters must be at least 1"));
        }
        if !(n.abs_tol > 0.0 && n.abs_tol.is_finite()) || !(n.rel_tol > 0.0 && n.rel_tol.is_finite()) {
            return Err(Error::config("newton tolerances must be positive"));
        }
        if !(n.damping > 0.0 && n.damping <= 1.0) {
            return Err(Error::config(format!("newton.damping must be in (0, 1], got {}", n.damping)));
        }
        if !(n.epsilon_reg >= 0.0 && n.epsilon_reg.is_finite()) {
            return Err(Error::config("newton.epsilon_reg must be non-negative"));
        }
        if !(self.linear.cg_tol > 0.0) || self.linear.cg_max_iters == 0 {
            return Err(Error::config("cg_tol must be positive and cg_max_iters at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventConfig {
    pub s: f64,
    pub newton: NewtonConfig,
    pub linear: LinearConfig,
}

impl ResolventConfig {
    pub fn new(s: f64) -> Self {
        Self::with_solver(s, SolverConfig::default())
    }

    pub fn with_solver(s: f64, solver: SolverConfig) -> Self {
        Self {
            s,
            newton: solver.newton,
            linear: solver.linear,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            newton: self.newton,
            linear: self.linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::config(format!("s must be positive, got {}", self.s)));
        }
        self.solver().validate()
    }
}

/// Convergence record of one Newton solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NewtonStats {
    /// Linear solves performed (Newton and Picard steps).
    pub iterations: usize,
    pub picard_steps: usize,
    pub residual: f64,
    pub tolerance: f64,
}

impl NewtonStats {
    fn absorb(&mut self, other: &NewtonStats) {
        self.iterations = self.iterations.max(other.iterations);
        self.picard_steps += other.picard_steps;
        if other.residual > self.residual {
            self.residual = other.residual;
            self.tolerance = other.tolerance;
        }
    }
}

fn solve_linear(ctx: &OperatorContext, cfg: &LinearConfig, j: &CsrMatrix, r: &[f64]) -> Result<Vec<f64>> {
    let direct = match cfg.solver {
        LinearSolver::Auto => ctx.mesh().dim() == 1,
        LinearSolver::TridiagonalDirect => true,
        LinearSolver::ConjugateGradient => false,
    };
    if direct {
        j.solve_tridiagonal(r)
    } else {
        pcg(j, r, cfg.cg_tol, cfg.cg_max_iters).map(|(x, _)| x)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// One implicit-Euler level on `part`: solves
/// `s·M u + C(u - u_prev)/Δt + κC u + A(t_k)u + f(t_k) = rhs` (dual) for u.
///
/// `s = 0` gives the plain time step of the monolithic problem. The
/// iteration starts from `guess`, or from `u_prev` when none is given.
#[allow(clippy::too_many_arguments)]
pub fn newton_time_step(
    ctx: &OperatorContext,
    part: Part,
    s: f64,
    solver: &SolverConfig,
    k: usize,
    u_prev: &[f64],
    rhs: &[f64],
    guess: Option<&[f64]>,
) -> Result<(Vec<f64>, NewtonStats)> {
    let n = ctx.num_nodes(part);
    if u_prev.len() != n || rhs.len() != n || guess.is_some_and(|g| g.len() != n) {
        return Err(Error::contract(format!("newton_time_step on {part:?} expects vectors of length {n}")));
    }
    let cfg = &solver.newton;
    let zeros = vec![0.0; n];
    let scale = ctx.dual_norm(part, &ctx.level_residual(part, k, &zeros, u_prev, s, Some(rhs))?);
    let tol = cfg.abs_tol + cfg.rel_tol * scale;
    let mut u = guess.unwrap_or(u_prev).to_vec();
    let mut r = ctx.level_residual(part, k, &u, u_prev, s, Some(rhs))?;
    let mut res = ctx.dual_norm(part, &r);
    let mut stats = NewtonStats {
        iterations: 0,
        picard_steps: 0,
        residual: res,
        tolerance: tol,
    };
    let eps = cfg.epsilon_reg;
    while res > tol {
        if stats.iterations >= cfg.max_iters {
            return Err(Error::Solver {
                what: format!("Newton did not converge on {part:?} at level {k} in {} iterations", cfg.max_iters),
                residual: res,
            });
        }
        stats.iterations += 1;
        let j = ctx.jacobian(part, k, &u, s, Linearization::Newton { eps })?;
        let delta = solve_linear(ctx, &solver.linear, &j, &r)?;
        // Round-off floor: the update no longer changes u.
        if max_abs(&delta) <= 8.0 * f64::EPSILON * max_abs(&u).max(1.0) {
            break;
        }
        let mut step = cfg.damping;
        let mut accepted = false;
        for _ in 0..=30 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - step * d).collect();
            if let Ok(rt) = ctx.level_residual(part, k, &trial, u_prev, s, Some(rhs)) {
                let rt_norm = ctx.dual_norm(part, &rt);
                if rt_norm < res {
                    u = trial;
                    r = rt;
                    res = rt_norm;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            let kp = ctx.jacobian(part, k, &u, s, Linearization::Picard { eps })?;
            let delta = solve_linear(ctx, &solver.linear, &kp, &r)?;
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - d).collect();
            let rt = ctx.level_residual(part, k, &trial, u_prev, s, Some(rhs))?;
            let rt_norm = ctx.dual_norm(part, &rt);
            stats.picard_steps += 1;
            if !(rt_norm < res) && res <= 1e3 * tol {
                // Stuck just above the tolerance at round-off level.
                break;
            }
            u = trial;
            r = rt;
            res = rt_norm;
        }
    }
    stats.residual = res;
    Ok((u, stats))
}

/// `(sI + F_ℓ)⁻¹ g` for a global 𝓗 field g.
pub fn resolvent_solve(ctx: &OperatorContext, l: usize, cfg: &ResolventConfig, g: &SpaceTimeField) -> Result<SpaceTimeField> {
    resolvent_solve_with_guess(ctx, l, cfg, g, None).map(|(u, _)| u)
}

/// [`resolvent_solve`] with an optional global initial guess for the Newton
/// iterations, returning the worst per-level statistics.
pub fn resolvent_solve_with_guess(
    ctx: &OperatorContext,
    l: usize,
    cfg: &ResolventConfig,
    g: &SpaceTimeField,
    guess: Option<&SpaceTimeField>,
) -> Result<(SpaceTimeField, NewtonStats)> {
    cfg.validate()?;
    if l >= ctx.q() {
        return Err(Error::contract(format!("subdomain {l} out of range (q = {})", ctx.q())));
    }
    if g.n_nodes() != ctx.num_nodes(Part::Global) || g.grid() != ctx.grid() {
        return Err(Error::contract("resolvent right-hand side must be a global field on the context grid"));
    }
    if !g.is_finite() {
        return Err(Error::numeric("resolvent right-hand side is not finite"));
    }
    let part = Part::Sub(l);
    let s = cfg.s;
    let gl = ctx.restrict(part, g)?;
    let guess_l = guess.map(|x| ctx.restrict(part, x)).transpose()?;
    let mass = ctx.lumped_mass(part);
    let n = gl.n_nodes();
    let mut ul = SpaceTimeField::zeros(ctx.grid(), n);
    let mut prev = vec![0.0; n];
    let mut stats = NewtonStats::default();
    let solver = cfg.solver();
    for k in 1..=ctx.grid().steps() {
        let rhs: Vec<f64> = gl.level(k).iter().zip(mass).map(|(v, m)| m * v).collect();
        let (uk, st) = newton_time_step(ctx, part, s, &solver, k, &prev, &rhs, guess_l.as_ref().map(|x| x.level(k)))?;
        stats.absorb(&st);
        ul.level_mut(k).copy_from_slice(&uk);
        prev = uk;
    }
    let mut out = g.clone();
    out.values_mut().iter_mut().for_each(|v| *v /= s);
    let sub = ctx.decomposition().subdomain(l);
    for k in 1..=ctx.grid().steps() {
        let lvl = out.level_mut(k);
        for (li, &gi) in sub.nodes().iter().enumerate() {
            lvl[gi] = ul.level(k)[li];
        }
    }
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Decomposition;
    use crate::field::TimeGrid;
    use crate::mesh::{Mesh, MeshSpec};
    use crate::model::{Capacity, ConstantSource, PStructureModel, ZeroSource};
    use alloc::sync::Arc;

    fn ctx(p: f64, zero_source: bool) -> OperatorContext {
        let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, 16)).unwrap());
        let source: Arc<dyn crate::model::SourceTerm> = if zero_source {
            Arc::new(ZeroSource)
        } else {
            Arc::new(ConstantSource {
                eta0: 0.5,
                eta: [0.1, 0.0],
            })
        };
        let model = PStructureModel::p_laplace(p, 1.0, Capacity::Constant(1.0), source).unwrap();
        let dec = Arc::new(Decomposition::build(&mesh, 2, 0.25, 0.1).unwrap());
        OperatorContext::new(mesh, model, dec, TimeGrid::new(1.0, 4).unwrap()).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = ctx(3.0, true);
        let g = c.zeros(Part::Global);
        let u = resolvent_solve(&c, 0, &ResolventConfig::new(1.0), &g).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn off_subdomain_is_g_over_s() {
        let c = ctx(3.0, false);
        let g = SpaceTimeField::from_fn(c.grid(), 17, |_, _| 4.0);
        let u = resolvent_solve(&c, 0, &ResolventConfig::new(2.0), &g).unwrap();
        let sub = c.decomposition().subdomain(0);
        for k in 1..=4 {
            for i in 0..17 {
                if !sub.contains_node(i) {
                    assert_eq!(u.level(k)[i], 2.0);
                }
            }
        }
    }

    #[test]
    fn linear_case_takes_one_newton_step() {
        let c = ctx(2.0, false);
        let n = c.num_nodes(Part::Sub(1));
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin() * 0.1).collect();
        let prev = vec![0.0; n];
        let (_, st) = newton_time_step(&c, Part::Sub(1), 1.0, &SolverConfig::default(), 1, &prev, &rhs, None).unwrap();
        assert_eq!(st.iterations, 1);
        assert!(st.residual <= st.tolerance);
    }

    #[test]
    fn recovers_known_level_solution() {
        let c = ctx(4.0, false);
        let part = Part::Sub(0);
        let n = c.num_nodes(part);
        let ustar: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).cos()).collect();
        let prev: Vec<f64> = (0..n).map(|i| 0.2 * i as f64 / n as f64).collect();
        let zero = vec![0.0; n];
        let rhs = c.level_residual(part, 2, &ustar, &prev, 1.5, None).unwrap();
        let _ = zero;
        let (u, _) = newton_time_step(&c, part, 1.5, &SolverConfig::default(), 2, &prev, &rhs, None).unwrap();
        for (a, b) in u.iter().zip(&ustar) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_rhs_stays_at_zero() {
        let c = ctx(3.0, true);
        let n = c.num_nodes(Part::Sub(0));
        let z = vec![0.0; n];
        let (u, st) = newton_time_step(&c, Part::Sub(0), 1.0, &SolverConfig::default(), 1, &z, &z, None).unwrap();
        assert!(st.iterations <= 1);
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_config() {
        let c = ctx(3.0, true);
        let g = c.zeros(Part::Global);
        assert!(resolvent_solve(&c, 0, &ResolventConfig::new(0.0), &g).is_err());
        let mut cfg = ResolventConfig::new(1.0);
        cfg.newton.damping = 1.5;
        assert!(resolvent_solve(&c, 0, &cfg, &g).is_err());
        assert!(resolvent_solve(&c, 5, &ResolventConfig::new(1.0), &g).is_err());
    }
}
