//! Outer splitting schemes in pseudo-time and their convergence monitors.
//!
//! With `R_ℓ = (sI + F_ℓ)⁻¹`:
//!
//! ```text
//! PR:  u₁ⁿ⁺¹ = R₁(sI - F₂)u₂ⁿ,   u₂ⁿ⁺¹ = R₂(sI - F₁)u₁ⁿ⁺¹
//! DR:  u₁ⁿ⁺¹ = R₁(sI - F₂)u₂ⁿ,   u₂ⁿ⁺¹ = R₂(s u₁ⁿ⁺¹ + F₂u₂ⁿ)
//! AS:  u_ℓⁿ⁺¹ = R_ℓ(s uⁿ),        uⁿ⁺¹ = (1/q) Σ_ℓ u_ℓⁿ⁺¹
//! ```
//!
//! `F_ℓ x` is never applied to an iterate directly: after `(sI + F_ℓ)x = r`
//! it is recovered as `r - s·x`. The shifted additive scheme runs AS on the
//! exponentially rescaled problem of [`shift_model`].

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::field::{SpaceTimeField, TimeGrid};
use crate::math::{self, Vec2};
use crate::mesh::Mesh;
use crate::model::{Coefficients, PStructureModel, SourceTerm, StructureConstants};
use crate::operators::{OperatorContext, Part};
use crate::resolvent::{resolvent_solve_with_guess, ResolventConfig, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    PeacemanRachford,
    DouglasRachford,
    Additive,
    AdditiveShifted,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::PeacemanRachford => "PR",
            SchemeKind::DouglasRachford => "DR",
            SchemeKind::Additive => "AS",
            SchemeKind::AdditiveShifted => "AS_shifted",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "PR" => Some(SchemeKind::PeacemanRachford),
            "DR" => Some(SchemeKind::DouglasRachford),
            "AS" => Some(SchemeKind::Additive),
            "AS_shifted" => Some(SchemeKind::AdditiveShifted),
            _ => None,
        }
    }

    fn is_two_domain(self) -> bool {
        matches!(self, SchemeKind::PeacemanRachford | SchemeKind::DouglasRachford)
    }
}

/// The method parameter s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SParameter {
    Fixed(f64),
    /// `s = C·√N` with N the sweep budget (additive schemes only).
    SqrtRule(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub s: SParameter,
    pub max_sweeps: usize,
    /// Stop once `‖uⁿ - uⁿ⁻¹‖_𝓗 ≤ stop_tol` (u₂ for PR and DR). Zero runs
    /// the full budget.
    pub stop_tol: f64,
    pub solver: SolverConfig,
    /// u⁰ (u₂⁰ for PR and DR) in the original variables; zero if absent.
    pub initial_guess: Option<SpaceTimeField>,
    /// Relative slack of the monotonicity checks on `‖vⁿ - v‖²`.
    pub monotone_slack: f64,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind, s: SParameter, max_sweeps: usize) -> Self {
        Self {
            kind,
            s,
            max_sweeps,
            stop_tol: 1e-10,
            solver: SolverConfig::default(),
            initial_guess: None,
            monotone_slack: 1e-10,
        }
    }

    pub fn s_value(&self) -> f64 {
        match self.s {
            SParameter::Fixed(s) => s,
            SParameter::SqrtRule(c) => c * math::sqrt(self.max_sweeps as f64),
        }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        if self.kind.is_two_domain() && q != 2 {
            return Err(Error::config(format!("{} needs exactly two subdomains, got q = {q}", self.kind.name())));
        }
        if q < 2 {
            return Err(Error::config(format!("additive splitting needs q >= 2, got {q}")));
        }
        if self.kind.is_two_domain() && matches!(self.s, SParameter::SqrtRule(_)) {
            return Err(Error::config("the s = C*sqrt(N) rule applies to additive schemes only"));
        }
        let s = self.s_value();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::config(format!("s must be positive, got {s}")));
        }
        if self.max_sweeps == 0 {
            return Err(Error::config("max_sweeps must be at least 1"));
        }
        if !(self.stop_tol >= 0.0) || !(self.monotone_slack >= 0.0) {
            return Err(Error::config("stop_tol and monotone_slack must be non-negative"));
        }
        self.solver.validate()
    }
}

/// Runs the q independent resolvent solves of an additive sweep.
///
/// Implementations may run them in any order or concurrently; results must
/// be returned indexed by ℓ.
pub trait SubdomainExecutor: Sync {
    fn run_all(&self, q: usize, solve: &(dyn Fn(usize) -> Result<SpaceTimeField> + Sync)) -> Vec<Result<SpaceTimeField>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl SubdomainExecutor for Sequential {
    fn run_all(&self, q: usize, solve: &(dyn Fn(usize) -> Result<SpaceTimeField> + Sync)) -> Vec<Result<SpaceTimeField>> {
        (0..q).map(solve).collect()
    }
}

/// Millisecond clock for per-sweep timings.
pub trait Clock {
    fn now_ms(&self) -> Option<f64>;
}

/// Records no timings.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now_ms(&self) -> Option<f64> {
        None
    }
}

/// Monitors of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    /// `‖uⁿ - u_ref‖_𝓗` in the original variables.
    pub err_h: Option<f64>,
    /// `‖ûⁿ - û_ref‖_𝓗` for the shifted scheme.
    pub err_h_shifted: Option<f64>,
    /// `c‖u_ℓⁿ - u_ref‖^p_{𝒱_ℓ}` per subdomain.
    pub err_k: Option<Vec<f64>>,
    pub pr_v: Option<f64>,
    pub pr_w: Option<f64>,
    pub increment: f64,
    pub newton_iterations: usize,
    pub wall_ms: Option<f64>,
}

impl SweepRecord {
    pub fn err_k_total(&self) -> Option<f64> {
        self.err_k.as_ref().map(|e| e.iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub scheme: SchemeKind,
    pub q: usize,
    pub s: f64,
    /// Constant c of the error functional `k_ℓ = c‖·‖^p`.
    pub monotone_constant: f64,
    /// `‖v⁰ - v‖_𝓗` and `‖w⁰ - w‖_𝓗` for PR and DR.
    pub pr_initial: Option<(f64, f64)>,
    pub rows: Vec<SweepRecord>,
    pub monotone_violations: usize,
}

impl IterationTrace {
    pub fn sweeps(&self) -> usize {
        self.rows.len()
    }

    pub fn last(&self) -> Option<&SweepRecord> {
        self.rows.last()
    }
}

#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    /// Final iterate in the original variables (u₂ for PR and DR).
    pub u: SpaceTimeField,
    /// Final subdomain iterates u_ℓ in the original variables.
    pub parts: Vec<SpaceTimeField>,
    /// Final shifted iterate ûᴺ of the shifted scheme.
    pub shifted: Option<SpaceTimeField>,
    pub trace: IterationTrace,
    pub s_used: f64,
    pub converged: bool,
}

/// A failed run with the rows recorded before the failure.
#[derive(Debug, Clone)]
pub struct SchemeFailure {
    pub error: Error,
    pub trace: Option<IterationTrace>,
}

impl fmt::Display for SchemeFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl From<Error> for SchemeFailure {
    fn from(error: Error) -> Self {
        Self { error, trace: None }
    }
}

/// α̂(t, z) = e^{-rt}α(t, e^{rt}z), β̂(t, y) = e^{-rt}β(t, e^{rt}y).
#[derive(Debug, Clone)]
pub struct ShiftedCoefficients {
    inner: Arc<dyn Coefficients>,
    rate: f64,
    t_final: f64,
}

impl ShiftedCoefficients {
    pub fn new(inner: Arc<dyn Coefficients>, rate: f64, t_final: f64) -> Self {
        Self { inner, rate, t_final }
    }

    fn factor(&self, t: f64) -> f64 {
        math::exp(self.rate * t)
    }
}

fn scale2(z: Vec2, a: f64) -> Vec2 {
    [a * z[0], a * z[1]]
}

impl Coefficients for ShiftedCoefficients {
    fn p(&self) -> f64 {
        self.inner.p()
    }

    fn alpha(&self, x: Vec2, t: f64, z: Vec2) -> Vec2 {
        let e = self.factor(t);
        scale2(self.inner.alpha(x, t, scale2(z, e)), 1.0 / e)
    }

    fn beta(&self, x: Vec2, t: f64, y: f64) -> f64 {
        let e = self.factor(t);
        self.inner.beta(x, t, e * y) / e
    }

    fn alpha_jacobian(&self, x: Vec2, t: f64, z: Vec2, eps: f64) -> [[f64; 2]; 2] {
        self.inner.alpha_jacobian(x, t, scale2(z, self.factor(t)), eps)
    }

    fn beta_derivative(&self, x: Vec2, t: f64, y: f64, eps: f64) -> f64 {
        self.inner.beta_derivative(x, t, self.factor(t) * y, eps)
    }

    fn alpha_secant(&self, x: Vec2, t: f64, z: Vec2, eps: f64) -> f64 {
        self.inner.alpha_secant(x, t, scale2(z, self.factor(t)), eps)
    }

    fn beta_secant(&self, x: Vec2, t: f64, y: f64, eps: f64) -> f64 {
        self.inner.beta_secant(x, t, self.factor(t) * y, eps)
    }

    fn structure_constants(&self) -> StructureConstants {
        // the factor e^{(p-2)rt} lies in [1, e^{(p-2)rT}]
        let k = self.inner.structure_constants();
        let grow = math::exp((self.p() - 2.0) * self.rate * self.t_final);
        StructureConstants {
            c_growth: k.c_growth * grow,
            ..k
        }
    }
}

/// η̂ = e^{-rt}η, η̂₀ = e^{-rt}η₀.
#[derive(Debug, Clone)]
pub struct ShiftedSource {
    inner: Arc<dyn SourceTerm>,
    rate: f64,
}

impl SourceTerm for ShiftedSource {
    fn eta0(&self, x: Vec2, t: f64) -> f64 {
        math::exp(-self.rate * t) * self.inner.eta0(x, t)
    }

    fn eta(&self, x: Vec2, t: f64) -> Vec2 {
        scale2(self.inner.eta(x, t), math::exp(-self.rate * t))
    }
}

/// Exponentially shifted model for `û_k = e^{-r t_k} u_k`.
///
/// Multiplying level k of the implicit-Euler residual by `e^{-r t_k}` gives
///
/// ```text
/// γ'(û_k - û_{k-1})/Δt + κγ'û_k + Â(t_k)û_k + f̂(t_k)
/// γ' = e^{-rΔt}γ,   κ = (e^{rΔt} - 1)/Δt
/// ```
///
/// so the shifted discrete problem is solved exactly by the rescaled
/// discrete solution, and `κγ' → rγ` as Δt → 0. The extra term uses the
/// capacity mass and is therefore split with the capacity weights.
pub fn shift_model(model: &PStructureModel, mesh: &Mesh, grid: TimeGrid, rate: f64) -> Result<PStructureModel> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::config(format!("shift rate must be non-negative, got {rate}")));
    }
    let mut gamma_min = f64::INFINITY;
    for e in 0..mesh.num_elements() {
        mesh.for_each_quad_point(e, |qp| gamma_min = gamma_min.min(model.gamma(qp.x)));
        for &v in mesh.element(e) {
            gamma_min = gamma_min.min(model.gamma(mesh.node(v)));
        }
    }
    if !(gamma_min > 0.0) {
        return Err(Error::config(format!(
            "shifted splitting needs gamma >= gamma0 > 0, sampled minimum is {gamma_min}"
        )));
    }
    let dt = grid.dt();
    let damp = math::exp(-rate * dt);
    Ok(PStructureModel {
        coefficients: Arc::new(ShiftedCoefficients::new(model.coefficients.clone(), rate, grid.t_final())),
        capacity: model.capacity.scaled(damp),
        source: Arc::new(ShiftedSource {
            inner: model.source.clone(),
            rate,
        }),
        capacity_reaction: (math::exp(rate * dt) - 1.0) / dt + model.capacity_reaction,
    })
}

/// `û_k = e^{-r t_k} u_k`.
pub fn shift_field(u: &SpaceTimeField, rate: f64) -> SpaceTimeField {
    scale_levels(u, -rate)
}

/// `u_k = e^{r t_k} û_k`.
pub fn unshift_field(u: &SpaceTimeField, rate: f64) -> SpaceTimeField {
    scale_levels(u, rate)
}

fn scale_levels(u: &SpaceTimeField, rate: f64) -> SpaceTimeField {
    let grid = u.grid();
    let mut out = u.clone();
    for k in 1..=grid.steps() {
        let f = math::exp(rate * grid.time(k));
        out.level_mut(k).iter_mut().for_each(|v| *v *= f);
    }
    out
}

/// Shift rate of the shifted additive scheme: the number of subdomains.
pub fn shift_rate(ctx: &OperatorContext) -> f64 {
    ctx.q() as f64
}

/// The shifted operator context used by the shifted additive scheme.
pub fn shifted_context(ctx: &OperatorContext) -> Result<OperatorContext> {
    let model = shift_model(ctx.model(), ctx.mesh(), ctx.grid(), shift_rate(ctx))?;
    Ok(ctx.with_model(model))
}

/// `c·‖u - u_ref‖^p_{𝒱_ℓ}` for a global field u.
pub fn k_functional(ctx: &OperatorContext, l: usize, c: f64, u: &SpaceTimeField, u_ref: &SpaceTimeField) -> Result<f64> {
    let part = Part::Sub(l);
    let e = ctx.restrict(part, &u.minus(u_ref)?)?;
    Ok(c * ctx.v_norm_p_pow(part, &e)?)
}

struct Monitor<'a> {
    ctx: &'a OperatorContext,
    u_ref: Option<&'a SpaceTimeField>,
    c: f64,
}

impl Monitor<'_> {
    fn err_h(&self, u: &SpaceTimeField) -> Result<Option<f64>> {
        match self.u_ref {
            Some(r) => Ok(Some(self.ctx.h_norm(Part::Global, &u.minus(r)?)?)),
            None => Ok(None),
        }
    }

    fn err_k(&self, parts: &[&SpaceTimeField]) -> Result<Option<Vec<f64>>> {
        match self.u_ref {
            Some(r) => parts
                .iter()
                .enumerate()
                .map(|(l, u)| k_functional(self.ctx, l, self.c, u, r))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            None => Ok(None),
        }
    }
}

fn elapsed(clock: &dyn Clock, start: Option<f64>) -> Option<f64> {
    match (start, clock.now_ms()) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    }
}

/// [`run_scheme_with`] with sequential subdomain solves and no timings.
pub fn run_scheme(
    ctx: &OperatorContext,
    cfg: &SchemeConfig,
    u_ref: Option<&SpaceTimeField>,
) -> core::result::Result<SchemeOutcome, SchemeFailure> {
    run_scheme_with(ctx, cfg, u_ref, &Sequential, &NoClock)
}

/// Runs sweeps until the increment drops below `stop_tol` or the budget is
/// spent. Error monitors are filled only when `u_ref` is given.
pub fn run_scheme_with(
    ctx: &OperatorContext,
    cfg: &SchemeConfig,
    u_ref: Option<&SpaceTimeField>,
    executor: &dyn SubdomainExecutor,
    clock: &dyn Clock,
) -> core::result::Result<SchemeOutcome, SchemeFailure> {
    cfg.validate(ctx.q())?;
    let n = ctx.num_nodes(Part::Global);
    for f in cfg.initial_guess.iter().chain(u_ref) {
        if f.n_nodes() != n || f.grid() != ctx.grid() {
            return Err(Error::contract("initial guess and reference must be global fields on the context grid").into());
        }
    }
    let mut trace = IterationTrace {
        scheme: cfg.kind,
        q: ctx.q(),
        s: cfg.s_value(),
        monotone_constant: ctx.model().coefficients.structure_constants().c_mono,
        pr_initial: None,
        rows: Vec::new(),
        monotone_violations: 0,
    };
    let result = match cfg.kind {
        SchemeKind::PeacemanRachford | SchemeKind::DouglasRachford => run_two_domain(ctx, cfg, u_ref, clock, &mut trace),
        SchemeKind::Additive => run_additive(ctx, None, cfg, u_ref, executor, clock, &mut trace),
        SchemeKind::AdditiveShifted => match shifted_context(ctx) {
            Ok(hat) => run_additive(ctx, Some(&hat), cfg, u_ref, executor, clock, &mut trace),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok((u, parts, shifted, converged)) => Ok(SchemeOutcome {
            u,
            parts,
            shifted,
            s_used: trace.s,
            trace,
            converged,
        }),
        Err(error) => Err(SchemeFailure {
            error,
            trace: Some(trace),
        }),
    }
}

type Finals = (SpaceTimeField, Vec<SpaceTimeField>, Option<SpaceTimeField>, bool);

fn run_two_domain(
    ctx: &OperatorContext,
    cfg: &SchemeConfig,
    u_ref: Option<&SpaceTimeField>,
    clock: &dyn Clock,
    trace: &mut IterationTrace,
) -> Result<Finals> {
    let s = trace.s;
    let rcfg = ResolventConfig::with_solver(s, cfg.solver);
    let monitor = Monitor {
        ctx,
        u_ref,
        c: trace.monotone_constant,
    };
    let mut u2 = cfg.initial_guess.clone().unwrap_or_else(|| ctx.zeros(Part::Global));
    let mut f2u2 = ctx.apply_f_global_h(Part::Sub(1), &u2)?;
    let mut u1: Option<SpaceTimeField> = None;

    // v = (sI + F₂)u_ref, w = (sI - F₂)u_ref
    let vw_ref = match u_ref {
        Some(r) => {
            let f2 = ctx.apply_f_global_h(Part::Sub(1), r)?;
            Some((r.combine(s, &f2, 1.0)?, r.combine(s, &f2, -1.0)?))
        }
        None => None,
    };
    let mut vw_prev = match &vw_ref {
        Some((v, w)) => {
            let dv = ctx.h_norm(Part::Global, &u2.combine(s, &f2u2, 1.0)?.minus(v)?)?;
            let dw = ctx.h_norm(Part::Global, &u2.combine(s, &f2u2, -1.0)?.minus(w)?)?;
            trace.pr_initial = Some((dv, dw));
            Some((dv, dw))
        }
        None => None,
    };
    let slack = trace.pr_initial.map_or(0.0, |(v0, _)| cfg.monotone_slack * (1.0 + v0 * v0));

    for sweep in 1..=cfg.max_sweeps {
        let start = clock.now_ms();
        let rhs1 = u2.combine(s, &f2u2, -1.0)?;
        let (u1_new, st1) =
            resolvent_solve_with_guess(ctx, 0, &rcfg, &rhs1, u1.as_ref()).map_err(|e| e.at_sweep(sweep))?;
        let rhs2 = match cfg.kind {
            // (sI - F₁)u₁ = 2s·u₁ - rhs₁
            SchemeKind::PeacemanRachford => u1_new.combine(2.0 * s, &rhs1, -1.0)?,
            _ => u1_new.combine(s, &f2u2, 1.0)?,
        };
        let (u2_new, st2) =
            resolvent_solve_with_guess(ctx, 1, &rcfg, &rhs2, Some(&u2)).map_err(|e| e.at_sweep(sweep))?;
        let f2u2_new = rhs2.combine(1.0, &u2_new, -s)?;
        let increment = ctx.h_norm(Part::Global, &u2_new.minus(&u2)?)?;

        let (mut pr_v, mut pr_w) = (None, None);
        if let (Some((v, w)), Some((v_prev, w_prev))) = (&vw_ref, vw_prev) {
            // vⁿ = (sI + F₂)u₂ⁿ is the right-hand side of the second solve
            let dv = ctx.h_norm(Part::Global, &rhs2.minus(v)?)?;
            let dw = ctx.h_norm(Part::Global, &u2_new.combine(2.0 * s, &rhs2, -1.0)?.minus(w)?)?;
            let violated = match cfg.kind {
                SchemeKind::PeacemanRachford => {
                    dv * dv > w_prev * w_prev + slack || w_prev * w_prev > v_prev * v_prev + slack
                }
                _ => dv * dv > v_prev * v_prev + slack,
            };
            if violated {
                trace.monotone_violations += 1;
            }
            pr_v = Some(dv);
            pr_w = Some(dw);
            vw_prev = Some((dv, dw));
        }
        let err_h = monitor.err_h(&u2_new)?;
        let err_k = monitor.err_k(&[&u1_new, &u2_new])?;
        u1 = Some(u1_new);
        u2 = u2_new;
        f2u2 = f2u2_new;
        trace.rows.push(SweepRecord {
            sweep,
            err_h,
            err_h_shifted: None,
            err_k,
            pr_v,
            pr_w,
            increment,
            newton_iterations: st1.iterations.max(st2.iterations),
            wall_ms: elapsed(clock, start),
        });
        if cfg.stop_tol > 0.0 && increment <= cfg.stop_tol {
            let u1 = u1.unwrap_or_else(|| u2.clone());
            return Ok((u2.clone(), vec![u1, u2], None, true));
        }
    }
    let u1 = u1.unwrap_or_else(|| u2.clone());
    Ok((u2.clone(), vec![u1, u2], None, false))
}

#[allow(clippy::too_many_arguments)]
fn run_additive(
    ctx: &OperatorContext,
    shifted: Option<&OperatorContext>,
    cfg: &SchemeConfig,
    u_ref: Option<&SpaceTimeField>,
    executor: &dyn SubdomainExecutor,
    clock: &dyn Clock,
    trace: &mut IterationTrace,
) -> Result<Finals> {
    let s = trace.s;
    let q = ctx.q();
    let rcfg = ResolventConfig::with_solver(s, cfg.solver);
    let rate = shift_rate(ctx);
    let work = shifted.unwrap_or(ctx);
    let to_work = |u: &SpaceTimeField| if shifted.is_some() { shift_field(u, rate) } else { u.clone() };
    let to_orig = |u: &SpaceTimeField| if shifted.is_some() { unshift_field(u, rate) } else { u.clone() };
    let monitor = Monitor {
        ctx,
        u_ref,
        c: trace.monotone_constant,
    };
    let ref_hat = match (shifted, u_ref) {
        (Some(_), Some(r)) => Some(shift_field(r, rate)),
        _ => None,
    };

    let mut u = to_work(&cfg.initial_guess.clone().unwrap_or_else(|| ctx.zeros(Part::Global)));
    let mut parts: Vec<SpaceTimeField> = Vec::new();
    for sweep in 1..=cfg.max_sweeps {
        let start = clock.now_ms();
        let rhs = u.scaled(s);
        let guesses = &parts;
        let solve = |l: usize| {
            resolvent_solve_with_guess(work, l, &rcfg, &rhs, guesses.get(l)).map(|(x, _)| x)
        };
        let results = executor.run_all(q, &solve);
        if results.len() != q {
            return Err(Error::contract(format!("executor returned {} results for q = {q}", results.len())).at_sweep(sweep));
        }
        let new_parts = results
            .into_iter()
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_sweep(sweep))?;
        // fixed ascending-ℓ summation
        let mut u_new = new_parts[0].clone();
        for p in &new_parts[1..] {
            u_new.axpy(1.0, p)?;
        }
        u_new.scale(1.0 / q as f64);
        let increment = work.h_norm(Part::Global, &u_new.minus(&u)?)?;

        let orig = to_orig(&u_new);
        let orig_parts: Vec<SpaceTimeField> = new_parts.iter().map(&to_orig).collect();
        let err_h = monitor.err_h(&orig)?;
        let err_h_shifted = match &ref_hat {
            Some(r) => Some(work.h_norm(Part::Global, &u_new.minus(r)?)?),
            None => None,
        };
        let err_k = monitor.err_k(&orig_parts.iter().collect::<Vec<_>>())?;
        u = u_new;
        parts = new_parts;
        trace.rows.push(SweepRecord {
            sweep,
            err_h,
            err_h_shifted,
            err_k,
            pr_v: None,
            pr_w: None,
            increment,
            newton_iterations: 0,
            wall_ms: elapsed(clock, start),
        });
        if cfg.stop_tol > 0.0 && increment <= cfg.stop_tol {
            return Ok(finish(&u, parts, shifted.is_some(), &to_orig, true));
        }
    }
    Ok(finish(&u, parts, shifted.is_some(), &to_orig, false))
}

fn finish(
    u: &SpaceTimeField,
    parts: Vec<SpaceTimeField>,
    shifted: bool,
    to_orig: &dyn Fn(&SpaceTimeField) -> SpaceTimeField,
    converged: bool,
) -> Finals {
    (
        to_orig(u),
        parts.iter().map(to_orig).collect(),
        shifted.then(|| u.clone()),
        converged,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::Decomposition;
    use crate::mesh::MeshSpec;
    use crate::model::{Capacity, PLaplace, ZeroSource};

    fn ctx(q: usize) -> OperatorContext {
        let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, 16)).unwrap());
        let model = PStructureModel::p_laplace(3.0, 1.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        let dec = Arc::new(Decomposition::build(&mesh, q, 0.25, 0.1).unwrap());
        OperatorContext::new(mesh, model, dec, TimeGrid::new(1.0, 4).unwrap()).unwrap()
    }

    #[test]
    fn zero_source_zero_start_stays_zero() {
        for kind in [
            SchemeKind::PeacemanRachford,
            SchemeKind::DouglasRachford,
            SchemeKind::Additive,
            SchemeKind::AdditiveShifted,
        ] {
            let c = ctx(2);
            let mut cfg = SchemeConfig::new(kind, SParameter::Fixed(1.0), 3);
            cfg.stop_tol = 0.0;
            let zero = c.zeros(Part::Global);
            let out = run_scheme(&c, &cfg, Some(&zero)).unwrap();
            assert_eq!(out.trace.sweeps(), 3);
            assert_eq!(out.u.max_abs(), 0.0, "{kind:?}");
            assert!(out.trace.rows.iter().all(|r| r.err_h == Some(0.0)));
        }
    }

    #[test]
    fn two_domain_schemes_need_two_subdomains() {
        let c = ctx(3);
        let cfg = SchemeConfig::new(SchemeKind::PeacemanRachford, SParameter::Fixed(1.0), 3);
        assert!(matches!(run_scheme(&c, &cfg, None).unwrap_err().error, Error::Config(_)));
        let cfg = SchemeConfig::new(SchemeKind::DouglasRachford, SParameter::SqrtRule(1.0), 3);
        assert!(run_scheme(&ctx(2), &cfg, None).is_err());
    }

    #[test]
    fn sqrt_rule() {
        let cfg = SchemeConfig::new(SchemeKind::Additive, SParameter::SqrtRule(2.0), 64);
        assert_eq!(cfg.s_value(), 16.0);
    }

    #[test]
    fn shift_at_time_zero_is_identity() {
        let inner: Arc<dyn Coefficients> = Arc::new(PLaplace::new(3.0, 0.5).unwrap());
        let sh = ShiftedCoefficients::new(inner.clone(), 2.0, 1.0);
        let z = [0.7, -0.2];
        assert_eq!(sh.alpha([0.0; 2], 0.0, z), inner.alpha([0.0; 2], 0.0, z));
        assert_eq!(sh.beta([0.0; 2], 0.0, -1.3), inner.beta([0.0; 2], 0.0, -1.3));
    }

    #[test]
    fn shift_round_trip() {
        let grid = TimeGrid::new(1.0, 5).unwrap();
        let u = SpaceTimeField::from_fn(grid, 4, |k, i| (k * 3 + i) as f64 * 0.1 - 0.4);
        let back = unshift_field(&shift_field(&u, 2.0), 2.0);
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
        }
    }

    #[test]
    fn shifted_linear_reaction() {
        // p = 2, λ = 0, γ = 1, rate 2: e^{-rt}β(e^{rt}ŷ) + κγ'ŷ → 3ŷ as Δt → 0
        let mesh = Mesh::build(&MeshSpec::interval(1.0, 4)).unwrap();
        let model = PStructureModel::p_laplace(2.0, 0.0, Capacity::Constant(1.0), Arc::new(ZeroSource)).unwrap();
        for (steps, tol) in [(10, 0.2), (1000, 2.1e-3), (100_000, 2.1e-5)] {
            let grid = TimeGrid::new(1.0, steps).unwrap();
            let hat = shift_model(&model, &mesh, grid, 2.0).unwrap();
            let y = 0.8;
            let total = hat.coefficients.beta([0.3, 0.0], 0.4, y) + hat.capacity_reaction * hat.gamma([0.3, 0.0]) * y;
            assert!((total - 3.0 * y).abs() <= tol * y, "steps {steps}: {total}");
        }
    }

    #[test]
    fn shift_rejects_degenerate_capacity() {
        let mesh = Mesh::build(&MeshSpec::interval(1.0, 8)).unwrap();
        let model = PStructureModel::p_laplace(
            2.0,
            0.0,
            Capacity::Indicator {
                value: 1.0,
                zero_region: (0.0, 0.5),
            },
            Arc::new(ZeroSource),
        )
        .unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        assert!(matches!(shift_model(&model, &mesh, grid, 2.0), Err(Error::Config(_))));
    }
}
