//! Property checks run by `verify`.
//!
//! Each check reports a measured value and the bound it must respect.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stdd_core::model::{check_p_structure, Condition, SamplerConfig};
use stdd_core::resolvent::resolvent_solve;
use stdd_core::{OperatorContext, Part, ResolventConfig, SpaceTimeField};

use crate::error::CliError;
use crate::experiment::random_field;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `value ≤ bound` when true, otherwise `value ≥ bound`.
    pub upper: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            upper: true,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            bound,
            upper: false,
        }
    }

    pub fn passed(&self) -> bool {
        if self.upper {
            self.value <= self.bound
        } else {
            self.value >= self.bound
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} {:>12.4e} {} {:.1e}",
            if self.passed() { "ok  " } else { "FAIL" },
            self.name,
            self.value,
            if self.upper { "<=" } else { ">=" },
            self.bound
        )
    }
}

/// Sampled worst margins of the four structure conditions, normalised so
/// that negative means violated.
pub fn p_structure(ctx: &OperatorContext, samples: usize, seed: u64) -> Result<Vec<Check>, CliError> {
    let coeffs = ctx.model().coefficients.as_ref();
    let mut cfg = SamplerConfig::for_model(coeffs, ctx.mesh().dim(), seed);
    cfg.num_samples = samples;
    cfg.extent = [ctx.mesh().extent(0), if ctx.mesh().dim() == 2 { ctx.mesh().extent(1) } else { 0.0 }];
    cfg.t_max = ctx.grid().t_final();
    let rep = check_p_structure(coeffs, &cfg)?;
    Ok(Condition::ALL
        .iter()
        .map(|&c| Check::at_least(format!("p_structure.{}", c.name()), rep.margin(c), -1e-12))
        .collect())
}

pub fn partition_of_unity(ctx: &OperatorContext) -> Vec<Check> {
    let dec = ctx.decomposition();
    let [a, b, g] = dec.partition_of_unity_error(ctx.mesh());
    vec![
        Check::at_most("partition_of_unity.a", a, 1e-12),
        Check::at_most("partition_of_unity.b", b, 1e-12),
        Check::at_most("partition_of_unity.g", g, 1e-12),
        Check::at_most(
            "capacity_reconstruction",
            dec.capacity_reconstruction_error(ctx.mesh(), &ctx.model().capacity),
            1e-12,
        ),
        Check::at_least("b_positivity", dec.min_b(), dec.c_min() * (1.0 - 1e-12)),
    ]
}

/// `|(E_ℓu_ℓ, v)_𝓗 - (u_ℓ, R_ℓv)_{𝓗_ℓ}|` relative to `‖u_ℓ‖‖v‖`, worst over
/// subdomains and random pairs.
pub fn adjointness(ctx: &OperatorContext, pairs: usize, rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let grid = ctx.grid();
    let mut worst: f64 = 0.0;
    for l in 0..ctx.q() {
        let part = Part::Sub(l);
        for _ in 0..pairs {
            let ul = random_field(rng, grid, ctx.num_nodes(part), 1.0);
            let v = random_field(rng, grid, ctx.num_nodes(Part::Global), 1.0);
            let lhs = ctx.h_inner(Part::Global, &ctx.extend(part, &ul)?, &v)?;
            let rhs = ctx.h_inner(part, &ul, &ctx.restrict(part, &v)?)?;
            let scale = ctx.h_norm(part, &ul)? * ctx.h_norm(Part::Global, &v)?;
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    Ok(Check::at_most("restriction_extension_adjoint", worst, 1e-12))
}

/// `‖Σ_ℓ E_ℓF_ℓR_ℓu - Fu‖_𝓗 / ‖Fu‖_𝓗`, worst over random fields.
pub fn decomposition_identity_error(ctx: &OperatorContext, u: &SpaceTimeField) -> Result<f64, CliError> {
    let full = ctx.apply_f_global_h(Part::Global, u)?;
    let mut sum = ctx.zeros(Part::Global);
    for l in 0..ctx.q() {
        sum.axpy(1.0, &ctx.apply_f_global_h(Part::Sub(l), u)?)?;
    }
    Ok(ctx.h_norm(Part::Global, &sum.minus(&full)?)? / ctx.h_norm(Part::Global, &full)?)
}

pub fn decomposition_identity(ctx: &OperatorContext, fields: usize, rng: &mut ChaCha8Rng) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..fields {
        let u = random_field(rng, ctx.grid(), ctx.num_nodes(Part::Global), 1.0);
        worst = worst.max(decomposition_identity_error(ctx, &u)?);
    }
    Ok(Check::at_most("decomposition_identity", worst, 1e-11))
}

/// `s‖R_ℓ(g₁) - R_ℓ(g₂)‖_𝓗 / ‖g₁ - g₂‖_𝓗` for global fields g.
pub fn resolvent_ratio(
    ctx: &OperatorContext,
    l: usize,
    cfg: &ResolventConfig,
    g1: &SpaceTimeField,
    g2: &SpaceTimeField,
) -> Result<f64, CliError> {
    let r1 = resolvent_solve(ctx, l, cfg, g1)?;
    let r2 = resolvent_solve(ctx, l, cfg, g2)?;
    Ok(cfg.s * ctx.h_norm(Part::Global, &r1.minus(&r2)?)? / ctx.h_norm(Part::Global, &g1.minus(g2)?)?)
}

pub fn nonexpansiveness(
    ctx: &OperatorContext,
    cfg: &ResolventConfig,
    pairs: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Check, CliError> {
    let mut worst: f64 = 0.0;
    let n = ctx.num_nodes(Part::Global);
    for l in 0..ctx.q() {
        for _ in 0..pairs {
            let g1 = random_field(rng, ctx.grid(), n, cfg.s);
            let g2 = random_field(rng, ctx.grid(), n, cfg.s);
            worst = worst.max(resolvent_ratio(ctx, l, cfg, &g1, &g2)?);
        }
    }
    Ok(Check::at_most(format!("resolvent_nonexpansive(s={})", cfg.s), worst, 1.0 + 1e-8))
}

/// The full verify suite. Operator checks assume a monotone model, so they
/// are skipped when the structure sampling already fails.
pub fn run_all(ctx: &OperatorContext, s: f64, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut out = p_structure(ctx, 10_000, seed)?;
    if out.iter().any(|c| !c.passed()) {
        return Ok(out);
    }
    out.extend(partition_of_unity(ctx));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.push(adjointness(ctx, 5, &mut rng)?);
    out.push(decomposition_identity(ctx, 5, &mut rng)?);
    let mut cfg = ResolventConfig::new(s);
    cfg.newton.abs_tol = 1e-13;
    out.push(nonexpansiveness(ctx, &cfg, 3, &mut rng)?);
    Ok(out)
}
