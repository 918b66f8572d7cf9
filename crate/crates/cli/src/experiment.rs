//! Turning a config into an operator context and running it.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stdd_core::iteration::{run_scheme_with, Clock, SchemeOutcome, SubdomainExecutor};
use stdd_core::model::{AntiMonotone, ConstantSource, ZeroSource};
use stdd_core::reference::{manufactured_rhs, solve_monolithic, CosineInTime};
use stdd_core::{
    Capacity, Coefficients, Decomposition, Mesh, MeshSpec, OperatorContext, PLaplace, PStructureModel, SchemeConfig,
    SourceTerm, SpaceTimeField, TimeGrid,
};

use crate::config::{ExperimentConfig, GammaKind, InitialGuess, ModelName, SourceConfig};
use crate::error::CliError;

pub fn mesh_spec(cfg: &ExperimentConfig) -> Result<MeshSpec, CliError> {
    let m = &cfg.mesh;
    match (m.extent.as_slice(), m.cells.as_slice()) {
        (&[l], &[n]) => Ok(MeshSpec::interval(l, n)),
        (&[lx, ly], &[nx, ny]) => Ok(MeshSpec::rectangle(lx, ly, nx, ny)),
        _ => Err(CliError::Config(format!(
            "mesh: extent and cells must both have 1 or 2 entries, got {} and {}",
            m.extent.len(),
            m.cells.len()
        ))),
    }
}

pub fn coefficients(cfg: &ExperimentConfig) -> Result<Arc<dyn Coefficients>, CliError> {
    Ok(match cfg.model.name {
        ModelName::PLaplace => Arc::new(PLaplace::new(cfg.model.p, cfg.model.lambda)?),
        ModelName::AntiMonotone => Arc::new(AntiMonotone),
    })
}

pub fn capacity(cfg: &ExperimentConfig) -> Result<Capacity, CliError> {
    let m = &cfg.model;
    let c = match m.gamma_kind {
        GammaKind::Constant => {
            if m.gamma_zero_region.is_some() {
                return Err(CliError::Config("model.gamma_zero_region: only valid for the indicator kind".into()));
            }
            Capacity::Constant(m.gamma_value)
        }
        GammaKind::Indicator => {
            let [lo, hi] = m
                .gamma_zero_region
                .ok_or_else(|| CliError::Config("model.gamma_zero_region: required for the indicator kind".into()))?;
            Capacity::Indicator {
                value: m.gamma_value,
                zero_region: (lo, hi),
            }
        }
    };
    c.validate()?;
    Ok(c)
}

/// Everything needed to run or verify one configuration.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub ctx: OperatorContext,
    pub scheme: SchemeConfig,
    pub seed: u64,
}

impl Experiment {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        let mesh = Arc::new(Mesh::build(&mesh_spec(cfg)?)?);
        let grid = TimeGrid::new(cfg.time.t_final, cfg.time.steps)?;
        let base = PStructureModel::new(coefficients(cfg)?, capacity(cfg)?, Arc::new(ZeroSource))?;
        let source: Arc<dyn SourceTerm> = match cfg.source {
            SourceConfig::Zero {} => Arc::new(ZeroSource),
            SourceConfig::Custom { eta0, eta } => Arc::new(ConstantSource { eta0, eta }),
            SourceConfig::ManufacturedCos {} => Arc::new(manufactured_rhs(
                &base,
                Arc::new(CosineInTime { length: mesh.extent(0) }),
                &mesh,
                grid,
            )?),
        };
        let model = base.with_source(source);
        let d = &cfg.decomposition;
        let dec = Arc::new(Decomposition::build(&mesh, d.q, d.overlap_fraction, d.c_min)?);
        let ctx = OperatorContext::new(mesh, model, dec, grid)?;

        let kind = cfg.scheme.kind()?;
        let mut scheme = SchemeConfig::new(kind, cfg.scheme.s_parameter(kind)?, cfg.scheme.max_sweeps);
        scheme.stop_tol = cfg.scheme.stop_tol;
        scheme.monotone_slack = cfg.scheme.monotone_slack;
        scheme.solver = cfg.scheme.solver.to_core();
        if let Some(InitialGuess::Random { amplitude }) = cfg.scheme.initial_guess {
            if !(amplitude.is_finite() && amplitude >= 0.0) {
                return Err(CliError::Config(format!(
                    "scheme.initial_guess.amplitude: must be finite and non-negative, got {amplitude}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            scheme.initial_guess = Some(random_field(&mut rng, grid, ctx.mesh().num_nodes(), amplitude));
        }
        scheme.validate(ctx.q())?;
        Ok(Self {
            ctx,
            scheme,
            seed: cfg.rng_seed,
        })
    }

    pub fn reference(&self) -> Result<SpaceTimeField, CliError> {
        solve_monolithic(&self.ctx, &self.scheme.solver)
            .map_err(|e| CliError::Solver(format!("reference solve failed: {e}")))
    }

    /// Runs the configured scheme against `u_ref`. On failure the rows
    /// recorded so far are returned alongside the error.
    pub fn run(
        &self,
        u_ref: &SpaceTimeField,
        executor: &dyn SubdomainExecutor,
        clock: &dyn Clock,
    ) -> Result<SchemeOutcome, (CliError, Option<stdd_core::IterationTrace>)> {
        run_scheme_with(&self.ctx, &self.scheme, Some(u_ref), executor, clock)
            .map_err(|f| (CliError::from(f.error), f.trace))
    }
}

/// Uniform nodal values in `[-amplitude, amplitude]`.
pub fn random_field(rng: &mut ChaCha8Rng, grid: TimeGrid, n: usize, amplitude: f64) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, n, |_, _| amplitude * rng.gen_range(-1.0..=1.0))
}
