//! Coefficients of the model problem and sampled checks of their p-structure.
//!
//! A [`PStructureModel`] bundles the flux α and reaction β (via the
//! [`Coefficients`] trait), the capacity γ and the source functional
//! `⟨f, v⟩ = ∫∫ η₀ v + η·∇v`.

use alloc::format;
use alloc::sync::Arc;
use core::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math::{self, Vec2};

/// Constants of the growth, monotonicity and coercivity bounds:
///
/// ```text
/// |α(z)| ≤ C|z|^{p-1} + d₁,  |β(y)| ≤ C|y|^{p-1} + d₁
/// (α(z₁)-α(z₂))·(z₁-z₂) + (β(y₁)-β(y₂))(y₁-y₂) ≥ c_mono(|z₁-z₂|^p + |y₁-y₂|^p)
/// α(z)·z + β(y)y ≥ c_coer(|z|^p + |y|^p) - d₂
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstants {
    pub c_growth: f64,
    pub d1: f64,
    pub c_mono: f64,
    pub c_coer: f64,
    pub d2: f64,
}

/// Flux α(x, t, z) and reaction β(x, t, y) together with the derivatives
/// Newton needs.
///
/// In 1D only the first component of points and vectors is used; the second
/// is zero.
pub trait Coefficients: Debug + Send + Sync {
    /// Growth exponent p ≥ 2.
    fn p(&self) -> f64;

    fn alpha(&self, x: Vec2, t: f64, z: Vec2) -> Vec2;

    fn beta(&self, x: Vec2, t: f64, y: f64) -> f64;

    /// Jacobian of α, regularised by `eps` where α is not differentiable.
    fn alpha_jacobian(&self, x: Vec2, t: f64, z: Vec2, eps: f64) -> [[f64; 2]; 2];

    /// Derivative of β, regularised by `eps`.
    fn beta_derivative(&self, x: Vec2, t: f64, y: f64, eps: f64) -> f64;

    /// Scalar κ with α(z) ≈ κz, used for Picard (frozen coefficient) steps.
    fn alpha_secant(&self, x: Vec2, t: f64, z: Vec2, eps: f64) -> f64 {
        let n2 = math::dot(z, z);
        if n2 > 0.0 {
            math::dot(self.alpha(x, t, z), z) / n2
        } else {
            let j = self.alpha_jacobian(x, t, z, eps);
            0.5 * (j[0][0] + j[1][1])
        }
    }

    /// Scalar μ with β(y) ≈ μy.
    fn beta_secant(&self, x: Vec2, t: f64, y: f64, eps: f64) -> f64 {
        if y != 0.0 {
            self.beta(x, t, y) / y
        } else {
            self.beta_derivative(x, t, y, eps)
        }
    }

    /// Declared constants for [`check_p_structure`].
    fn structure_constants(&self) -> StructureConstants;
}

/// `α(z) = |z|^{p-2} z`, `β(y) = |y|^{p-2} y + λy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PLaplace {
    pub p: f64,
    pub lambda: f64,
}

impl PLaplace {
    pub fn new(p: f64, lambda: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::config(format!("p must be in [2, inf), got {p}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be non-negative, got {lambda}")));
        }
        Ok(Self { p, lambda })
    }
}

impl Coefficients for PLaplace {
    fn p(&self) -> f64 {
        self.p
    }

    fn alpha(&self, _x: Vec2, _t: f64, z: Vec2) -> Vec2 {
        let n = math::norm2(z);
        if n == 0.0 {
            return [0.0, 0.0];
        }
        let c = math::powf(n, self.p - 2.0);
        [c * z[0], c * z[1]]
    }

    fn beta(&self, _x: Vec2, _t: f64, y: f64) -> f64 {
        math::signed_pow(y, self.p) + self.lambda * y
    }

    fn alpha_jacobian(&self, _x: Vec2, _t: f64, z: Vec2, eps: f64) -> [[f64; 2]; 2] {
        let r2 = math::dot(z, z) + eps * eps;
        if self.p == 2.0 {
            return [[1.0, 0.0], [0.0, 1.0]];
        }
        if r2 == 0.0 {
            return [[0.0, 0.0], [0.0, 0.0]];
        }
        let c = math::powf(r2, 0.5 * (self.p - 2.0));
        let d = (self.p - 2.0) * math::powf(r2, 0.5 * (self.p - 4.0));
        [
            [c + d * z[0] * z[0], d * z[0] * z[1]],
            [d * z[1] * z[0], c + d * z[1] * z[1]],
        ]
    }

    fn beta_derivative(&self, _x: Vec2, _t: f64, y: f64, eps: f64) -> f64 {
        let r2 = y * y + eps * eps;
        let core = if self.p == 2.0 {
            1.0
        } else if r2 == 0.0 {
            0.0
        } else {
            (self.p - 1.0) * math::powf(r2, 0.5 * (self.p - 2.0))
        };
        core + self.lambda
    }

    fn alpha_secant(&self, _x: Vec2, _t: f64, z: Vec2, eps: f64) -> f64 {
        if self.p == 2.0 {
            return 1.0;
        }
        math::powf(math::dot(z, z) + eps * eps, 0.5 * (self.p - 2.0))
    }

    fn beta_secant(&self, _x: Vec2, _t: f64, y: f64, eps: f64) -> f64 {
        let core = if self.p == 2.0 {
            1.0
        } else {
            math::powf(y * y + eps * eps, 0.5 * (self.p - 2.0))
        };
        core + self.lambda
    }

    fn structure_constants(&self) -> StructureConstants {
        StructureConstants {
            // |λy| ≤ λ(|y|^{p-1} + 1), which needs d₁ = λ unless p = 2
            c_growth: 1.0 + self.lambda,
            d1: if self.p > 2.0 { self.lambda } else { 0.0 },
            c_mono: p_laplace_monotonicity_constant(self.p),
            c_coer: 1.0,
            d2: 0.0,
        }
    }
}

/// Sharp constant c in `(|a|^{p-2}a - |b|^{p-2}b)·(a-b) ≥ c|a-b|^p`, namely
/// `2^{2-p}`, attained at `b = -a`.
pub fn p_laplace_monotonicity_constant(p: f64) -> f64 {
    math::powf(2.0, 2.0 - p)
}

/// Sign-flipped linear flux `α(z) = -z`, `β(y) = y`. Anti-monotone; used as a
/// mutant for the structure checks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AntiMonotone;

impl Coefficients for AntiMonotone {
    fn p(&self) -> f64 {
        2.0
    }

    fn alpha(&self, _x: Vec2, _t: f64, z: Vec2) -> Vec2 {
        [-z[0], -z[1]]
    }

    fn beta(&self, _x: Vec2, _t: f64, y: f64) -> f64 {
        y
    }

    fn alpha_jacobian(&self, _x: Vec2, _t: f64, _z: Vec2, _eps: f64) -> [[f64; 2]; 2] {
        [[-1.0, 0.0], [0.0, -1.0]]
    }

    fn beta_derivative(&self, _x: Vec2, _t: f64, _y: f64, _eps: f64) -> f64 {
        1.0
    }

    fn structure_constants(&self) -> StructureConstants {
        StructureConstants {
            c_growth: 1.0,
            d1: 0.0,
            c_mono: 1.0,
            c_coer: 1.0,
            d2: 0.0,
        }
    }
}

/// Capacity γ(x) ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Constant(f64),
    /// `value` everywhere except on the slab `lo < x₁ < hi`, where γ = 0.
    Indicator { value: f64, zero_region: (f64, f64) },
}

impl Capacity {
    pub fn eval(&self, x: Vec2) -> f64 {
        match *self {
            Capacity::Constant(g) => g,
            Capacity::Indicator { value, zero_region: (lo, hi) } => {
                if x[0] > lo && x[0] < hi {
                    0.0
                } else {
                    value
                }
            }
        }
    }

    /// γ multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            Capacity::Constant(g) => Capacity::Constant(g * factor),
            Capacity::Indicator { value, zero_region } => Capacity::Indicator {
                value: value * factor,
                zero_region,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            Capacity::Constant(g) => g,
            Capacity::Indicator { value, zero_region: (lo, hi) } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::config(format!("capacity zero region ({lo}, {hi}) is empty")));
                }
                value
            }
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::config(format!("capacity must be finite and non-negative, got {v}")));
        }
        Ok(())
    }
}

/// Densities of the source functional `⟨f, v⟩ = ∫∫ η₀ v + η·∇v`.
pub trait SourceTerm: Debug + Send + Sync {
    fn eta0(&self, x: Vec2, t: f64) -> f64;
    fn eta(&self, x: Vec2, t: f64) -> Vec2;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZeroSource;

impl SourceTerm for ZeroSource {
    fn eta0(&self, _x: Vec2, _t: f64) -> f64 {
        0.0
    }
    fn eta(&self, _x: Vec2, _t: f64) -> Vec2 {
        [0.0, 0.0]
    }
}

/// Space-time constant densities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantSource {
    pub eta0: f64,
    pub eta: Vec2,
}

impl SourceTerm for ConstantSource {
    fn eta0(&self, _x: Vec2, _t: f64) -> f64 {
        self.eta0
    }
    fn eta(&self, _x: Vec2, _t: f64) -> Vec2 {
        self.eta
    }
}

/// The full set of coefficients of the model problem.
#[derive(Debug, Clone)]
pub struct PStructureModel {
    pub coefficients: Arc<dyn Coefficients>,
    pub capacity: Capacity,
    pub source: Arc<dyn SourceTerm>,
    /// κ ≥ 0 of an additional `κ·M u` term, where M is the capacity mass.
    /// Zero except for exponentially shifted models.
    pub capacity_reaction: f64,
}

impl PStructureModel {
    pub fn new(coefficients: Arc<dyn Coefficients>, capacity: Capacity, source: Arc<dyn SourceTerm>) -> Result<Self> {
        capacity.validate()?;
        let p = coefficients.p();
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::config(format!("p must be in [2, inf), got {p}")));
        }
        Ok(Self {
            coefficients,
            capacity,
            source,
            capacity_reaction: 0.0,
        })
    }

    /// The p-Laplace model with nonlinear reaction.
    pub fn p_laplace(p: f64, lambda: f64, capacity: Capacity, source: Arc<dyn SourceTerm>) -> Result<Self> {
        Self::new(Arc::new(PLaplace::new(p, lambda)?), capacity, source)
    }

    pub fn p(&self) -> f64 {
        self.coefficients.p()
    }

    pub fn with_source(&self, source: Arc<dyn SourceTerm>) -> Self {
        Self {
            source,
            ..self.clone()
        }
    }

    pub fn eval_alpha(&self, x: Vec2, t: f64, z: Vec2) -> Result<Vec2> {
        if !math::all_finite(z) || !math::all_finite(x) || !t.is_finite() {
            return Err(Error::numeric(format!("alpha called with non-finite input z = {z:?}")));
        }
        let a = self.coefficients.alpha(x, t, z);
        if !math::all_finite(a) {
            return Err(Error::numeric(format!("alpha non-finite at z = {z:?}")));
        }
        Ok(a)
    }

    pub fn eval_beta(&self, x: Vec2, t: f64, y: f64) -> Result<f64> {
        if !y.is_finite() || !math::all_finite(x) || !t.is_finite() {
            return Err(Error::numeric(format!("beta called with non-finite input y = {y}")));
        }
        let b = self.coefficients.beta(x, t, y);
        if !b.is_finite() {
            return Err(Error::numeric(format!("beta non-finite at y = {y}")));
        }
        Ok(b)
    }

    pub fn gamma(&self, x: Vec2) -> f64 {
        self.capacity.eval(x)
    }
}

/// Which inequality of the p-structure a margin refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Finite values and a local continuity probe.
    Continuity,
    Growth,
    Monotonicity,
    Coercivity,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Continuity,
        Condition::Growth,
        Condition::Monotonicity,
        Condition::Coercivity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Continuity => "continuity",
            Condition::Growth => "growth",
            Condition::Monotonicity => "monotonicity",
            Condition::Coercivity => "coercivity",
        }
    }
}

/// Sampling request for [`check_p_structure`].
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub num_samples: usize,
    /// Magnitudes of z and y are drawn log-uniformly from this range.
    pub magnitude: (f64, f64),
    pub seed: u64,
    pub constants: StructureConstants,
    pub dim: usize,
    /// Points are drawn from `[0, extent₁] × [0, extent₂]`.
    pub extent: Vec2,
    pub t_max: f64,
}

impl SamplerConfig {
    /// 10⁴ samples with magnitudes in `[1e-3, 1e2]` and the model's own
    /// declared constants.
    pub fn for_model(coefficients: &dyn Coefficients, dim: usize, seed: u64) -> Self {
        Self {
            num_samples: 10_000,
            magnitude: (1e-3, 1e2),
            seed,
            constants: coefficients.structure_constants(),
            dim,
            extent: [1.0, 1.0],
            t_max: 1.0,
        }
    }
}

/// Worst sampled margin of each condition; negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct PStructureReport {
    pub passed: bool,
    /// Indexed like [`Condition::ALL`].
    pub worst_margins: [f64; 4],
    pub samples: usize,
}

impl PStructureReport {
    pub fn margin(&self, c: Condition) -> f64 {
        self.worst_margins[c as usize]
    }
}

/// Margins are normalised by `1 + |lhs| + |rhs|` so that one tolerance works
/// across magnitudes.
const MARGIN_TOL: f64 = 1e-12;

fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs())
}

/// Margin of the monotonicity inequality for one pair of arguments.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_margin(
    coeffs: &dyn Coefficients,
    x: Vec2,
    t: f64,
    z1: Vec2,
    z2: Vec2,
    y1: f64,
    y2: f64,
    c_mono: f64,
) -> f64 {
    let p = coeffs.p();
    let a1 = coeffs.alpha(x, t, z1);
    let a2 = coeffs.alpha(x, t, z2);
    let dz = [z1[0] - z2[0], z1[1] - z2[1]];
    let dy = y1 - y2;
    let lhs = math::dot([a1[0] - a2[0], a1[1] - a2[1]], dz) + (coeffs.beta(x, t, y1) - coeffs.beta(x, t, y2)) * dy;
    let rhs = c_mono * (math::powf(math::norm2(dz), p) + math::powf(dy.abs(), p));
    relative_margin(lhs, rhs)
}

/// Margin of the growth bounds (the smaller of the α and β bounds).
pub fn growth_margin(coeffs: &dyn Coefficients, x: Vec2, t: f64, z: Vec2, y: f64, k: &StructureConstants) -> f64 {
    let p = coeffs.p();
    let a = math::norm2(coeffs.alpha(x, t, z));
    let b = coeffs.beta(x, t, y).abs();
    let ma = relative_margin(k.c_growth * math::powf(math::norm2(z), p - 1.0) + k.d1, a);
    let mb = relative_margin(k.c_growth * math::powf(y.abs(), p - 1.0) + k.d1, b);
    ma.min(mb)
}

pub fn coercivity_margin(coeffs: &dyn Coefficients, x: Vec2, t: f64, z: Vec2, y: f64, k: &StructureConstants) -> f64 {
    let p = coeffs.p();
    let lhs = math::dot(coeffs.alpha(x, t, z), z) + coeffs.beta(x, t, y) * y;
    let rhs = k.c_coer * (math::powf(math::norm2(z), p) + math::powf(y.abs(), p)) - k.d2;
    relative_margin(lhs, rhs)
}

/// Continuity probe: a perturbation of relative size 1e-8 may change α and β
/// by at most 1e-4 relative.
pub fn continuity_margin(coeffs: &dyn Coefficients, x: Vec2, t: f64, z: Vec2, y: f64) -> f64 {
    let a = coeffs.alpha(x, t, z);
    let b = coeffs.beta(x, t, y);
    if !math::all_finite(a) || !b.is_finite() {
        return f64::NEG_INFINITY;
    }
    let dz = 1e-8 * (1.0 + math::norm2(z));
    let dy = 1e-8 * (1.0 + y.abs());
    let a2 = coeffs.alpha(x, t, [z[0] + dz, z[1] + dz]);
    let b2 = coeffs.beta(x, t, y + dy);
    if !math::all_finite(a2) || !b2.is_finite() {
        return f64::NEG_INFINITY;
    }
    let ja = math::norm2([a2[0] - a[0], a2[1] - a[1]]) / (1.0 + math::norm2(a));
    let jb = (b2 - b).abs() / (1.0 + b.abs());
    1e-4 - ja.max(jb)
}

fn sample_magnitude(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let (lo, hi) = (math::ln(range.0), math::ln(range.1));
    math::exp(rng.gen_range(lo..=hi))
}

fn sample_vector(rng: &mut ChaCha8Rng, dim: usize, range: (f64, f64)) -> Vec2 {
    let r = sample_magnitude(rng, range);
    if dim == 1 {
        let s = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        [s * r, 0.0]
    } else {
        let th = rng.gen_range(0.0..core::f64::consts::TAU);
        [r * math::cos(th), r * math::sin(th)]
    }
}

fn sample_scalar(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    let r = sample_magnitude(rng, range);
    if rng.gen_bool(0.5) {
        r
    } else {
        -r
    }
}

/// Samples random `(x, t, y, z)` tuples and evaluates each structural
/// inequality with the constants in `cfg`.
///
/// Every fourth monotonicity pair is nearly antipodal (`z₂ ≈ -z₁`), where the
/// p-Laplace bound is sharp.
pub fn check_p_structure(coeffs: &dyn Coefficients, cfg: &SamplerConfig) -> Result<PStructureReport> {
    if cfg.num_samples == 0 {
        return Err(Error::config("check_p_structure needs at least one sample"));
    }
    let (lo, hi) = cfg.magnitude;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::config(format!("invalid magnitude range ({lo}, {hi})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = [f64::INFINITY; 4];
    let k = &cfg.constants;
    for i in 0..cfg.num_samples {
        let x = [
            rng.gen_range(0.0..=cfg.extent[0]),
            if cfg.dim == 2 { rng.gen_range(0.0..=cfg.extent[1]) } else { 0.0 },
        ];
        let t = rng.gen_range(0.0..=cfg.t_max);
        let z1 = sample_vector(&mut rng, cfg.dim, cfg.magnitude);
        let y1 = sample_scalar(&mut rng, cfg.magnitude);
        let (z2, y2) = if i % 4 == 3 {
            let r = rng.gen_range(0.5..2.0);
            let jitter = sample_vector(&mut rng, cfg.dim, (lo, lo.max(1e-3 * hi)));
            ([-r * z1[0] + jitter[0], -r * z1[1] + jitter[1]], -r * y1)
        } else {
            (
                sample_vector(&mut rng, cfg.dim, cfg.magnitude),
                sample_scalar(&mut rng, cfg.magnitude),
            )
        };
        let m = [
            continuity_margin(coeffs, x, t, z1, y1),
            growth_margin(coeffs, x, t, z1, y1, k),
            monotonicity_margin(coeffs, x, t, z1, z2, y1, y2, k.c_mono),
            coercivity_margin(coeffs, x, t, z1, y1, k),
        ];
        for (w, v) in worst.iter_mut().zip(m) {
            if !(v >= *w) {
                *w = v;
            }
        }
    }
    let passed = worst.iter().all(|&m| m >= -MARGIN_TOL);
    Ok(PStructureReport {
        passed,
        worst_margins: worst,
        samples: cfg.num_samples,
    })
}
