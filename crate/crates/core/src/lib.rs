//! Space-time overlapping domain decomposition for degenerate
//! elliptic-parabolic problems with p-structure.
//!
//! The model problem is
//!
//! ```text
//! ∂t(γu) − ∇·α(t, ∇u) + β(t, u) + f = 0   in Ω × (0, T)
//! α(t, ∇u)·n = 0                           on ∂Ω × (0, T)
//! γu(0) = 0
//! ```
//!
//! where γ ≥ 0 may vanish on parts of Ω. The space-time domain is split into
//! overlapping strips, the operator is split with partition-of-unity weights
//! into `F = Σ F_ℓ`, and the pieces are combined with Peaceman–Rachford,
//! Douglas–Rachford or additive splitting iterations in pseudo-time. Every
//! sweep solves resolvent problems `(sI + F_ℓ)u = g`, each of which is a
//! sequence of nonlinear implicit-Euler steps on one subdomain.
//!
//! The crate is `no_std` with `alloc`. File formats, threads and clocks live
//! in the `stdd` companion crate; this crate only exposes the hooks
//! ([`iteration::SubdomainExecutor`], [`iteration::Clock`]).

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is how validation rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod decomposition;
pub mod error;
pub mod field;
pub mod iteration;
pub mod linalg;
pub(crate) mod math;
pub mod mesh;
pub mod model;
pub mod operators;
pub mod reference;
pub mod resolvent;

pub use decomposition::{Decomposition, Subdomain, WeightFamily};
pub use error::{Error, Result};
pub use field::{SpaceTimeField, TimeGrid};
pub use iteration::{run_scheme, IterationTrace, SchemeConfig, SchemeKind};
pub use mesh::{Mesh, MeshSpec, QuadratureRule};
pub use model::{Capacity, Coefficients, PLaplace, PStructureModel, SourceTerm};
pub use operators::{OperatorContext, Part};
pub use resolvent::{resolvent_solve, ResolventConfig};
