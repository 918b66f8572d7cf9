#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stdd_core::model::ZeroSource;
use stdd_core::reference::{manufactured_rhs, CosineInTime};
use stdd_core::{Capacity, Decomposition, Mesh, MeshSpec, OperatorContext, PStructureModel, SpaceTimeField, TimeGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(rng: &mut ChaCha8Rng, grid: TimeGrid, n: usize, amplitude: f64) -> SpaceTimeField {
    SpaceTimeField::from_fn(grid, n, |_, _| amplitude * rng.gen_range(-1.0..=1.0))
}

/// p-Laplace with the cosine manufactured source on `(0, 1)`.
pub fn ctx_1d(cells: usize, steps: usize, p: f64, capacity: Capacity, q: usize, overlap: f64) -> OperatorContext {
    let mesh = Arc::new(Mesh::build(&MeshSpec::interval(1.0, cells)).unwrap());
    ctx_on(mesh, steps, p, capacity, q, overlap)
}

pub fn ctx_2d(n: usize, steps: usize, p: f64, q: usize) -> OperatorContext {
    let mesh = Arc::new(Mesh::build(&MeshSpec::rectangle(1.0, 1.0, n, n)).unwrap());
    ctx_on(mesh, steps, p, Capacity::Constant(1.0), q, 0.25)
}

fn ctx_on(mesh: Arc<Mesh>, steps: usize, p: f64, capacity: Capacity, q: usize, overlap: f64) -> OperatorContext {
    let grid = TimeGrid::new(1.0, steps).unwrap();
    let base = PStructureModel::p_laplace(p, 1.0, capacity, Arc::new(ZeroSource)).unwrap();
    let src = manufactured_rhs(&base, Arc::new(CosineInTime { length: 1.0 }), &mesh, grid).unwrap();
    let dec = Arc::new(Decomposition::build(&mesh, q, overlap, 0.1).unwrap());
    OperatorContext::new(mesh, base.with_source(Arc::new(src)), dec, grid).unwrap()
}

pub const HALF_DEGENERATE: Capacity = Capacity::Indicator {
    value: 1.0,
    zero_region: (0.0, 0.5),
};
