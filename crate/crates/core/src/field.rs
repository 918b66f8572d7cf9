//! Nodal values on a mesh (or submesh) times a uniform time grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Uniform time grid `t_k = kΔt`, `k = 1..=steps`, `Δt = T / steps`.
///
/// Level 0 is implicit: the capacity-weighted state vanishes there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::config(format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::config("time grid needs at least one step"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// Time of level `k` (1-based; `time(0) = 0`).
    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn refined(&self) -> Self {
        Self {
            t_final: self.t_final,
            steps: 2 * self.steps,
        }
    }
}

/// Nodal values for levels `k = 1..=steps`, stored level-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    n_nodes: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: TimeGrid, n_nodes: usize) -> Self {
        Self {
            grid,
            n_nodes,
            values: vec![0.0; grid.steps() * n_nodes],
        }
    }

    pub fn from_fn(grid: TimeGrid, n_nodes: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(grid, n_nodes);
        for k in 1..=grid.steps() {
            for (i, v) in out.level_mut(k).iter_mut().enumerate() {
                *v = f(k, i);
            }
        }
        out
    }

    pub fn from_values(grid: TimeGrid, n_nodes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.steps() * n_nodes {
            return Err(Error::contract(format!(
                "expected {} values, got {}",
                grid.steps() * n_nodes,
                values.len()
            )));
        }
        Ok(Self { grid, n_nodes, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Nodal values at level `k ∈ 1..=steps`.
    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.n_nodes;
        &self.values[(k - 1) * n..k * n]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.n_nodes;
        &mut self.values[(k - 1) * n..k * n]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.n_nodes == other.n_nodes && self.grid == other.grid
    }

    pub(crate) fn check_shape(&self, other: &Self) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "field shapes differ: {} nodes x {} levels vs {} nodes x {} levels",
                self.n_nodes,
                self.grid.steps(),
                other.n_nodes,
                other.grid.steps()
            )))
        }
    }

    /// `self + a·other`.
    pub fn axpy(&mut self, a: f64, other: &Self) -> Result<()> {
        self.check_shape(other)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn scale(&mut self, a: f64) {
        for x in &mut self.values {
            *x *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self - other`.
    pub fn minus(&self, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_shape(other)?;
        Ok(Self {
            grid: self.grid,
            n_nodes: self.n_nodes,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
