//! Graded space-time grids.
//!
//! Degenerate axes are graded as `x_j = X_max (j/J)^2`, which makes the node
//! spacing uniform in the intrinsic `√x` coordinate; tangent axes are uniform
//! on `[-Y_max, Y_max]`, and time is uniform on `[0, T]`.

use crate::error::{Error, Result};
use crate::geometry::{Dims, SpatialPoint};
use std::sync::Arc;

/// Nodes `x_j = x_max (j/J)^2`, j = 0..=intervals. `x_0 = 0` exactly.
pub fn graded_nodes(intervals: usize, x_max: f64) -> Vec<f64> {
    let jj = intervals as f64;
    (0..=intervals)
        .map(|j| x_max * (j as f64 / jj).powi(2))
        .collect()
}

/// Uniform nodes on `[-y_max, y_max]`, endpoints included.
pub fn uniform_nodes(intervals: usize, y_max: f64) -> Vec<f64> {
    let kk = intervals as f64;
    (0..=intervals)
        .map(|k| -y_max + 2.0 * y_max * (k as f64 / kk))
        .collect()
}

/// Tensor-product spatial grid: `n` graded axes then `m` uniform axes.
/// The last axis varies fastest in the node enumeration.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    pub dims: Dims,
    pub axes: Vec<Vec<f64>>,
    strides: Vec<usize>,
    node_count: usize,
}

impl SpatialGrid {
    pub fn new(dims: Dims, axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.len() != dims.total() {
            return Err(Error::Grid(format!(
                "expected {} axes, got {}",
                dims.total(),
                axes.len()
            )));
        }
        for (a, nodes) in axes.iter().enumerate() {
            if nodes.len() < 2 {
                return Err(Error::Grid(format!("axis {a} has fewer than 2 nodes")));
            }
            if nodes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Grid(format!("axis {a} nodes are not increasing")));
            }
        }
        let mut strides = vec![0usize; axes.len()];
        let mut acc = 1usize;
        for a in (0..axes.len()).rev() {
            strides[a] = acc;
            acc *= axes[a].len();
        }
        Ok(SpatialGrid {
            dims,
            axes,
            strides,
            node_count: acc,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn axis_len(&self, axis: usize) -> usize {
        self.axes[axis].len()
    }

    /// Axis index of `x_i`.
    pub fn x_axis(&self, i: usize) -> usize {
        debug_assert!(i < self.dims.n);
        i
    }

    /// Axis index of `y_l`.
    pub fn y_axis(&self, l: usize) -> usize {
        debug_assert!(l < self.dims.m);
        self.dims.n + l
    }

    pub fn decode(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.axes.len()];
        let mut rest = node;
        for a in 0..self.axes.len() {
            idx[a] = rest / self.strides[a];
            rest %= self.strides[a];
        }
        idx
    }

    pub fn encode(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.strides)
            .map(|(i, s)| i * s)
            .sum()
    }

    /// Neighbour of `node` one step along `axis` (+1 or -1), if it exists.
    pub fn step(&self, node: usize, axis: usize, dir: isize) -> Option<usize> {
        let pos = (node / self.strides[axis]) % self.axes[axis].len();
        let new = pos as isize + dir;
        if new < 0 || new as usize >= self.axes[axis].len() {
            None
        } else {
            Some((node as isize + dir * self.strides[axis] as isize) as usize)
        }
    }

    pub fn point(&self, node: usize) -> SpatialPoint {
        let idx = self.decode(node);
        let x: Vec<f64> = (0..self.dims.n).map(|i| self.axes[i][idx[i]]).collect();
        let y: Vec<f64> = (0..self.dims.m)
            .map(|l| self.axes[self.dims.n + l][idx[self.dims.n + l]])
            .collect();
        SpatialPoint { x, y }
    }

    pub fn iter_points(&self) -> impl Iterator<Item = SpatialPoint> + '_ {
        (0..self.node_count).map(|s| self.point(s))
    }
}

/// Uniform time nodes over `[0, T]` plus a tensor spatial grid.
#[derive(Debug, Clone)]
pub struct SpaceTimeGrid {
    pub times: Vec<f64>,
    pub space: SpatialGrid,
}

impl SpaceTimeGrid {
    pub fn node_count(&self) -> usize {
        self.times.len() * self.space.node_count()
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    /// Single-slice (elliptic) grid at time `t`.
    pub fn single_slice(space: SpatialGrid, t: f64) -> Arc<Self> {
        Arc::new(SpaceTimeGrid {
            times: vec![t],
            space,
        })
    }
}

/// Grid parameters; the artifact-facing constructor applies the `J ≥ 8` rule.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub dims: Dims,
    /// Intervals per degenerate axis.
    pub j: usize,
    pub x_max: f64,
    /// Intervals per tangent axis.
    pub y_intervals: usize,
    pub y_max: f64,
    pub t_final: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn spatial(&self) -> Result<SpatialGrid> {
        if self.j < 8 {
            return Err(Error::Grid(format!("J = {} but J >= 8 is required", self.j)));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::Grid("X_max must be positive".into()));
        }
        let mut axes = Vec::with_capacity(self.dims.total());
        for _ in 0..self.dims.n {
            axes.push(graded_nodes(self.j, self.x_max));
        }
        if self.dims.m > 0 {
            if self.y_intervals < 2 {
                return Err(Error::Grid("need at least 2 intervals per y axis".into()));
            }
            if !(self.y_max > 0.0) {
                return Err(Error::Grid("Y_max must be positive".into()));
            }
            for _ in 0..self.dims.m {
                axes.push(uniform_nodes(self.y_intervals, self.y_max));
            }
        }
        SpatialGrid::new(self.dims, axes)
    }

    /// The full space-time grid. The step count is `round(T/Δt)` and the
    /// effective step is `T/steps`, so the final node lands on `T` exactly.
    pub fn build(&self) -> Result<Arc<SpaceTimeGrid>> {
        if !(self.dt > 0.0) || !(self.t_final > 0.0) {
            return Err(Error::Grid("T and Δt must be positive".into()));
        }
        let steps = ((self.t_final / self.dt).round() as usize).max(1);
        let dt = self.t_final / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        Ok(Arc::new(SpaceTimeGrid {
            times,
            space: self.spatial()?,
        }))
    }
}
