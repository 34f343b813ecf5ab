//! Boxes, windows and a uniform cell grid for fixed-radius neighbor queries.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Axis-aligned cube `Q_side(center)`, closed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Self { center, side }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn half(&self) -> f64 {
        self.side / 2.0
    }

    pub fn low(&self, axis: usize) -> f64 {
        self.center[axis] - self.half()
    }

    pub fn high(&self, axis: usize) -> f64 {
        self.center[axis] + self.half()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.dim() as i32)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let h = self.half();
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= h)
    }

    /// `contains` with an absolute slack, for points produced by clipping.
    pub fn contains_tol(&self, x: &[f64], tol: f64) -> bool {
        let h = self.half() + tol;
        x.iter().zip(&self.center).all(|(a, c)| (a - c).abs() <= h)
    }

    pub fn contains_cube(&self, other: &Cube) -> bool {
        let slack = self.half() - other.half();
        slack >= -1e-12 * self.side.max(1.0)
            && other
                .center
                .iter()
                .zip(&self.center)
                .all(|(a, c)| (a - c).abs() <= slack + 1e-12 * self.side.max(1.0))
    }
}

/// Observation box `Q_L(center)` plus a buffer margin; simulation happens on
/// `Q_{L+2m}(center)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    center: Vec<f64>,
    side: f64,
    margin: f64,
}

impl Window {
    pub fn new(center: Vec<f64>, side: f64, margin: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(invalid("dimension", "must be at least 1"));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(Error::NonPositiveSide(side));
        }
        if !(margin >= 0.0) || !margin.is_finite() {
            return Err(invalid("margin", format!("must be finite and >= 0, got {margin}")));
        }
        Ok(Self {
            center,
            side,
            margin,
        })
    }

    pub fn centered(dim: usize, side: f64, margin: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], side, margin)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn observation(&self) -> Cube {
        Cube::new(self.center.clone(), self.side)
    }

    pub fn buffered(&self) -> Cube {
        Cube::new(self.center.clone(), self.side + 2.0 * self.margin)
    }

    pub fn volume(&self) -> f64 {
        self.observation().volume()
    }

    pub fn buffered_volume(&self) -> f64 {
        self.buffered().volume()
    }

    pub fn in_observation(&self, x: &[f64]) -> bool {
        self.observation().contains(x)
    }

    pub fn in_buffered(&self, x: &[f64]) -> bool {
        self.buffered().contains(x)
    }
}

/// Uniform grid over a cube, storing point indices bucketed by cell.
///
/// Points outside the cube are clamped into the boundary cells, so queries
/// stay exact for any input.
#[derive(Clone, Debug)]
pub struct CellGrid {
    dim: usize,
    origin: Vec<f64>,
    cell: f64,
    counts: Vec<usize>,
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl CellGrid {
    /// `coords` is a flat array of `dim`-vectors.
    pub fn build(coords: &[f64], dim: usize, bounds: &Cube, cell: f64) -> Self {
        let n = coords.len() / dim.max(1);
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            bounds.side.max(1e-9)
        };
        // keep the number of cells proportional to the number of points
        let max_cells = (4 * n).max(64) as f64;
        while (bounds.side / cell).ceil().max(1.0).powi(dim as i32) > max_cells {
            cell *= 1.5;
        }
        let per_axis = ((bounds.side / cell).ceil() as usize).max(1);
        let counts = vec![per_axis; dim];
        let total: usize = counts.iter().product();
        let origin: Vec<f64> = (0..dim).map(|k| bounds.low(k)).collect();

        let mut grid = Self {
            dim,
            origin,
            cell,
            counts,
            starts: vec![0; total + 1],
            items: vec![0; n],
        };
        let keys: Vec<usize> = (0..n)
            .map(|i| grid.key_of(&coords[i * dim..(i + 1) * dim]))
            .collect();
        for &k in &keys {
            grid.starts[k + 1] += 1;
        }
        for c in 0..total {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &k) in keys.iter().enumerate() {
            grid.items[fill[k]] = i;
            fill[k] += 1;
        }
        grid
    }

    fn axis_cell(&self, axis: usize, x: f64) -> usize {
        let c = ((x - self.origin[axis]) / self.cell).floor();
        if c < 0.0 || c.is_nan() {
            0
        } else {
            (c as usize).min(self.counts[axis] - 1)
        }
    }

    fn key_of(&self, x: &[f64]) -> usize {
        let mut key = 0;
        for axis in (0..self.dim).rev() {
            key = key * self.counts[axis] + self.axis_cell(axis, x[axis]);
        }
        key
    }

    /// Calls `f(j)` for every stored index whose cell may hold points within
    /// `radius` of `x`. Callers filter by exact distance.
    pub fn for_each_candidate(&self, x: &[f64], radius: f64, mut f: impl FnMut(usize)) {
        let reach = if radius.is_finite() {
            (radius / self.cell).ceil() as i64
        } else {
            i64::MAX / 4
        };
        let mut lo = vec![0usize; self.dim];
        let mut hi = vec![0usize; self.dim];
        for axis in 0..self.dim {
            let c = self.axis_cell(axis, x[axis]) as i64;
            lo[axis] = (c - reach).max(0) as usize;
            hi[axis] = ((c + reach) as usize).min(self.counts[axis] - 1);
        }
        let mut idx = lo.clone();
        loop {
            let mut key = 0;
            for axis in (0..self.dim).rev() {
                key = key * self.counts[axis] + idx[axis];
            }
            for &j in &self.items[self.starts[key]..self.starts[key + 1]] {
                f(j);
            }
            // odometer over the cell block
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    return;
                }
                if idx[axis] < hi[axis] {
                    idx[axis] += 1;
                    break;
                }
                idx[axis] = lo[axis];
                axis += 1;
            }
        }
    }
}
