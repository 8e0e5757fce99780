//! Discretized joint space of the planar arm with circle obstacles.

use serde::Serialize;
use thiserror::Error;

use super::arm::{ArmModel, Joints, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Obstacle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("joint {0} has a non-positive resolution")]
    BadResolution(usize),
    #[error("grid would have {0} cells")]
    TooLarge(usize),
}

/// Joint-space grid. Cell `k` along joint `j` sits at `lo_j + k * res_j`;
/// every ±1 move in any subset of joints is an edge.
#[derive(Clone, Debug)]
pub struct CSpaceGrid {
    pub arm: ArmModel,
    pub resolution: [f64; 3],
    pub obstacles: Vec<Obstacle>,
    dims: [usize; 3],
    valid: Vec<bool>,
}

const MAX_CELLS: usize = 1 << 24;

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

impl CSpaceGrid {
    pub fn new(arm: ArmModel, resolution: [f64; 3], obstacles: Vec<Obstacle>) -> Result<Self, GridError> {
        let mut dims = [0; 3];
        for j in 0..3 {
            if resolution[j].is_nan() || resolution[j] <= 0.0 {
                return Err(GridError::BadResolution(j));
            }
            let (lo, hi) = arm.limits[j];
            dims[j] = ((hi - lo) / resolution[j] + 1e-9).floor() as usize + 1;
        }
        let total = dims.iter().product();
        if total > MAX_CELLS {
            return Err(GridError::TooLarge(total));
        }
        let mut grid = CSpaceGrid {
            arm,
            resolution,
            obstacles,
            dims,
            valid: Vec::new(),
        };
        grid.valid = (0..total).map(|c| grid.config_is_free(&grid.config(c))).collect();
        Ok(grid)
    }

    /// Every link segment clears every obstacle.
    pub fn config_is_free(&self, q: &Joints) -> bool {
        let p = self.arm.joint_positions(q);
        self.obstacles
            .iter()
            .all(|o| (0..3).all(|l| segment_distance(o.center, p[l], p[l + 1]) > o.radius))
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn is_valid(&self, cell: usize) -> bool {
        self.valid[cell]
    }

    pub fn coords(&self, cell: usize) -> [usize; 3] {
        let [_, n1, n2] = self.dims;
        [cell / (n1 * n2), (cell / n2) % n1, cell % n2]
    }

    pub fn cell(&self, k: [usize; 3]) -> usize {
        (k[0] * self.dims[1] + k[1]) * self.dims[2] + k[2]
    }

    pub fn config(&self, cell: usize) -> Joints {
        let k = self.coords(cell);
        std::array::from_fn(|j| self.arm.limits[j].0 + k[j] as f64 * self.resolution[j])
    }

    /// Nearest cell to `q`, clamped to the grid.
    pub fn snap(&self, q: &Joints) -> usize {
        let k = std::array::from_fn(|j| {
            let x = ((q[j] - self.arm.limits[j].0) / self.resolution[j]).round();
            (x.max(0.0) as usize).min(self.dims[j] - 1)
        });
        self.cell(k)
    }

    /// Valid neighbors with their step cost, in increasing cell order.
    pub fn neighbors(&self, cell: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let k = self.coords(cell);
        for d0 in -1i64..=1 {
            for d1 in -1i64..=1 {
                for d2 in -1i64..=1 {
                    let d = [d0, d1, d2];
                    if d == [0, 0, 0] {
                        continue;
                    }
                    let mut n = [0usize; 3];
                    let mut inside = true;
                    for j in 0..3 {
                        let v = k[j] as i64 + d[j];
                        inside &= v >= 0 && v < self.dims[j] as i64;
                        n[j] = v.max(0) as usize;
                    }
                    if !inside {
                        continue;
                    }
                    let c = self.cell(n);
                    if self.valid[c] {
                        let cost = (0..3)
                            .map(|j| (d[j] as f64 * self.resolution[j]).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        out.push((c, cost));
                    }
                }
            }
        }
    }

    /// Joint-space Euclidean distance between cell centres.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (qa, qb) = (self.config(a), self.config(b));
        qa.iter().zip(&qb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    /// Cells differ by at most one step along each joint.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.coords(a), self.coords(b));
        a != b && (0..3).all(|j| ka[j].abs_diff(kb[j]) <= 1)
    }
}
