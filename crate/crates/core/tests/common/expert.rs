//! Oracles for the arm and the grid search: a homogeneous-transform chain
//! for kinematics and plain Dijkstra for shortest paths.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use taskexec_core::expert::{ArmModel, CSpaceGrid, Obstacle, SearchSpace};

type Mat = [[f64; 3]; 3];

fn mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn rot(t: f64) -> Mat {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn trans(x: f64, y: f64) -> Mat {
    [[1.0, 0.0, x], [0.0, 1.0, y], [0.0, 0.0, 1.0]]
}

/// End-effector transform as a product of 2D homogeneous matrices.
pub fn fk_matrix(arm: &ArmModel, q: &[f64; 3]) -> Mat {
    let mut t = mul(&trans(arm.base.x, arm.base.y), &rot(arm.base.theta));
    for (qj, len) in q.iter().zip(arm.links) {
        t = mul(&t, &rot(*qj));
        t = mul(&t, &trans(len, 0.0));
    }
    t
}

/// Frame points read off the matrix: origin plus `d` times each axis column.
pub fn matrix_points(t: &Mat, d: f64) -> ([f64; 2], [f64; 2]) {
    (
        [t[0][2] + d * t[0][0], t[1][2] + d * t[1][0]],
        [t[0][2] + d * t[0][1], t[1][2] + d * t[1][1]],
    )
}

/// Exact shortest-path cost from `start` to `goal`.
pub fn dijkstra<S: SearchSpace>(space: &S, start: usize, goal: usize) -> Option<f64> {
    let mut dist = vec![f64::INFINITY; space.num_states()];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    // costs are non-negative, so their bit patterns order like the values
    heap.push(Reverse((0f64.to_bits(), start)));
    let mut buf = Vec::new();
    while let Some(Reverse((bits, s))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[s] {
            continue;
        }
        if s == goal {
            return Some(d);
        }
        space.successors(s, &mut buf);
        for &(t, c) in &buf {
            let nd = d + c;
            if nd < dist[t] {
                dist[t] = nd;
                heap.push(Reverse((nd.to_bits(), t)));
            }
        }
    }
    None
}

/// Coarse grid with a few random obstacles.
pub fn random_grid<R: Rng>(rng: &mut R) -> CSpaceGrid {
    let res = rng.gen_range(0.35..0.6);
    let obstacles = (0..rng.gen_range(0..4))
        .map(|_| Obstacle {
            center: [rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5)],
            radius: rng.gen_range(0.1..0.6),
        })
        .collect();
    CSpaceGrid::new(ArmModel::default(), [res; 3], obstacles).unwrap()
}

/// Random collision-free cell.
pub fn valid_cell<R: Rng>(grid: &CSpaceGrid, rng: &mut R) -> Option<usize> {
    (0..1000)
        .map(|_| rng.gen_range(0..grid.len()))
        .find(|&c| grid.is_valid(c))
}
