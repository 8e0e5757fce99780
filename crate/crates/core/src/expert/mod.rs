//! Expert demonstrations for imitation learning on a planar arm.
//!
//! Expert trajectories are ARA* paths through the collision-checked joint
//! grid from random starts to a grasp goal. States sampled densely around
//! the goal are labelled terminal; everything else on a trajectory is a
//! negative example for the termination model.

pub mod ara;
pub mod arm;
pub mod grid;

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use ara::{ara_star, path_cost, AraConfig, AraError, Published, SearchSpace};
pub use arm::{
    combined_loss, frame_points, joint_space_loss, op_space_loss, op_space_loss_grad, ArmError, ArmModel, Frame, Joints,
};
pub use grid::{CSpaceGrid, GridError, Obstacle};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub cells: Vec<usize>,
    pub states: Vec<Joints>,
    pub cost: f64,
}

impl Trajectory {
    pub fn terminal_index(&self) -> usize {
        self.states.len() - 1
    }

    /// Consecutive cells are neighbors, every cell is collision-free and
    /// the last one is `goal`.
    pub fn is_valid(&self, grid: &CSpaceGrid, goal: usize) -> bool {
        !self.cells.is_empty()
            && self.cells.last() == Some(&goal)
            && self.cells.iter().all(|&c| grid.is_valid(c))
            && self.cells.windows(2).all(|w| grid.adjacent(w[0], w[1]))
    }
}

/// Expert path between two cells: the final ARA* solution.
pub fn expert_path(grid: &CSpaceGrid, start: usize, goal: usize, cfg: &AraConfig) -> Result<Trajectory, AraError> {
    if !grid.is_valid(start) || !grid.is_valid(goal) {
        return Err(AraError::InvalidEndpoint);
    }
    let best = ara_star(grid, start, goal, cfg)?.pop().expect("at least one iteration");
    Ok(Trajectory {
        states: best.path.iter().map(|&c| grid.config(c)).collect(),
        cells: best.path,
        cost: best.cost,
    })
}

/// RNG for item `index` under `seed`: its own ChaCha stream.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

const START_ATTEMPTS: usize = 1000;

/// Up to `n` trajectories from random valid starts to `goal`. Trajectory
/// `i` depends only on `(seed, i)`; indices whose start cannot reach the
/// goal are skipped with a warning.
pub fn generate_trajectories(
    n: usize,
    grid: &CSpaceGrid,
    goal: usize,
    seed: u64,
    cfg: &AraConfig,
) -> Vec<(usize, Trajectory)> {
    (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let start = (0..START_ATTEMPTS)
                .map(|_| rng.gen_range(0..grid.len()))
                .find(|&c| grid.is_valid(c));
            let Some(start) = start else {
                log::warn!("trajectory {i}: no valid start found");
                return None;
            };
            match expert_path(grid, start, goal, cfg) {
                Ok(t) => Some((i, t)),
                Err(e) => {
                    log::warn!("trajectory {i}: {e}");
                    None
                }
            }
        })
        .collect()
}

/// Up to `k` distinct collision-free cells within L-infinity distance
/// `delta` (radians) of `center`, chosen at random.
pub fn dense_goal_samples<R: Rng>(grid: &CSpaceGrid, center: usize, k: usize, delta: f64, rng: &mut R) -> Vec<usize> {
    let c = grid.coords(center);
    let dims = grid.dims();
    let reach: [usize; 3] = std::array::from_fn(|j| (delta / grid.resolution[j] + 1e-9).floor().max(0.0) as usize);
    let mut ball = Vec::new();
    for a in c[0].saturating_sub(reach[0])..=(c[0] + reach[0]).min(dims[0] - 1) {
        for b in c[1].saturating_sub(reach[1])..=(c[1] + reach[1]).min(dims[1] - 1) {
            for d in c[2].saturating_sub(reach[2])..=(c[2] + reach[2]).min(dims[2] - 1) {
                let cell = grid.cell([a, b, d]);
                if grid.is_valid(cell) {
                    ball.push(cell);
                }
            }
        }
    }
    ball.shuffle(rng);
    ball.truncate(k);
    if ball.len() < k {
        log::warn!("only {} of {k} terminal samples available", ball.len());
    }
    ball
}

/// Scene description attached to every row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub q: Joints,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetRow {
    pub traj_id: usize,
    /// Step along the trajectory; `None` for dense terminal samples.
    pub t: Option<usize>,
    pub q: Joints,
    pub o: Observation,
    pub terminal: bool,
    /// Final configuration of the expert trajectory.
    pub goal_q: Joints,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpertConfig {
    pub trajectories: usize,
    pub goal: Joints,
    /// Terminal samples per trajectory.
    pub dense_k: usize,
    pub dense_delta: f64,
    /// Keep every n-th path state; the last one is always kept.
    pub record_every: usize,
    pub seed: u64,
    pub ara: AraConfig,
}

impl Default for ExpertConfig {
    fn default() -> Self {
        ExpertConfig {
            trajectories: 10,
            goal: [0.6, -0.8, 0.4],
            dense_k: 10,
            dense_delta: 0.3,
            record_every: 1,
            seed: 0,
            ara: AraConfig::default(),
        }
    }
}

/// Trajectory rows followed by dense terminal samples, per trajectory.
/// Only the last trajectory state and the dense samples are terminal.
pub fn build_dataset(grid: &CSpaceGrid, cfg: &ExpertConfig) -> Vec<DatasetRow> {
    let goal = grid.snap(&cfg.goal);
    let trajs = generate_trajectories(cfg.trajectories, grid, goal, cfg.seed, &cfg.ara);
    let obstacles = grid.obstacles.clone();
    let mut rows = Vec::new();
    for (id, traj) in trajs {
        let goal_q = *traj.states.last().expect("nonempty");
        let row = |t: Option<usize>, q: Joints, terminal: bool| DatasetRow {
            traj_id: id,
            t,
            q,
            o: Observation {
                q,
                obstacles: obstacles.clone(),
            },
            terminal,
            goal_q,
        };
        let last = traj.terminal_index();
        let every = cfg.record_every.max(1);
        rows.extend(
            traj.states
                .iter()
                .enumerate()
                .filter(|&(t, _)| t % every == 0 || t == last)
                .map(|(t, &q)| row(Some(t), q, t == last)),
        );
        // separate stream from the start sampling
        let mut rng = stream_rng(cfg.seed ^ 0xd3_45e5, id as u64);
        for cell in dense_goal_samples(grid, goal, cfg.dense_k, cfg.dense_delta, &mut rng) {
            rows.push(row(None, grid.config(cell), true));
        }
    }
    rows
}

pub fn write_dataset<W: Write>(rows: &[DatasetRow], mut out: W) -> io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
