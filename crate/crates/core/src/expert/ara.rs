//! Anytime Repairing A*.
//!
//! Runs weighted A* with a decreasing inflation factor, reusing g-values
//! between iterations: states improved after being expanded within an
//! iteration wait in INCONS and rejoin OPEN when the inflation drops.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;
use thiserror::Error;

use super::grid::CSpaceGrid;

/// Graph searched by [`ara_star`].
pub trait SearchSpace {
    fn num_states(&self) -> usize;
    /// Replaces `out` with `(successor, edge cost)` pairs.
    fn successors(&self, s: usize, out: &mut Vec<(usize, f64)>);
    /// Admissible and consistent estimate of the cost from `s` to `goal`.
    fn heuristic(&self, s: usize, goal: usize) -> f64;
}

impl SearchSpace for CSpaceGrid {
    fn num_states(&self) -> usize {
        self.len()
    }

    fn successors(&self, s: usize, out: &mut Vec<(usize, f64)>) {
        self.neighbors(s, out)
    }

    fn heuristic(&self, s: usize, goal: usize) -> f64 {
        self.distance(s, goal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AraConfig {
    pub eps_init: f64,
    pub eps_step: f64,
    pub eps_final: f64,
}

impl Default for AraConfig {
    fn default() -> Self {
        AraConfig {
            eps_init: 3.0,
            eps_step: 0.5,
            eps_final: 1.0,
        }
    }
}

impl AraConfig {
    pub fn validate(&self) -> Result<(), AraError> {
        let ok = self.eps_final >= 1.0 && self.eps_init >= self.eps_final && self.eps_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(AraError::BadConfig(*self))
        }
    }

    /// `eps_init`, `eps_init - eps_step`, ..., ending exactly at `eps_final`.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let eps = self.eps_init - f64::from(k) * self.eps_step;
            if eps <= self.eps_final + 1e-12 {
                out.push(self.eps_final);
                return out;
            }
            out.push(eps);
            k += 1;
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum AraError {
    #[error("goal is unreachable")]
    NoPath,
    #[error("start or goal is not a valid state")]
    InvalidEndpoint,
    #[error("inflation schedule {0:?} is invalid")]
    BadConfig(AraConfig),
}

/// Solution published at the end of one inflation level.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Published {
    pub path: Vec<usize>,
    pub cost: f64,
    pub eps: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Set {
    None,
    Open,
    Closed,
    Incons,
}

struct Search<'a, S: SearchSpace + ?Sized> {
    space: &'a S,
    goal: usize,
    g: Vec<f64>,
    parent: Vec<usize>,
    set: Vec<Set>,
    heap: BinaryHeap<Reverse<Key>>,
    eps: f64,
    buf: Vec<(usize, f64)>,
}

impl<S: SearchSpace + ?Sized> Search<'_, S> {
    fn f(&self, s: usize) -> f64 {
        self.g[s] + self.eps * self.space.heuristic(s, self.goal)
    }

    fn push(&mut self, s: usize) {
        self.set[s] = Set::Open;
        self.heap.push(Reverse(Key(self.f(s), s)));
    }

    /// Smallest live OPEN entry; stale heap entries are dropped.
    fn peek(&mut self) -> Option<Key> {
        while let Some(&Reverse(k)) = self.heap.peek() {
            if self.set[k.1] == Set::Open && k.0 == self.f(k.1) {
                return Some(k);
            }
            self.heap.pop();
        }
        None
    }

    fn improve_path(&mut self) {
        while let Some(top) = self.peek() {
            if self.g[self.goal] <= top.0 {
                break;
            }
            self.heap.pop();
            let s = top.1;
            self.set[s] = Set::Closed;
            let mut buf = std::mem::take(&mut self.buf);
            self.space.successors(s, &mut buf);
            for &(t, c) in &buf {
                let cand = self.g[s] + c;
                if cand < self.g[t] {
                    self.g[t] = cand;
                    self.parent[t] = s;
                    if self.set[t] == Set::Closed || self.set[t] == Set::Incons {
                        self.set[t] = Set::Incons;
                    } else {
                        self.push(t);
                    }
                }
            }
            self.buf = buf;
        }
    }

    fn path(&self, start: usize) -> Vec<usize> {
        let mut out = vec![self.goal];
        let mut cur = self.goal;
        while cur != start {
            cur = self.parent[cur];
            out.push(cur);
        }
        out.reverse();
        out
    }
}

/// Sum of edge costs along `path`, or `None` if some step is not an edge.
pub fn path_cost<S: SearchSpace + ?Sized>(space: &S, path: &[usize]) -> Option<f64> {
    let mut buf = Vec::new();
    let mut total = 0.0;
    for w in path.windows(2) {
        space.successors(w[0], &mut buf);
        total += buf.iter().find(|(t, _)| *t == w[1])?.1;
    }
    Some(total)
}

/// One published solution per inflation level, from `eps_init` down to
/// `eps_final`. Each is within its `eps` of optimal and costs never
/// increase from one level to the next.
pub fn ara_star<S: SearchSpace + ?Sized>(
    space: &S,
    start: usize,
    goal: usize,
    cfg: &AraConfig,
) -> Result<Vec<Published>, AraError> {
    cfg.validate()?;
    let n = space.num_states();
    if start >= n || goal >= n {
        return Err(AraError::InvalidEndpoint);
    }
    let mut search = Search {
        space,
        goal,
        g: vec![f64::INFINITY; n],
        parent: vec![usize::MAX; n],
        set: vec![Set::None; n],
        heap: BinaryHeap::new(),
        eps: cfg.eps_init,
        buf: Vec::new(),
    };
    search.g[start] = 0.0;
    search.push(start);

    let mut published: Vec<Published> = Vec::new();
    for eps in cfg.schedule() {
        if eps != search.eps {
            search.eps = eps;
            // OPEN <- OPEN u INCONS, re-keyed; CLOSED <- {}
            search.heap.clear();
            for s in 0..n {
                match search.set[s] {
                    Set::Open | Set::Incons => search.push(s),
                    Set::Closed => search.set[s] = Set::None,
                    Set::None => {}
                }
            }
        }
        search.improve_path();
        if search.g[goal].is_infinite() {
            return Err(AraError::NoPath);
        }
        let path = search.path(start);
        let cost = path_cost(space, &path).expect("parent links follow edges");
        log::trace!("ara*: eps {eps} cost {cost}");
        // keep the best path found so far
        let sol = match published.last() {
            Some(prev) if prev.cost <= cost => Published { eps, ..prev.clone() },
            _ => Published { path, cost, eps },
        };
        published.push(sol);
    }
    Ok(published)
}
