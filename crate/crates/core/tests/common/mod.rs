//! Independent blocks-world model used as a test oracle.
//!
//! States are explicit arrangements (what each block rests on, which block
//! is held, workspace flags, close pairs) and the six skills are written
//! directly against them, without going through the domain encoding.

#![allow(dead_code)]

pub mod expert;

use std::collections::{BTreeSet, HashMap, VecDeque};

use taskexec_core::domain::{ground_skills, standard_domain, GroundedSkill};
use taskexec_core::logic::{LogicalState, ObjectId, Universe, Vocabulary};
use taskexec_core::planner::{Planner, PlannerConfig};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OState {
    pub below: Vec<Option<usize>>,
    pub held: Option<usize>,
    pub ws: Vec<bool>,
    pub close: BTreeSet<(usize, usize)>,
}

impl OState {
    pub fn n(&self) -> usize {
        self.below.len()
    }

    pub fn above(&self, y: usize) -> Option<usize> {
        (0..self.n()).find(|&x| self.below[x] == Some(y))
    }

    pub fn top(&self, x: usize) -> bool {
        self.held != Some(x) && self.above(x).is_none()
    }

    pub fn on_table(&self, x: usize) -> bool {
        self.held != Some(x) && self.below[x].is_none()
    }

    pub fn is_close(&self, x: usize) -> bool {
        self.close.iter().any(|&(a, b)| a == x || b == x)
    }

    /// Tower listed top to bottom, everything else on the table.
    pub fn tower(n: usize, top_down: &[usize]) -> Self {
        let mut below = vec![None; n];
        for w in top_down.windows(2) {
            below[w[0]] = Some(w[1]);
        }
        OState {
            below,
            held: None,
            ws: vec![true; n],
            close: BTreeSet::new(),
        }
    }
}

/// All support arrangements of `n` blocks (plus at most one held block),
/// found by brute force over every `below` assignment.
pub fn arrangements(n: usize) -> Vec<(Vec<Option<usize>>, Option<usize>)> {
    let mut out = Vec::new();
    let choices = (n + 1).pow(n as u32);
    for code in 0..choices {
        let mut c = code;
        let below: Vec<Option<usize>> = (0..n)
            .map(|_| {
                let d = c % (n + 1);
                c /= n + 1;
                if d == n {
                    None
                } else {
                    Some(d)
                }
            })
            .collect();
        let ok_self = (0..n).all(|x| below[x] != Some(x));
        let ok_unique = (0..n).all(|y| (0..n).filter(|&x| below[x] == Some(y)).count() <= 1);
        let acyclic = (0..n).all(|x| {
            let mut cur = x;
            for _ in 0..=n {
                match below[cur] {
                    Some(y) => cur = y,
                    None => return true,
                }
            }
            false
        });
        if !(ok_self && ok_unique && acyclic) {
            continue;
        }
        out.push((below.clone(), None));
        for h in 0..n {
            let free = below[h].is_none() && (0..n).all(|x| below[x] != Some(h));
            if free {
                out.push((below.clone(), Some(h)));
            }
        }
    }
    out
}

pub fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// Every arrangement with every workspace and close-pair assignment.
pub fn all_states(n: usize) -> Vec<OState> {
    let ps = pairs(n);
    let mut out = Vec::new();
    for (below, held) in arrangements(n) {
        for ws_bits in 0..(1u32 << n) {
            for close_bits in 0..(1u32 << ps.len()) {
                out.push(OState {
                    below: below.clone(),
                    held,
                    ws: (0..n).map(|i| ws_bits >> i & 1 == 1).collect(),
                    close: ps
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| close_bits >> i & 1 == 1)
                        .map(|(_, p)| *p)
                        .collect(),
                });
            }
        }
    }
    out
}

/// Skill applications as `(name, args, next state)`.
pub fn moves(s: &OState) -> Vec<(&'static str, Vec<usize>, OState)> {
    let n = s.n();
    let mut out = Vec::new();
    let hand_empty = s.held.is_none();
    for x in 0..n {
        if s.top(x) && s.ws[x] && s.on_table(x) && hand_empty && !s.is_close(x) {
            let mut t = s.clone();
            t.held = Some(x);
            out.push(("ReachOnTable", vec![x], t));
        }
        if s.top(x) && s.ws[x] && s.below[x].is_some() && hand_empty {
            let mut t = s.clone();
            t.held = Some(x);
            t.below[x] = None;
            out.push(("ReachOnTower", vec![x], t));
        }
        if s.held == Some(x) {
            for y in 0..n {
                if y != x && s.top(y) && s.ws[y] {
                    let mut t = s.clone();
                    t.held = None;
                    t.below[x] = Some(y);
                    out.push(("Stack", vec![x, y], t));
                }
            }
            let mut t = s.clone();
            t.held = None;
            t.ws[x] = true;
            out.push(("Unstack", vec![x], t));
        }
        if !s.ws[x] && s.top(x) && s.on_table(x) && hand_empty {
            let mut t = s.clone();
            t.ws[x] = true;
            out.push(("Pull", vec![x], t));
        }
    }
    for &(a, b) in &s.close {
        if s.on_table(a) && s.on_table(b) && hand_empty {
            let mut t = s.clone();
            t.close.remove(&(a, b));
            out.push(("Singulate", vec![a, b], t));
        }
    }
    out
}

pub fn vocab(n: usize) -> Vocabulary {
    Vocabulary::new(
        Universe::first_blocks(n).unwrap(),
        taskexec_core::logic::standard_predicates(),
    )
}

pub fn skills(v: &Vocabulary) -> Vec<GroundedSkill> {
    ground_skills(&standard_domain(), v).unwrap()
}

pub fn planner(v: &Vocabulary) -> Planner {
    Planner::new(skills(v), PlannerConfig::default())
}

/// Atom values read straight off the arrangement.
pub fn to_logical(s: &OState, v: &Vocabulary) -> LogicalState {
    let id = |i: usize| ObjectId(i as u16);
    let pred = |name: &str| v.pred_id(name).unwrap();
    let mut out = v.empty_state();
    for x in 0..s.n() {
        if let Some(y) = s.below[x] {
            out.insert(v.lookup(pred("On"), &[id(x), id(y)]).unwrap());
        }
        if s.held == Some(x) {
            out.insert(v.lookup(pred("InHand"), &[id(x)]).unwrap());
        }
        if s.top(x) {
            out.insert(v.lookup(pred("OnTop"), &[id(x)]).unwrap());
        }
        if s.ws[x] {
            out.insert(v.lookup(pred("InWorkspace"), &[id(x)]).unwrap());
        }
    }
    for &(a, b) in &s.close {
        out.insert(v.lookup(pred("Close"), &[id(a), id(b)]).unwrap());
    }
    out
}

/// Explicit transition graph over a set of oracle states (closed under
/// [`moves`]).
pub struct Graph {
    pub states: Vec<OState>,
    pub logical: Vec<LogicalState>,
    pub succ: Vec<Vec<usize>>,
    pub index: HashMap<LogicalState, usize>,
}

impl Graph {
    pub fn build(seeds: Vec<OState>, v: &Vocabulary) -> Self {
        let mut g = Graph {
            states: Vec::new(),
            logical: Vec::new(),
            succ: Vec::new(),
            index: HashMap::new(),
        };
        let mut by_state: HashMap<OState, usize> = HashMap::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            g.intern(s, v, &mut by_state, &mut queue);
        }
        while let Some(i) = queue.pop_front() {
            let nexts: Vec<OState> = moves(&g.states[i]).into_iter().map(|(_, _, t)| t).collect();
            let mut out = Vec::new();
            for t in nexts {
                out.push(g.intern(t, v, &mut by_state, &mut queue));
            }
            out.sort_unstable();
            out.dedup();
            g.succ[i] = out;
        }
        g
    }

    fn intern(
        &mut self,
        s: OState,
        v: &Vocabulary,
        by_state: &mut HashMap<OState, usize>,
        queue: &mut VecDeque<usize>,
    ) -> usize {
        if let Some(&i) = by_state.get(&s) {
            return i;
        }
        let i = self.states.len();
        let l = to_logical(&s, v);
        self.index.insert(l.clone(), i);
        self.logical.push(l);
        by_state.insert(s.clone(), i);
        self.states.push(s);
        self.succ.push(Vec::new());
        queue.push_back(i);
        i
    }

    /// Shortest number of moves from each state to any target state.
    pub fn distances_to(&self, target: impl Fn(usize) -> bool) -> Vec<Option<usize>> {
        let n = self.states.len();
        let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, ss) in self.succ.iter().enumerate() {
            for &j in ss {
                pred[j].push(i);
            }
        }
        let mut dist = vec![None; n];
        let mut queue = VecDeque::new();
        for (i, d) in dist.iter_mut().enumerate() {
            if target(i) {
                *d = Some(0);
                queue.push_back(i);
            }
        }
        while let Some(j) = queue.pop_front() {
            let d = dist[j].unwrap();
            for &i in &pred[j] {
                if dist[i].is_none() {
                    dist[i] = Some(d + 1);
                    queue.push_back(i);
                }
            }
        }
        dist
    }
}

/// Index of a block by its single-letter alias.
pub fn b(alias: &str) -> usize {
    ["r", "g", "b", "y"].iter().position(|a| *a == alias).unwrap()
}
