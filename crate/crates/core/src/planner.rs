//! Breadth-first forward search over logical states.
//!
//! Actions have uniform cost, so the first goal state generated is reached
//! by a shortest plan. Successors are generated in grounded-skill order,
//! which fixes tie-breaking between equally short plans.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::domain::{successor, GroundedSkill, Plan};
use crate::logic::{satisfies, GoalConditions, LogicalState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    pub max_depth: usize,
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_depth: 20,
            max_expansions: 200_000,
        }
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum NoPlanFound {
    #[error("no plan: search space exhausted")]
    Exhausted,
    #[error("no plan within the depth limit")]
    DepthCap,
    #[error("no plan within the expansion limit")]
    ExpansionCap,
}

struct Node {
    parent: usize,
    skill: usize,
    depth: usize,
}

/// Shortest plan from `state` to any state satisfying `goal`.
pub fn plan(
    state: &LogicalState,
    goal: &GoalConditions,
    skills: &[GroundedSkill],
    cfg: &PlannerConfig,
) -> Result<Plan, NoPlanFound> {
    if satisfies(state, goal) {
        return Ok(Plan::default());
    }
    let mut nodes = vec![Node {
        parent: usize::MAX,
        skill: usize::MAX,
        depth: 0,
    }];
    let mut states = vec![state.clone()];
    let mut seen: HashMap<LogicalState, usize> = HashMap::new();
    seen.insert(state.clone(), 0);
    let mut queue = VecDeque::from([0usize]);
    let mut expansions = 0usize;
    let mut depth_pruned = false;

    while let Some(id) = queue.pop_front() {
        let depth = nodes[id].depth;
        if depth >= cfg.max_depth {
            depth_pruned = true;
            continue;
        }
        if expansions >= cfg.max_expansions {
            return Err(NoPlanFound::ExpansionCap);
        }
        expansions += 1;
        for (si, skill) in skills.iter().enumerate() {
            let Some(next) = successor(skill, &states[id]) else {
                continue;
            };
            if seen.contains_key(&next) {
                continue;
            }
            let child = nodes.len();
            nodes.push(Node {
                parent: id,
                skill: si,
                depth: depth + 1,
            });
            if satisfies(&next, goal) {
                return Ok(extract(&nodes, child, skills));
            }
            seen.insert(next.clone(), child);
            states.push(next);
            queue.push_back(child);
        }
    }
    Err(if depth_pruned {
        NoPlanFound::DepthCap
    } else {
        NoPlanFound::Exhausted
    })
}

fn extract(nodes: &[Node], mut id: usize, skills: &[GroundedSkill]) -> Plan {
    let mut steps = Vec::with_capacity(nodes[id].depth);
    while nodes[id].parent != usize::MAX {
        steps.push(skills[nodes[id].skill].clone());
        id = nodes[id].parent;
    }
    steps.reverse();
    Plan::new(steps)
}

/// Each step's preconditions hold in turn and the final state meets `goal`.
pub fn validate_plan(plan: &Plan, state: &LogicalState, goal: &GoalConditions) -> bool {
    let mut cur = state.clone();
    for step in &plan.steps {
        match successor(step, &cur) {
            Some(next) => cur = next,
            None => return false,
        }
    }
    satisfies(&cur, goal)
}

/// States visited by executing `plan` from `state`, starting with `state`.
/// Stops early at the first inapplicable step.
pub fn predicted_states(plan: &Plan, state: &LogicalState) -> Vec<LogicalState> {
    let mut out = vec![state.clone()];
    for step in &plan.steps {
        match successor(step, out.last().expect("nonempty")) {
            Some(next) => out.push(next),
            None => break,
        }
    }
    out
}

/// Planner bound to a grounded skill library.
#[derive(Clone, Debug)]
pub struct Planner {
    skills: Arc<[GroundedSkill]>,
    cfg: PlannerConfig,
}

impl Planner {
    pub fn new(skills: impl Into<Arc<[GroundedSkill]>>, cfg: PlannerConfig) -> Self {
        Planner {
            skills: skills.into(),
            cfg,
        }
    }

    pub fn skills(&self) -> &[GroundedSkill] {
        &self.skills
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn plan(&self, state: &LogicalState, goal: &GoalConditions) -> Result<Plan, NoPlanFound> {
        plan(state, goal, &self.skills, &self.cfg)
    }
}
