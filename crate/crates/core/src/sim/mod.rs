//! Stochastic blocks-world simulator.
//!
//! The world keeps a concrete support relation per block plus workspace,
//! recoverability and proximity facts. Skills succeed, no-op, drop the block
//! or topple a tower; sensing flips each predicate with its own false
//! positive and false negative rates.

mod scenario;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{
    preconditions_hold, GroundedSkill, PULL, REACH_ON_TABLE, REACH_ON_TOWER, SINGULATE, STACK, UNSTACK,
};
use crate::executor::{Environment, SkillReport};
use crate::logic::{GoalConditions, LogicalState, ObjectId, Source, Vocabulary};

pub use scenario::{parse_scenario, CustomLayout, Layout, Scenario, ScenarioError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Support {
    Table,
    Block(ObjectId),
    Hand,
}

/// Ground-truth world.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub support: Vec<Support>,
    pub in_workspace: Vec<bool>,
    /// A block knocked far away may be lost for good; `Pull` cannot fetch it.
    pub recoverable: Vec<bool>,
    /// Unordered pairs stored as `(min, max)`.
    pub close: BTreeSet<(ObjectId, ObjectId)>,
    pub rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(n: usize, seed: u64) -> Self {
        WorldState {
            support: vec![Support::Table; n],
            in_workspace: vec![true; n],
            recoverable: vec![true; n],
            close: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    fn ids(&self) -> impl Iterator<Item = ObjectId> {
        (0..self.len() as u16).map(ObjectId)
    }

    pub fn held(&self) -> Option<ObjectId> {
        self.ids().find(|x| self.support[x.index()] == Support::Hand)
    }

    /// Block resting directly on `y`.
    pub fn above(&self, y: ObjectId) -> Option<ObjectId> {
        self.ids().find(|x| self.support[x.index()] == Support::Block(y))
    }

    pub fn on_table(&self, x: ObjectId) -> bool {
        self.support[x.index()] == Support::Table
    }

    /// Blocks from the table up to and including `x`; `x` must not be held.
    fn column_below(&self, x: ObjectId) -> Vec<ObjectId> {
        let mut out = vec![x];
        let mut cur = x;
        while let Support::Block(y) = self.support[cur.index()] {
            out.push(y);
            cur = y;
        }
        out.reverse();
        out
    }

    /// Number of blocks in the tower through `x`, counting from the table
    /// to the top.
    pub fn tower_height(&self, x: ObjectId) -> usize {
        if self.support[x.index()] == Support::Hand {
            return 0;
        }
        let mut h = self.column_below(x).len();
        let mut cur = x;
        while let Some(z) = self.above(cur) {
            h += 1;
            cur = z;
        }
        h
    }

    /// Towers as bottom-to-top lists.
    pub fn towers(&self) -> Vec<Vec<ObjectId>> {
        self.ids()
            .filter(|&x| self.on_table(x))
            .map(|base| {
                let mut t = vec![base];
                while let Some(z) = self.above(*t.last().unwrap()) {
                    t.push(z);
                }
                t
            })
            .collect()
    }

    pub fn tallest_tower(&self) -> usize {
        self.towers().iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Supports are acyclic, each block carries at most one other block and
    /// at most one block is held.
    pub fn is_valid(&self) -> bool {
        let n = self.len();
        let mut carried = vec![0usize; n];
        for s in &self.support {
            if let Support::Block(y) = s {
                if y.index() >= n {
                    return false;
                }
                carried[y.index()] += 1;
            }
        }
        if carried.iter().any(|&c| c > 1) {
            return false;
        }
        if self.support.iter().filter(|s| **s == Support::Hand).count() > 1 {
            return false;
        }
        for x in self.ids() {
            let mut cur = x;
            let mut steps = 0;
            while let Support::Block(y) = self.support[cur.index()] {
                cur = y;
                steps += 1;
                if steps > n {
                    return false;
                }
            }
        }
        true
    }

    pub fn set_close(&mut self, a: ObjectId, b: ObjectId) {
        if a != b {
            self.close.insert((a.min(b), a.max(b)));
        }
    }

    pub fn is_close(&self, a: ObjectId, b: ObjectId) -> bool {
        self.close.contains(&(a.min(b), a.max(b)))
    }

    fn roll(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }
}

/// Logical state that holds exactly in `world`.
pub fn project_ground_truth(world: &WorldState, vocab: &Vocabulary) -> LogicalState {
    let p = vocab.blocks();
    let mut s = vocab.empty_state();
    let mut put = |pred: Option<crate::logic::PredId>, args: &[ObjectId]| {
        if let Some(i) = pred.and_then(|pr| vocab.lookup(pr, args)) {
            s.insert(i);
        }
    };
    for x in world.ids() {
        match world.support[x.index()] {
            Support::Hand => put(p.in_hand, &[x]),
            Support::Block(y) => put(p.on, &[x, y]),
            Support::Table => {}
        }
        if world.support[x.index()] != Support::Hand && world.above(x).is_none() {
            put(p.on_top, &[x]);
        }
        if world.in_workspace[x.index()] {
            put(p.in_workspace, &[x]);
        }
    }
    for &(a, b) in &world.close {
        put(p.close, &[a, b]);
    }
    s
}

pub fn goal_achieved(world: &WorldState, vocab: &Vocabulary, goal: &GoalConditions) -> bool {
    crate::logic::satisfies(&project_ground_truth(world, vocab), goal)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureMode {
    Nominal,
    /// Nothing changes.
    NoOp,
    /// The manipulated block ends up on the table.
    Drop,
    /// The tower collapses and its blocks scatter.
    Topple,
    /// Preconditions did not hold in the world; nothing changes.
    Flail,
}

impl FailureMode {
    pub fn label(self) -> &'static str {
        match self {
            FailureMode::Nominal => "nominal",
            FailureMode::NoOp => "noop",
            FailureMode::Drop => "drop",
            FailureMode::Topple => "topple",
            FailureMode::Flail => "flail",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SkillKind {
    ReachOnTable,
    ReachOnTower,
    Stack,
    Unstack,
    Pull,
    Singulate,
}

impl SkillKind {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            REACH_ON_TABLE => SkillKind::ReachOnTable,
            REACH_ON_TOWER => SkillKind::ReachOnTower,
            STACK => SkillKind::Stack,
            UNSTACK => SkillKind::Unstack,
            PULL => SkillKind::Pull,
            SINGULATE => SkillKind::Singulate,
            _ => return None,
        })
    }
}

/// Skill outcome probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureModel {
    /// Failure probability for skills without an entry in `p_fail`.
    pub p_fail_default: f64,
    pub p_fail: BTreeMap<String, f64>,
    /// Per-level topple hazard for `Stack`/`ReachOnTower` on a tower of
    /// height `h`: `topple_base * (h - 1)`.
    pub topple_base: f64,
    /// Chance a scattered block leaves the workspace.
    pub p_eject: f64,
    /// Chance an ejected block is unrecoverable.
    pub p_eject_hard: f64,
    /// Chance a block landing on the table ends up Close to another.
    pub p_drop_close: f64,
}

impl Default for FailureModel {
    fn default() -> Self {
        FailureModel {
            p_fail_default: 0.10,
            p_fail: BTreeMap::new(),
            topple_base: 0.05,
            p_eject: 0.3,
            p_eject_hard: 0.1,
            p_drop_close: 0.3,
        }
    }
}

impl FailureModel {
    /// Skills always do exactly what their effects say.
    pub fn deterministic() -> Self {
        FailureModel {
            p_fail_default: 0.0,
            p_fail: BTreeMap::new(),
            topple_base: 0.0,
            p_eject: 0.0,
            p_eject_hard: 0.0,
            p_drop_close: 0.0,
        }
    }

    pub fn p_fail(&self, skill: &str) -> f64 {
        self.p_fail.get(skill).copied().unwrap_or(self.p_fail_default)
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("p_fail", self.p_fail_default),
            ("topple_base", self.topple_base),
            ("p_eject", self.p_eject),
            ("p_eject_hard", self.p_eject_hard),
            ("p_drop_close", self.p_drop_close),
        ];
        for (name, p) in all.into_iter().chain(self.p_fail.iter().map(|(k, v)| (k.as_str(), *v))) {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }
}

/// What happened during one skill execution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SkillEvent {
    pub mode: FailureMode,
    pub terminated: bool,
    /// Blocks that left the workspace.
    pub ejected: Vec<ObjectId>,
}

/// Runs `skill` in `world`. `forced` overrides the sampled outcome (a
/// forced outcome that does not apply to the skill degrades to `NoOp`).
pub fn execute_skill(
    world: &mut WorldState,
    vocab: &Vocabulary,
    skill: &GroundedSkill,
    failures: &FailureModel,
    forced: Option<FailureMode>,
) -> SkillEvent {
    let mut event = SkillEvent {
        mode: FailureMode::Nominal,
        terminated: true,
        ejected: Vec::new(),
    };
    let Some(kind) = SkillKind::from_name(&skill.name) else {
        event.mode = FailureMode::Flail;
        return event;
    };
    let x = skill.args[0];
    let gt = project_ground_truth(world, vocab);
    if !preconditions_hold(skill, &gt) || (kind == SkillKind::Pull && !world.recoverable[x.index()]) {
        event.mode = FailureMode::Flail;
        return event;
    }

    // tower the skill works on, if any
    let tower_at = match kind {
        SkillKind::Stack => Some(skill.args[1]),
        SkillKind::ReachOnTower => Some(x),
        _ => None,
    };
    let height = tower_at.map_or(0, |t| world.tower_height(t));
    let mut candidates = vec![FailureMode::NoOp];
    match kind {
        SkillKind::ReachOnTable | SkillKind::ReachOnTower | SkillKind::Unstack => candidates.push(FailureMode::Drop),
        SkillKind::Stack => {
            candidates.push(FailureMode::Drop);
            if height >= 2 {
                candidates.push(FailureMode::Topple);
            }
        }
        SkillKind::Pull | SkillKind::Singulate => {}
    }

    let mode = match forced {
        Some(m) if m == FailureMode::Nominal || candidates.contains(&m) => m,
        Some(FailureMode::Topple) if tower_at.is_some() => FailureMode::Topple,
        Some(_) => FailureMode::NoOp,
        None => {
            let hazard = (failures.topple_base * height.saturating_sub(1) as f64).min(1.0);
            if tower_at.is_some() && world.roll(hazard) {
                FailureMode::Topple
            } else if world.roll(failures.p_fail(&skill.name)) {
                candidates[world.rng.gen_range(0..candidates.len())]
            } else {
                FailureMode::Nominal
            }
        }
    };
    event.mode = mode;

    match mode {
        FailureMode::Nominal => match kind {
            SkillKind::ReachOnTable | SkillKind::ReachOnTower => world.support[x.index()] = Support::Hand,
            SkillKind::Stack => world.support[x.index()] = Support::Block(skill.args[1]),
            SkillKind::Unstack => {
                world.support[x.index()] = Support::Table;
                world.in_workspace[x.index()] = true;
            }
            SkillKind::Pull => world.in_workspace[x.index()] = true,
            SkillKind::Singulate => {
                let y = skill.args[1];
                world.close.remove(&(x.min(y), x.max(y)));
            }
        },
        FailureMode::NoOp | FailureMode::Flail => {}
        FailureMode::Drop => {
            world.support[x.index()] = Support::Table;
            land_on_table(world, x, failures.p_drop_close);
        }
        FailureMode::Topple => {
            let t = tower_at.expect("topple needs a tower");
            event.ejected = topple(world, t, failures);
        }
    }
    event
}

/// Scatters every block above the base of the tower through `t`, plus the
/// held block, onto the table.
fn topple(world: &mut WorldState, t: ObjectId, failures: &FailureModel) -> Vec<ObjectId> {
    let mut scattered = Vec::new();
    if world.support[t.index()] != Support::Hand {
        let mut cur = world.column_below(t)[0];
        while let Some(z) = world.above(cur) {
            scattered.push(z);
            cur = z;
        }
    }
    if let Some(h) = world.held() {
        scattered.push(h);
    }
    for &z in &scattered {
        world.support[z.index()] = Support::Table;
    }
    let mut ejected = Vec::new();
    for &z in &scattered {
        if world.roll(failures.p_eject) {
            world.in_workspace[z.index()] = false;
            if world.roll(failures.p_eject_hard) {
                world.recoverable[z.index()] = false;
            }
            ejected.push(z);
        } else {
            land_on_table(world, z, failures.p_drop_close);
        }
    }
    ejected
}

fn land_on_table(world: &mut WorldState, x: ObjectId, p_close: f64) {
    if !world.roll(p_close) {
        return;
    }
    let others: Vec<ObjectId> = world
        .ids()
        .filter(|&z| z != x && world.on_table(z) && world.in_workspace[z.index()])
        .collect();
    if !others.is_empty() {
        let z = others[world.rng.gen_range(0..others.len())];
        world.set_close(x, z);
    }
}

/// Per-predicate false positive and false negative rates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensorModel {
    /// Indexed by predicate id.
    pub fp: Vec<f64>,
    pub fn_: Vec<f64>,
    /// Chance a termination signal is reported when the skill is still
    /// running, and missed when it has stopped.
    pub term_fp: f64,
    pub term_fn: f64,
}

impl SensorModel {
    pub fn perfect(vocab: &Vocabulary) -> Self {
        let n = vocab.predicates().len();
        SensorModel {
            fp: vec![0.0; n],
            fn_: vec![0.0; n],
            term_fp: 0.0,
            term_fn: 0.0,
        }
    }

    /// Same rates on every learned predicate; manually designed ones are
    /// exact.
    pub fn learned(vocab: &Vocabulary, fp: f64, fn_: f64) -> Self {
        let mut s = Self::perfect(vocab);
        for (i, p) in vocab.predicates().iter().enumerate() {
            if p.source == Source::Learned {
                s.fp[i] = fp;
                s.fn_[i] = fn_;
            }
        }
        s
    }

    pub fn set_rates(&mut self, vocab: &Vocabulary, predicate: &str, fp: f64, fn_: f64) -> bool {
        match vocab.pred_id(predicate) {
            Some(p) => {
                self.fp[p.index()] = fp;
                self.fn_[p.index()] = fn_;
                true
            }
            None => false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for &p in self.fp.iter().chain(&self.fn_).chain([&self.term_fp, &self.term_fn]) {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("sensor rate {p} is not a probability"));
            }
        }
        Ok(())
    }
}

/// Noisy observation of `world`. One uniform draw per atom, so the number of
/// draws does not depend on the world.
pub fn observe(world: &mut WorldState, vocab: &Vocabulary, sensor: &SensorModel) -> LogicalState {
    let truth = project_ground_truth(world, vocab);
    let mut s = vocab.empty_state();
    for i in 0..vocab.len() {
        let p = vocab.atom(i).pred.index();
        let u: f64 = world.rng.gen();
        let held = truth.contains(i);
        let sensed = if held { u >= sensor.fn_[p] } else { u < sensor.fp[p] };
        s.set(i, sensed);
    }
    s
}

/// Simulator wrapped as an executor [`Environment`].
pub struct SimEnv<'a> {
    pub vocab: &'a Vocabulary,
    pub world: WorldState,
    pub failures: FailureModel,
    pub sensor: SensorModel,
    /// Forced outcomes keyed by zero-based skill call index.
    pub script: HashMap<usize, FailureMode>,
    pub events: Vec<SkillEvent>,
}

impl<'a> SimEnv<'a> {
    pub fn new(vocab: &'a Vocabulary, world: WorldState, failures: FailureModel, sensor: SensorModel) -> Self {
        SimEnv {
            vocab,
            world,
            failures,
            sensor,
            script: HashMap::new(),
            events: Vec::new(),
        }
    }

    pub fn with_script(mut self, script: impl IntoIterator<Item = (usize, FailureMode)>) -> Self {
        self.script.extend(script);
        self
    }

    pub fn ground_truth(&self) -> LogicalState {
        project_ground_truth(&self.world, self.vocab)
    }
}

impl Environment for SimEnv<'_> {
    fn observe(&mut self) -> LogicalState {
        observe(&mut self.world, self.vocab, &self.sensor)
    }

    fn execute_skill(&mut self, skill: &GroundedSkill) -> SkillReport {
        let forced = self.script.get(&self.events.len()).copied();
        let mut event = execute_skill(&mut self.world, self.vocab, skill, &self.failures, forced);
        let flip = if event.terminated {
            self.sensor.term_fn
        } else {
            self.sensor.term_fp
        };
        if flip > 0.0 && self.world.roll(flip) {
            event.terminated = !event.terminated;
        }
        let report = SkillReport {
            terminated: event.terminated,
            label: event.mode.label(),
        };
        self.events.push(event);
        report
    }
}
