//! Monte-Carlo experiments: many simulated episodes per execution mode.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::executor::{execute, ExecConfig, ExecOutcome};
use crate::logic::{GoalConditions, Vocabulary};
use crate::planner::Planner;
use crate::sim::{goal_achieved, FailureModel, Scenario, ScenarioError, SensorModel, SimEnv, SkillEvent, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Mode {
    /// One plan, each step once.
    None,
    /// One plan, up to five executions per step.
    RetrialsOnly,
    /// Up to five plans and five executions per step.
    Full,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::None, Mode::RetrialsOnly, Mode::Full];

    pub fn exec_config(self) -> ExecConfig {
        let (max_replans, max_retrials) = match self {
            Mode::None => (0, 0),
            Mode::RetrialsOnly => (1, 5),
            Mode::Full => (5, 5),
        };
        ExecConfig {
            max_replans,
            max_retrials,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::RetrialsOnly => "retrials-only",
            Mode::Full => "full",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResetPolicy {
    EveryEpisode,
    /// A successful episode hands its final world (and the next goal) to
    /// the following one.
    OnFailureOnly,
}

impl ResetPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ResetPolicy::EveryEpisode => "every-episode",
            ResetPolicy::OnFailureOnly => "on-failure-only",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub modes: Vec<Mode>,
    pub trials: usize,
    pub master_seed: u64,
    pub failures: FailureModel,
    pub sensor: SensorModel,
    pub reset: ResetPolicy,
}

/// Seed of trial `index`; the same for every mode so trials are paired.
pub fn trial_seed(master_seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    /// Judged on the true world, not on what the executor sensed.
    pub success: bool,
    pub outcome: ExecOutcome,
    pub events: Vec<SkillEvent>,
    pub world: WorldState,
    pub goal_index: usize,
}

impl EpisodeResult {
    /// Length of the first plan, if one was found.
    pub fn initial_plan_len(&self) -> Option<usize> {
        self.outcome.plans.first().and_then(|p| p.length)
    }

    pub fn tallest_tower(&self) -> usize {
        self.world.tallest_tower()
    }
}

/// One executor episode on `world`.
pub fn run_episode<'v>(
    vocab: &'v Vocabulary,
    planner: &Planner,
    goal: &GoalConditions,
    world: WorldState,
    cfg: &ExecConfig,
    failures: &FailureModel,
    sensor: &SensorModel,
) -> (ExecOutcome, SimEnv<'v>) {
    let mut env = SimEnv::new(vocab, world, failures.clone(), sensor.clone());
    let outcome = execute(goal, cfg, &mut env, planner);
    (outcome, env)
}

fn episode(
    spec: &ExperimentSpec,
    vocab: &Vocabulary,
    planner: &Planner,
    mode: Mode,
    world: WorldState,
    goal_index: usize,
) -> EpisodeResult {
    let goal = spec.scenario.goal(goal_index);
    let (outcome, env) = run_episode(
        vocab,
        planner,
        goal,
        world,
        &mode.exec_config(),
        &spec.failures,
        &spec.sensor,
    );
    EpisodeResult {
        success: goal_achieved(&env.world, vocab, goal),
        outcome,
        events: env.events,
        world: env.world,
        goal_index,
    }
}

/// All trials of one mode, in trial order.
pub fn run_mode(
    spec: &ExperimentSpec,
    vocab: &Vocabulary,
    planner: &Planner,
    mode: Mode,
) -> Result<Vec<EpisodeResult>, ScenarioError> {
    let n = vocab.universe().len();
    match spec.reset {
        ResetPolicy::EveryEpisode => (0..spec.trials)
            .into_par_iter()
            .map(|i| {
                let world = spec.scenario.reset(n, trial_seed(spec.master_seed, i))?;
                Ok(episode(spec, vocab, planner, mode, world, 0))
            })
            .collect(),
        ResetPolicy::OnFailureOnly => {
            let mut out: Vec<EpisodeResult> = Vec::with_capacity(spec.trials);
            for i in 0..spec.trials {
                let seed = trial_seed(spec.master_seed, i);
                let (world, goal_index) = match out.last() {
                    Some(prev) if prev.success => {
                        let mut w = prev.world.clone();
                        w.rng = ChaCha8Rng::seed_from_u64(seed);
                        (w, prev.goal_index + 1)
                    }
                    _ => (spec.scenario.reset(n, seed)?, 0),
                };
                out.push(episode(spec, vocab, planner, mode, world, goal_index));
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModeResult {
    pub mode: Mode,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    /// Successful episodes that needed more than one plan.
    pub successful_replans: usize,
    /// Failed episodes by length of their first plan (`None`: no plan).
    pub failure_plan_lengths: BTreeMap<Option<usize>, usize>,
    /// Episodes by height of the tallest tower at the end.
    pub tower_sizes: BTreeMap<usize, usize>,
    pub max_plans: u32,
    pub max_step_executions: u32,
}

impl ModeResult {
    pub fn summarize(mode: Mode, episodes: &[EpisodeResult]) -> Self {
        let mut r = ModeResult {
            mode,
            trials: episodes.len(),
            successes: 0,
            failures: 0,
            successful_replans: 0,
            failure_plan_lengths: BTreeMap::new(),
            tower_sizes: BTreeMap::new(),
            max_plans: 0,
            max_step_executions: 0,
        };
        for e in episodes {
            if e.success {
                r.successes += 1;
                if e.outcome.replans_used > 1 {
                    r.successful_replans += 1;
                }
            } else {
                r.failures += 1;
                *r.failure_plan_lengths.entry(e.initial_plan_len()).or_default() += 1;
            }
            *r.tower_sizes.entry(e.tallest_tower()).or_default() += 1;
            r.max_plans = r.max_plans.max(e.outcome.replans_used);
            r.max_step_executions = r.max_step_executions.max(e.outcome.max_step_executions());
        }
        r
    }

    pub fn success_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResultsTable {
    pub task: String,
    pub reset: ResetPolicy,
    pub trials: usize,
    pub rows: Vec<ModeResult>,
}

fn histogram<K: fmt::Display>(h: impl IntoIterator<Item = (K, usize)>) -> String {
    let parts: Vec<String> = h.into_iter().map(|(k, v)| format!("{k}:{v}")).collect();
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(" ")
    }
}

impl ResultsTable {
    pub fn row(&self, mode: Mode) -> Option<&ModeResult> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// `length:count` pairs, longest plans first; `none` counts failures
    /// without an initial plan.
    pub fn failure_breakdown(row: &ModeResult) -> String {
        histogram(row.failure_plan_lengths.iter().rev().map(|(k, v)| {
            let key = k.map_or_else(|| "none".to_string(), |l| l.to_string());
            (key, *v)
        }))
    }

    pub fn tower_breakdown(row: &ModeResult) -> String {
        histogram(row.tower_sizes.iter().rev().map(|(k, v)| (*k, *v)))
    }

    pub fn to_text(&self) -> String {
        let header = [
            "mode",
            "successes",
            "failures",
            "rate",
            "successful replans",
            "failures by plan length",
            "tallest tower",
        ];
        let mut cells: Vec<[String; 7]> = vec![header.map(String::from)];
        for r in &self.rows {
            cells.push([
                r.mode.name().to_string(),
                r.successes.to_string(),
                r.failures.to_string(),
                format!("{:.1}%", 100.0 * r.success_rate()),
                r.successful_replans.to_string(),
                Self::failure_breakdown(r),
                Self::tower_breakdown(r),
            ]);
        }
        let widths: Vec<usize> = (0..7)
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = format!(
            "task: {}  reset: {}  trials: {}\n",
            self.task,
            self.reset.name(),
            self.trials
        );
        for row in &cells {
            let line: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }
}

/// Every mode of `spec`, with paired trial seeds.
pub fn run_experiment(
    spec: &ExperimentSpec,
    vocab: &Vocabulary,
    planner: &Planner,
) -> Result<ResultsTable, ScenarioError> {
    let rows = spec
        .modes
        .iter()
        .map(|&m| Ok(ModeResult::summarize(m, &run_mode(spec, vocab, planner, m)?)))
        .collect::<Result<Vec<_>, ScenarioError>>()?;
    Ok(ResultsTable {
        task: spec.scenario.name.clone(),
        reset: spec.reset,
        trials: spec.trials,
        rows,
    })
}
