//! Plan execution with precondition backtracking, per-step retrials and
//! bounded replanning.
//!
//! The loop follows the classic execute/replan structure:
//!
//! ```text
//! Execute(goal):
//!     while plans_made < plan budget:
//!         o <- Observe(); P <- Plan(o, goal); plans_made += 1
//!         if ExecutePlan(o, goal, P) = Success: return Success
//!     return Failure
//!
//! ExecutePlan(o, goal, P):
//!     i <- 0
//!     while i < |P|:
//!         while preconditions of P[i] do not hold in o:
//!             i <- i - 1; if i < 0: return Failure
//!         attempts[i] += 1; if attempts[i] > retrial budget: return Failure
//!         ExecuteSkill(P[i]); o <- Observe()
//!         if goal holds in o: return Success
//!         i <- i + 1
//!     return Failure
//! ```
//!
//! Both budgets are at least one, so a configuration of zeros still plans
//! once and runs each step once.

use std::io::{self, Write};

use serde::Serialize;

use crate::domain::{preconditions_hold, GroundedSkill, Plan};
use crate::logic::{satisfies, GoalConditions, LogicalState, Vocabulary};
use crate::planner::{NoPlanFound, Planner};

/// What an environment reports once a skill has stopped running.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkillReport {
    /// Whether the termination signal was seen when the skill stopped.
    pub terminated: bool,
    /// Free-form outcome label for traces (e.g. `nominal`, `drop`).
    pub label: &'static str,
}

/// The world as the executor sees it.
pub trait Environment {
    /// Current sensed logical state.
    fn observe(&mut self) -> LogicalState;

    /// Runs a skill until it terminates.
    fn execute_skill(&mut self, skill: &GroundedSkill) -> SkillReport;
}

pub trait TaskPlanner {
    fn plan(&self, state: &LogicalState, goal: &GoalConditions) -> Result<Plan, NoPlanFound>;
}

impl TaskPlanner for Planner {
    fn plan(&self, state: &LogicalState, goal: &GoalConditions) -> Result<Plan, NoPlanFound> {
        Planner::plan(self, state, goal)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ExecConfig {
    /// Planner calls allowed per episode (a value of 0 still allows the
    /// initial plan).
    pub max_replans: u32,
    /// Executions allowed per plan step (a value of 0 still allows one).
    pub max_retrials: u32,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            max_replans: 5,
            max_retrials: 5,
        }
    }
}

impl ExecConfig {
    pub fn plan_budget(&self) -> u32 {
        self.max_replans.max(1)
    }

    pub fn execution_budget(&self) -> u32 {
        self.max_retrials.max(1)
    }
}

/// One skill execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    /// Zero-based index of the planner call whose plan was running.
    pub plan_index: usize,
    pub step: usize,
    pub skill: GroundedSkill,
    /// Executions of this step so far, including this one.
    pub attempt: u32,
    /// How many steps control moved back before this execution.
    pub precondition_backtracks: usize,
    pub termination_observed: bool,
    pub label: &'static str,
    /// Observation the preconditions were checked against.
    pub sensed_before: LogicalState,
    pub sensed_after: LogicalState,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanFailure {
    NoPlan(NoPlanFound),
    /// Backtracked past the first step.
    NoApplicableStep,
    RetrialsExhausted {
        step: usize,
    },
    /// Ran off the end of the plan without observing the goal.
    PlanFinished,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanRecord {
    /// `None` when the planner found no plan.
    pub length: Option<usize>,
    pub failure: Option<PlanFailure>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecOutcome {
    pub success: bool,
    /// Planner calls made.
    pub replans_used: u32,
    pub plans: Vec<PlanRecord>,
    pub trace: Vec<TraceEvent>,
}

impl ExecOutcome {
    /// Skill executions across the whole episode.
    pub fn executions(&self) -> usize {
        self.trace.len()
    }

    /// Largest number of executions of a single step within one plan.
    pub fn max_step_executions(&self) -> u32 {
        self.trace.iter().map(|e| e.attempt).max().unwrap_or(0)
    }

    pub fn backtracks(&self) -> usize {
        self.trace.iter().map(|e| e.precondition_backtracks).sum()
    }
}

/// Observes, plans and executes until the goal is observed or the plan
/// budget is spent.
pub fn execute<E, P>(goal: &GoalConditions, cfg: &ExecConfig, env: &mut E, planner: &P) -> ExecOutcome
where
    E: Environment + ?Sized,
    P: TaskPlanner + ?Sized,
{
    let mut outcome = ExecOutcome {
        success: false,
        replans_used: 0,
        plans: Vec::new(),
        trace: Vec::new(),
    };
    while outcome.replans_used < cfg.plan_budget() {
        let o = env.observe();
        let plan = planner.plan(&o, goal);
        let plan_index = outcome.replans_used as usize;
        outcome.replans_used += 1;
        let (length, result) = match plan {
            Ok(plan) => {
                let r = execute_plan(o, goal, &plan, cfg, env, plan_index, &mut outcome.trace);
                (Some(plan.len()), r)
            }
            Err(e) => (None, Err(PlanFailure::NoPlan(e))),
        };
        log::debug!("plan {plan_index}: length {length:?}, result {result:?}");
        outcome.plans.push(PlanRecord {
            length,
            failure: result.err(),
        });
        if result.is_ok() {
            outcome.success = true;
            break;
        }
    }
    outcome
}

/// Runs one plan from observation `o`. An empty plan succeeds exactly when
/// `o` already meets the goal.
pub fn execute_plan<E>(
    mut o: LogicalState,
    goal: &GoalConditions,
    plan: &Plan,
    cfg: &ExecConfig,
    env: &mut E,
    plan_index: usize,
    trace: &mut Vec<TraceEvent>,
) -> Result<(), PlanFailure>
where
    E: Environment + ?Sized,
{
    if plan.is_empty() {
        return if satisfies(&o, goal) {
            Ok(())
        } else {
            Err(PlanFailure::PlanFinished)
        };
    }
    let mut attempts = vec![0u32; plan.len()];
    let mut i: usize = 0;
    while i < plan.len() {
        let mut backtracks = 0;
        while !preconditions_hold(&plan.steps[i], &o) {
            if i == 0 {
                return Err(PlanFailure::NoApplicableStep);
            }
            i -= 1;
            backtracks += 1;
        }
        attempts[i] += 1;
        if attempts[i] > cfg.execution_budget() {
            return Err(PlanFailure::RetrialsExhausted { step: i });
        }
        let report = env.execute_skill(&plan.steps[i]);
        let after = env.observe();
        trace.push(TraceEvent {
            plan_index,
            step: i,
            skill: plan.steps[i].clone(),
            attempt: attempts[i],
            precondition_backtracks: backtracks,
            termination_observed: report.terminated,
            label: report.label,
            sensed_before: std::mem::replace(&mut o, after.clone()),
            sensed_after: after,
        });
        if satisfies(&o, goal) {
            return Ok(());
        }
        i += 1;
    }
    Err(PlanFailure::PlanFinished)
}

/// One trace event as a JSON object.
pub fn trace_event_json(e: &TraceEvent, vocab: &Vocabulary) -> serde_json::Value {
    serde_json::json!({
        "plan": e.plan_index,
        "step": e.step,
        "skill": e.skill.display(vocab.universe()).to_string(),
        "attempt": e.attempt,
        "precondition_backtracks": e.precondition_backtracks,
        "termination_observed": e.termination_observed,
        "outcome": e.label,
        "sensed_before": vocab.format_state(&e.sensed_before),
        "sensed_after": vocab.format_state(&e.sensed_after),
    })
}

/// Writes the trace as JSON lines, one event per line.
pub fn write_trace_jsonl<W: Write>(outcome: &ExecOutcome, vocab: &Vocabulary, mut out: W) -> io::Result<()> {
    for e in &outcome.trace {
        serde_json::to_writer(&mut out, &trace_event_json(e, vocab))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{apply_effects, find_skill, ground_skills, standard_domain, REACH_ON_TABLE, STACK};
    use crate::planner::PlannerConfig;

    /// Applies effects exactly, except for scripted failures by call index.
    struct ScriptedEnv {
        state: LogicalState,
        fail_calls: Vec<usize>,
        calls: usize,
    }

    impl Environment for ScriptedEnv {
        fn observe(&mut self) -> LogicalState {
            self.state.clone()
        }

        fn execute_skill(&mut self, skill: &GroundedSkill) -> SkillReport {
            let call = self.calls;
            self.calls += 1;
            if self.fail_calls.contains(&call) || !preconditions_hold(skill, &self.state) {
                return SkillReport {
                    terminated: true,
                    label: "noop",
                };
            }
            self.state = apply_effects(skill, &self.state).unwrap();
            SkillReport {
                terminated: true,
                label: "nominal",
            }
        }
    }

    const FLAT: &str =
        "OnTop(r), OnTop(g), OnTop(b), OnTop(y), InWorkspace(r), InWorkspace(g), InWorkspace(b), InWorkspace(y)";

    fn setup() -> (Vocabulary, Planner) {
        let v = Vocabulary::blocks_world();
        let g = ground_skills(&standard_domain(), &v).unwrap();
        (v, Planner::new(g, PlannerConfig::default()))
    }

    fn env(v: &Vocabulary, fail_calls: Vec<usize>) -> ScriptedEnv {
        ScriptedEnv {
            state: v.parse_state(FLAT).unwrap(),
            fail_calls,
            calls: 0,
        }
    }

    #[test]
    fn deterministic_success_uses_one_plan() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g), On(g,b), On(b,y)").unwrap();
        let mut e = env(&v, vec![]);
        let out = execute(&goal, &ExecConfig::default(), &mut e, &p);
        assert!(out.success);
        assert_eq!(out.replans_used, 1);
        assert_eq!(out.executions(), 6);
        assert_eq!(out.backtracks(), 0);
    }

    #[test]
    fn satisfied_goal_succeeds_with_empty_plan() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "OnTop(r)").unwrap();
        let mut e = env(&v, vec![]);
        let out = execute(&goal, &ExecConfig::default(), &mut e, &p);
        assert!(out.success);
        assert_eq!(out.replans_used, 1);
        assert_eq!(out.plans[0].length, Some(0));
        assert!(out.trace.is_empty());
    }

    #[test]
    fn empty_plan_with_unmet_goal_fails() {
        let (v, _) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        let mut e = env(&v, vec![]);
        let o = e.observe();
        let mut trace = Vec::new();
        let r = execute_plan(
            o,
            &goal,
            &Plan::default(),
            &ExecConfig::default(),
            &mut e,
            0,
            &mut trace,
        );
        assert_eq!(r, Err(PlanFailure::PlanFinished));
    }

    #[test]
    fn failed_grasp_backtracks_to_reach() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        // first execution (ReachOnTable(r)) silently fails
        let mut e = env(&v, vec![0]);
        let out = execute(&goal, &ExecConfig::default(), &mut e, &p);
        assert!(out.success);
        assert_eq!(out.replans_used, 1);
        let names: Vec<String> = out
            .trace
            .iter()
            .map(|t| t.skill.display(v.universe()).to_string())
            .collect();
        assert_eq!(
            names,
            [
                "ReachOnTable(BlockRed)",
                "ReachOnTable(BlockRed)",
                "Stack(BlockRed,BlockGreen)"
            ]
        );
        assert_eq!(out.trace[1].precondition_backtracks, 1);
        assert_eq!(out.trace[1].attempt, 2);
        assert_eq!(out.trace[2].precondition_backtracks, 0);
    }

    #[test]
    fn retrial_budget_triggers_replan() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        let cfg = ExecConfig {
            max_replans: 5,
            max_retrials: 2,
        };
        // reach fails twice: budget of two executions spent, then replan
        let mut e = env(&v, vec![0, 1]);
        let out = execute(&goal, &cfg, &mut e, &p);
        assert!(out.success);
        assert_eq!(out.replans_used, 2);
        assert_eq!(out.plans[0].failure, Some(PlanFailure::RetrialsExhausted { step: 0 }));
        assert_eq!(out.max_step_executions(), 2);
    }

    #[test]
    fn zero_budgets_still_run_once() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        let cfg = ExecConfig {
            max_replans: 0,
            max_retrials: 0,
        };
        let mut ok = env(&v, vec![]);
        let out = execute(&goal, &cfg, &mut ok, &p);
        assert!(out.success);
        assert_eq!(out.replans_used, 1);

        let mut failing = env(&v, vec![0]);
        let out = execute(&goal, &cfg, &mut failing, &p);
        assert!(!out.success);
        assert_eq!(out.replans_used, 1);
        assert_eq!(out.executions(), 1);
    }

    #[test]
    fn unreachable_goal_spends_every_plan() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "Close(r,g)").unwrap();
        let mut e = env(&v, vec![]);
        let out = execute(&goal, &ExecConfig::default(), &mut e, &p);
        assert!(!out.success);
        assert_eq!(out.replans_used, 5);
        assert!(out
            .plans
            .iter()
            .all(|r| r.failure == Some(PlanFailure::NoPlan(NoPlanFound::Exhausted))));
    }

    #[test]
    fn no_applicable_step_when_first_precondition_breaks() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        let mut e = env(&v, vec![]);
        let o = e.observe();
        let plan = p.plan(&o, &goal).unwrap();
        let mut held = o.clone();
        held.insert(v.parse_atom("InHand(y)").unwrap());
        let mut trace = Vec::new();
        let r = execute_plan(held, &goal, &plan, &ExecConfig::default(), &mut e, 0, &mut trace);
        assert_eq!(r, Err(PlanFailure::NoApplicableStep));
    }

    #[test]
    fn trace_jsonl_one_line_per_event() {
        let (v, p) = setup();
        let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
        let mut e = env(&v, vec![0]);
        let out = execute(&goal, &ExecConfig::default(), &mut e, &p);
        let mut buf = Vec::new();
        write_trace_jsonl(&out, &v, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), out.trace.len());
        let first: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
        assert_eq!(first["skill"], "ReachOnTable(BlockRed)");
        assert_eq!(first["precondition_backtracks"], 1);
        assert!(find_skill(p.skills(), v.universe(), REACH_ON_TABLE, &["r"]).is_some());
        assert!(find_skill(p.skills(), v.universe(), STACK, &["r", "g"]).is_some());
    }
}
