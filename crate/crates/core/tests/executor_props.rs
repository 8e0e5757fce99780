mod common;

use std::collections::HashMap;

use proptest::prelude::*;
use taskexec_core::domain::preconditions_hold;
use taskexec_core::executor::{execute, ExecConfig, PlanFailure};
use taskexec_core::experiment::{run_episode, run_experiment, run_mode, trial_seed, ExperimentSpec, Mode, ResetPolicy};
use taskexec_core::logic::{standard_predicates, GoalConditions, Vocabulary};
use taskexec_core::planner::{NoPlanFound, Planner, PlannerConfig};
use taskexec_core::sim::{goal_achieved, parse_scenario, FailureMode, FailureModel, Scenario, SensorModel, SimEnv};

use common::*;

fn scenario(text: &str) -> (Vocabulary, Scenario) {
    parse_scenario("t", text, &standard_predicates()).unwrap()
}

fn noisy(p_fail: f64, fp: f64, v: &Vocabulary) -> (FailureModel, SensorModel) {
    let fm = FailureModel {
        p_fail_default: p_fail,
        ..FailureModel::default()
    };
    let mut sensor = SensorModel::learned(v, fp, fp);
    sensor.term_fp = fp;
    sensor.term_fn = fp;
    (fm, sensor)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Budgets hold in every trace, whatever the noise.
    #[test]
    fn budgets_hold(
        seed in any::<u64>(),
        replans in 0u32..7,
        retrials in 0u32..7,
        p_fail in 0.0f64..0.6,
        fp in 0.0f64..0.1,
        reorder in any::<bool>(),
    ) {
        let v = Vocabulary::blocks_world();
        let p = planner(&v);
        let sc = if reorder { Scenario::reordering(&v) } else { Scenario::stacking(&v) };
        let (fm, sensor) = noisy(p_fail, fp, &v);
        let cfg = ExecConfig { max_replans: replans, max_retrials: retrials };
        let mut env = SimEnv::new(&v, sc.reset(4, seed).unwrap(), fm, sensor);
        let out = execute(sc.goal(0), &cfg, &mut env, &p);

        prop_assert!(out.replans_used >= 1);
        prop_assert!(out.replans_used <= replans.max(1));
        prop_assert_eq!(out.plans.len(), out.replans_used as usize);
        let mut counts: HashMap<(usize, usize), u32> = HashMap::new();
        for e in &out.trace {
            let c = counts.entry((e.plan_index, e.step)).or_default();
            *c += 1;
            prop_assert_eq!(e.attempt, *c);
            prop_assert!(e.attempt <= retrials.max(1));
            // a skill is only run when the sensed state allows it
            prop_assert!(preconditions_hold(&e.skill, &e.sensed_before));
        }
        prop_assert_eq!(out.success, out.plans.last().unwrap().failure.is_none());
        if !out.success {
            prop_assert_eq!(out.replans_used, replans.max(1));
        }
        for w in out.trace.windows(2) {
            if w[0].plan_index == w[1].plan_index {
                prop_assert_eq!(&w[0].sensed_after, &w[1].sensed_before);
            }
        }
    }

    /// No-recovery mode never repeats a step and never replans.
    #[test]
    fn none_mode_runs_each_step_once(seed in any::<u64>()) {
        let v = Vocabulary::blocks_world();
        let p = planner(&v);
        let sc = Scenario::reordering(&v);
        let (fm, sensor) = noisy(0.2, 0.02, &v);
        let mut env = SimEnv::new(&v, sc.reset(4, seed).unwrap(), fm, sensor);
        let out = execute(sc.goal(0), &Mode::None.exec_config(), &mut env, &p);
        prop_assert_eq!(out.replans_used, 1);
        prop_assert!(out.trace.iter().all(|e| e.attempt == 1));
    }
}

#[test]
fn satisfied_goal_succeeds_without_acting() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    let sc = Scenario::reordering(&v);
    let w = sc.reset(4, 0).unwrap();
    let goal = sc.goal(1);
    let mut env = SimEnv::new(&v, w, FailureModel::default(), SensorModel::perfect(&v));
    let out = execute(goal, &ExecConfig::default(), &mut env, &p);
    assert!(out.success);
    assert!(out.trace.is_empty());
    assert_eq!(out.replans_used, 1);
    assert_eq!(out.plans[0].length, Some(0));
}

#[test]
fn unrecoverable_block_exhausts_replans() {
    let (v, sc) = scenario(include_str!("../../../scenarios/lost-block.scn"));
    let p = Planner::new(skills(&v), PlannerConfig::default());
    let w = sc.reset(v.universe().len(), 3).unwrap();
    let mut env = SimEnv::new(&v, w, FailureModel::deterministic(), SensorModel::perfect(&v));
    let out = execute(sc.goal(0), &Mode::Full.exec_config(), &mut env, &p);
    assert!(!out.success);
    assert_eq!(out.replans_used, 5);
    assert!(!goal_achieved(&env.world, &v, sc.goal(0)));
    // every plan starts with Pull, which flails on the lost block
    for plan in &out.plans {
        assert_eq!(plan.failure, Some(PlanFailure::RetrialsExhausted { step: 0 }));
    }
    assert!(out.trace.iter().all(|e| &*e.skill.name == "Pull" && e.label == "flail"));
    assert_eq!(out.trace.len(), 25);
}

#[test]
fn unreachable_goal_reports_no_plan() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    let goal = GoalConditions::parse(&v, "On(r,g), On(g,r)").unwrap();
    let w = Scenario::stacking(&v).reset(4, 0).unwrap();
    let mut env = SimEnv::new(&v, w, FailureModel::default(), SensorModel::perfect(&v));
    let out = execute(&goal, &ExecConfig::default(), &mut env, &p);
    assert!(!out.success);
    assert!(out.trace.is_empty());
    assert!(out
        .plans
        .iter()
        .all(|r| r.length.is_none() && r.failure == Some(PlanFailure::NoPlan(NoPlanFound::Exhausted))));
}

/// A grasp that slips leaves the hand empty, so Stack is not applicable
/// and control returns to the Reach before it.
#[test]
fn slipped_grasp_is_retried() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    let goal = GoalConditions::parse(&v, "On(r,g)").unwrap();
    let w = Scenario::stacking(&v).reset(4, 0).unwrap();
    let mut env = SimEnv::new(&v, w, FailureModel::deterministic(), SensorModel::perfect(&v))
        .with_script([(0, FailureMode::NoOp)]);
    let out = execute(&goal, &ExecConfig::default(), &mut env, &p);
    assert!(out.success);
    assert_eq!(out.replans_used, 1);
    let t = &out.trace;
    assert_eq!(t.len(), 3);
    assert_eq!((&*t[0].skill.name, t[0].label), ("ReachOnTable", "noop"));
    assert_eq!((t[1].step, t[1].attempt, t[1].precondition_backtracks), (0, 2, 1));
    assert_eq!((&*t[2].skill.name, t[2].step, t[2].attempt), ("Stack", 1, 1));
}

/// After a drop during Stack the next Reach is still applicable, so the
/// plan runs on, ends off-goal and a fresh plan recovers.
#[test]
fn dropped_block_forces_a_replan() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    let sc = Scenario::stacking(&v);
    let w = sc.reset(4, 0).unwrap();
    let mut env = SimEnv::new(&v, w, FailureModel::deterministic(), SensorModel::perfect(&v))
        .with_script([(1, FailureMode::Drop)]);
    let out = execute(sc.goal(0), &ExecConfig::default(), &mut env, &p);
    assert_eq!((&*out.trace[1].skill.name, out.trace[1].label), ("Stack", "drop"));
    assert!(out.success);
    assert_eq!(out.replans_used, 2);
    assert_eq!(out.plans[0].failure, Some(PlanFailure::PlanFinished));
}

fn small_spec(v: &Vocabulary, reset: ResetPolicy) -> ExperimentSpec {
    ExperimentSpec {
        scenario: Scenario::reordering(v),
        modes: Mode::ALL.to_vec(),
        trials: 60,
        master_seed: 9,
        failures: FailureModel::default(),
        sensor: SensorModel::learned(v, 0.02, 0.02),
        reset,
    }
}

#[test]
fn experiments_are_reproducible() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    for reset in [ResetPolicy::EveryEpisode, ResetPolicy::OnFailureOnly] {
        let spec = small_spec(&v, reset);
        let a = run_experiment(&spec, &v, &p).unwrap();
        let b = run_experiment(&spec, &v, &p).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        for row in &a.rows {
            assert_eq!(row.successes + row.failures, 60);
        }
    }
}

/// Trial `i` of every mode starts from the world seeded by `trial_seed`.
#[test]
fn seeds_are_paired_across_modes() {
    let v = Vocabulary::blocks_world();
    let p = planner(&v);
    let spec = small_spec(&v, ResetPolicy::EveryEpisode);
    for mode in Mode::ALL {
        let eps = run_mode(&spec, &v, &p, mode).unwrap();
        for (i, e) in eps.iter().enumerate().take(10) {
            let world = spec.scenario.reset(4, trial_seed(spec.master_seed, i)).unwrap();
            let (out, env) = run_episode(
                &v,
                &p,
                spec.scenario.goal(0),
                world,
                &mode.exec_config(),
                &spec.failures,
                &spec.sensor,
            );
            assert_eq!(out, e.outcome);
            assert_eq!(env.world.support, e.world.support);
        }
    }
}
