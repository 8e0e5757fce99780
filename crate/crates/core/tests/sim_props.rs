mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Binomial, DiscreteCDF};
use taskexec_core::domain::{apply_effects, find_skill, preconditions_hold};
use taskexec_core::executor::{execute, ExecConfig};
use taskexec_core::logic::{is_consistent, Vocabulary};
use taskexec_core::planner::predicted_states;
use taskexec_core::sim::{
    execute_skill, observe, project_ground_truth, FailureMode, FailureModel, Scenario, SensorModel, SimEnv, Support,
    WorldState,
};

use common::*;

fn std_vocab() -> Vocabulary {
    Vocabulary::blocks_world()
}

#[test]
fn reset_examples() {
    let v = std_vocab();
    let flat = Scenario::stacking(&v).reset(4, 1).unwrap();
    let gt = project_ground_truth(&flat, &v);
    let all_top =
        "OnTop(r), OnTop(g), OnTop(b), OnTop(y), InWorkspace(r), InWorkspace(g), InWorkspace(b), InWorkspace(y)";
    assert_eq!(gt, v.parse_state(all_top).unwrap());

    let tower = Scenario::reordering(&v).reset(4, 1).unwrap();
    let expected = v
        .parse_state(
            "On(g,b), On(b,r), On(r,y), OnTop(g), InWorkspace(r), InWorkspace(g), InWorkspace(b), InWorkspace(y)",
        )
        .unwrap();
    assert_eq!(project_ground_truth(&tower, &v), expected);
    assert_eq!(tower.support[b("y")], Support::Table);

    let again = Scenario::reordering(&v).reset(4, 1).unwrap();
    assert_eq!(again.support, tower.support);
}

#[test]
fn held_block_projection() {
    let v = std_vocab();
    let mut w = WorldState::new(4, 0);
    w.support[b("r")] = Support::Hand;
    let gt = project_ground_truth(&w, &v);
    assert!(gt.contains(v.parse_atom("InHand(r)").unwrap()));
    assert!(!gt.contains(v.parse_atom("OnTop(r)").unwrap()));
}

#[test]
fn stack_drop_leaves_block_on_table() {
    let v = std_vocab();
    let skills = skills(&v);
    let mut w = WorldState::new(4, 0);
    w.support[b("r")] = Support::Hand;
    let stack = find_skill(&skills, v.universe(), "Stack", &["r", "g"]).unwrap();
    let ev = execute_skill(
        &mut w,
        &v,
        stack,
        &FailureModel::deterministic(),
        Some(FailureMode::Drop),
    );
    assert_eq!(ev.mode, FailureMode::Drop);
    let gt = project_ground_truth(&w, &v);
    assert!(w.on_table(taskexec_core::logic::ObjectId(b("r") as u16)));
    assert_eq!(w.held(), None);
    assert!(!gt.contains(v.parse_atom("On(r,g)").unwrap()));
    assert!(gt.contains(v.parse_atom("OnTop(r)").unwrap()));
}

#[test]
fn topple_with_certain_ejection() {
    let v = std_vocab();
    let skills = skills(&v);
    let mut w = Scenario::reordering(&v).reset(4, 5).unwrap();
    // three-block tower b/r/y with g in hand
    w.support[b("g")] = Support::Hand;
    let fm = FailureModel {
        p_eject: 1.0,
        ..FailureModel::deterministic()
    };
    let stack = find_skill(&skills, v.universe(), "Stack", &["g", "b"]).unwrap();
    let ev = execute_skill(&mut w, &v, stack, &fm, Some(FailureMode::Topple));
    assert_eq!(ev.mode, FailureMode::Topple);
    let scattered = [b("g"), b("b"), b("r")];
    for x in scattered {
        assert!(!w.in_workspace[x]);
        assert_eq!(w.support[x], Support::Table);
    }
    assert!(w.in_workspace[b("y")]);
    assert_eq!(ev.ejected.len(), 3);
}

/// Random walk of skill applications under a harsh failure model.
#[test]
fn physical_consistency_over_100k_applications() {
    let v = std_vocab();
    let skills = skills(&v);
    let fm = FailureModel {
        p_fail_default: 0.3,
        topple_base: 0.2,
        p_eject: 0.5,
        p_eject_hard: 0.3,
        p_drop_close: 0.5,
        ..FailureModel::default()
    };
    let mut pick = ChaCha8Rng::seed_from_u64(42);
    let mut w = Scenario::stacking(&v).reset(4, 42).unwrap();
    for step in 0..100_000 {
        if step % 500 == 0 {
            w = Scenario::stacking(&v).reset(4, step).unwrap();
        }
        let gt = project_ground_truth(&w, &v);
        let applicable: Vec<_> = skills.iter().filter(|s| preconditions_hold(s, &gt)).collect();
        let sk = if !applicable.is_empty() && pick.gen_bool(0.9) {
            applicable[pick.gen_range(0..applicable.len())]
        } else {
            &skills[pick.gen_range(0..skills.len())]
        };
        execute_skill(&mut w, &v, sk, &fm, None);
        assert!(w.is_valid(), "step {step}");
        assert!(is_consistent(&v, &project_ground_truth(&w, &v)), "step {step}");
    }
}

#[test]
fn zero_noise_episode_follows_predicted_states() {
    let v = std_vocab();
    let p = planner(&v);
    for scenario in [Scenario::stacking(&v), Scenario::reordering(&v)] {
        let w = scenario.reset(4, 0).unwrap();
        let start = project_ground_truth(&w, &v);
        let goal = scenario.goal(0);
        let plan = p.plan(&start, goal).unwrap();
        let predicted = predicted_states(&plan, &start);
        let mut env = SimEnv::new(&v, w, FailureModel::deterministic(), SensorModel::perfect(&v));
        let out = execute(goal, &ExecConfig::default(), &mut env, &p);
        assert!(out.success);
        let sensed: Vec<_> = std::iter::once(start.clone())
            .chain(out.trace.iter().map(|e| e.sensed_after.clone()))
            .collect();
        assert_eq!(sensed, predicted);
        assert_eq!(env.ground_truth(), *predicted.last().unwrap());
    }
}

#[test]
fn same_seed_same_final_world() {
    let v = std_vocab();
    let p = planner(&v);
    let run = || {
        let w = Scenario::reordering(&v).reset(4, 77).unwrap();
        let mut env = SimEnv::new(&v, w, FailureModel::default(), SensorModel::learned(&v, 0.02, 0.02));
        let out = execute(Scenario::reordering(&v).goal(0), &ExecConfig::default(), &mut env, &p);
        (
            out,
            env.world.support.clone(),
            env.world.in_workspace.clone(),
            env.world.close.clone(),
        )
    };
    assert_eq!(run(), run());
}

#[test]
fn nominal_step_matches_effects_on_random_states() {
    let v = std_vocab();
    let skills = skills(&v);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let states = all_states(4);
    for _ in 0..2000 {
        let s = &states[rng.gen_range(0..states.len())];
        let mut w = WorldState::new(4, rng.gen());
        for x in 0..4 {
            w.support[x] = match (s.held, s.below[x]) {
                (Some(h), _) if h == x => Support::Hand,
                (_, Some(y)) => Support::Block(taskexec_core::logic::ObjectId(y as u16)),
                _ => Support::Table,
            };
            w.in_workspace[x] = s.ws[x];
        }
        for &(a, c) in &s.close {
            w.set_close(
                taskexec_core::logic::ObjectId(a as u16),
                taskexec_core::logic::ObjectId(c as u16),
            );
        }
        let before = project_ground_truth(&w, &v);
        assert_eq!(before, to_logical(s, &v));
        for sk in skills.iter().filter(|sk| preconditions_hold(sk, &before)) {
            let mut w2 = w.clone();
            execute_skill(&mut w2, &v, sk, &FailureModel::deterministic(), None);
            assert_eq!(project_ground_truth(&w2, &v), apply_effects(sk, &before).unwrap());
        }
    }
}

#[test]
fn certain_false_negative_hides_in_hand() {
    let v = std_vocab();
    let mut w = WorldState::new(4, 0);
    w.support[b("g")] = Support::Hand;
    let mut sensor = SensorModel::perfect(&v);
    sensor.set_rates(&v, "InHand", 0.0, 1.0);
    let inhand = v.parse_atom("InHand(g)").unwrap();
    for _ in 0..100 {
        assert!(!observe(&mut w, &v, &sensor).contains(inhand));
    }
}

#[test]
fn single_atom_flip_rate() {
    let v = std_vocab();
    let mut w = WorldState::new(4, 9);
    let sensor = SensorModel::learned(&v, 0.02, 0.02);
    let present = v.parse_atom("OnTop(r)").unwrap();
    let absent = v.parse_atom("On(r,g)").unwrap();
    let n = 10_000u64;
    let (mut missed, mut spurious) = (0u64, 0u64);
    for _ in 0..n {
        let o = observe(&mut w, &v, &sensor);
        missed += u64::from(!o.contains(present));
        spurious += u64::from(o.contains(absent));
    }
    let bin = Binomial::new(0.02, n).unwrap();
    let (lo, hi) = (bin.inverse_cdf(0.005), bin.inverse_cdf(0.995));
    for k in [missed, spurious] {
        assert!((lo..=hi).contains(&k), "{k} outside [{lo}, {hi}]");
        assert!(((k as f64 / n as f64) - 0.02).abs() <= 0.005);
    }
}
