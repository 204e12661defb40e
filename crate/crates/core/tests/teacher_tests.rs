use proptest::prelude::*;

use teachdim::harness::{run_session, run_trials, SessionConfig, StepRecord};
use teachdim::instances::{blocker_subgame, default_spec, peacock_instance, peacock_tree_instance};
use teachdim::learner::{QTable, UpdateRule};
use teachdim::mdp::{build_nav_plan, make_chain, make_random_sparse, Mdp};
use teachdim::teacher::{adversarial_q0, favoring_q0, validate_trace, Branch, Level, TeachingProblem};

fn problem(mdp: Mdp, eps: f64, rule: UpdateRule, target: Vec<usize>) -> TeachingProblem {
    let q0 = adversarial_q0(&mdp, &target);
    TeachingProblem::new(mdp, default_spec(eps, rule).unwrap(), q0, target).unwrap()
}

fn traced(p: &TeachingProblem, level: Level, seed: u64) -> Vec<StepRecord> {
    let res = run_session(p, &SessionConfig::new(level).with_trace(), seed).unwrap();
    assert!(res.terminated);
    res.trace.unwrap()
}

#[test]
fn level1_three_states() {
    let p = problem(make_chain(3, 2, 3).unwrap(), 0.5, UpdateRule::StandardQ, vec![1; 3]);
    assert_eq!(run_session(&p, &SessionConfig::new(Level::One), 0).unwrap().total_steps, 3);
}

#[test]
fn level1_skips_correct_states() {
    let mdp = make_chain(5, 3, 5).unwrap();
    let target = vec![2; 5];
    let mut q0 = adversarial_q0(&mdp, &target);
    let good = favoring_q0(&mdp, &target);
    for s in [1, 3] {
        for a in 0..3 {
            q0.set(s, a, good.get(s, a));
        }
    }
    let p = TeachingProblem::new(mdp, default_spec(0.7, UpdateRule::StandardQ).unwrap(), q0, target).unwrap();
    let res = run_session(&p, &SessionConfig::new(Level::One), 9).unwrap();
    assert_eq!(res.total_steps, 3);
    assert_eq!(res.visits, vec![1, 0, 1, 0, 1]);
}

#[test]
fn level2_single_blocker_at_zero_epsilon() {
    let p = blocker_subgame(2, 0.0, 1, UpdateRule::StandardQ).unwrap();
    let trace = traced(&p, Level::Two, 0);
    assert_eq!(trace.len(), 1);
    assert_eq!(trace[0].branch, Branch::DemoteAdvance);
}

#[test]
fn level2_four_actions_average_three() {
    let p = blocker_subgame(4, 0.6, 3, UpdateRule::StandardQ).unwrap();
    let st = run_trials(&p, &SessionConfig::new(Level::Two), 20_000, 3).unwrap();
    assert!((st.mean_steps - 3.0).abs() < 3.0 * st.std_error + 1e-12, "{st:?}");
}

#[test]
fn level2_repeat_of_demoted_action_stays() {
    // with heavy exploration some learner picks land on already-demoted actions
    let p = blocker_subgame(4, 0.9, 3, UpdateRule::StandardQ).unwrap();
    let mut seen = false;
    for seed in 0..50 {
        let trace = traced(&p, Level::Two, seed);
        for w in trace.windows(2) {
            if w[1].a == w[0].a && w[1].branch == Branch::DemoteStay {
                seen = true;
            }
        }
    }
    assert!(seen);
}

#[test]
fn navteach_walkthrough_path() {
    let rows = vec![
        vec![(2, 1.0)],
        vec![(1, 1.0)],
        vec![(3, 1.0)],
        vec![(0, 1.0)],
        vec![(1, 1.0)],
        vec![(0, 1.0)],
        vec![(3, 1.0)],
        vec![(0, 1.0)],
    ];
    let m = Mdp::new(4, 2, rows, vec![1.0, 0.0, 0.0, 0.0], 4, None).unwrap();
    let plan = build_nav_plan(&m).unwrap();
    assert_eq!(plan.subtask_order()[0], 3);
    assert_eq!(plan.ancestral_path(3), vec![(0, 1), (1, 0)]);
}

#[test]
fn navteach_peacock_within_upper_bound() {
    let p = peacock_instance(0.0).unwrap();
    let res = run_session(&p, &SessionConfig::new(Level::Three), 0).unwrap();
    assert!(res.terminated);
    assert!((48..=180).contains(&res.total_steps), "{}", res.total_steps);
}

#[test]
fn path_demote_keeps_navigation_ranking() {
    let p = peacock_instance(0.3).unwrap();
    let trace = traced(&p, Level::Three, 17);
    let demotes = trace.iter().filter(|r| r.branch == Branch::PathDemote).count();
    assert!(demotes > 0);
    for r in trace.iter().filter(|r| r.branch == Branch::PathDemote) {
        // a path demotion never touches the navigation action itself
        assert_ne!(r.a, 0);
        assert!(p.mdp.supports(r.s, r.a, r.s_next.unwrap()));
    }
}

#[test]
fn traces_respect_level_powers() {
    let cases = [
        (peacock_instance(0.2).unwrap(), Level::Three),
        (peacock_tree_instance(0.1).unwrap(), Level::Four),
        (peacock_instance(0.2).unwrap(), Level::Two),
        (peacock_instance(0.2).unwrap(), Level::One),
    ];
    for (p, level) in cases {
        for seed in 0..20 {
            let trace = traced(&p, level, seed);
            validate_trace(level, &p.mdp, &trace).unwrap();
            if level >= Level::Three {
                for r in &trace {
                    assert!(p.mdp.supports(r.s, r.a, r.s_next.unwrap()));
                }
            }
        }
    }
}

#[test]
fn level1_trace_fails_level2_validation() {
    let p = peacock_instance(0.5).unwrap();
    let trace = traced(&p, Level::One, 1);
    assert!(trace.iter().any(|r| r.a != r.learner_a));
    assert!(validate_trace(Level::Two, &p.mdp, &trace).is_err());
}

#[test]
fn level3_trace_fails_level4_validation() {
    let p = peacock_instance(0.2).unwrap();
    let trace = traced(&p, Level::Three, 1);
    assert!(validate_trace(Level::Four, &p.mdp, &trace).is_err());
}

/// Number of states whose target action is the strict argmax, replayed from
/// the trace's updates.
fn taught_counts(p: &TeachingProblem, trace: &[StepRecord]) -> Vec<usize> {
    let mut q: QTable = p.q0.clone();
    let mut counts = Vec::new();
    let mut pending: Option<&StepRecord> = None;
    for rec in trace {
        if let Some(prev) = pending.take() {
            if let Some(r) = prev.r {
                p.spec
                    .apply_update(
                        &mut q,
                        &teachdim::learner::Experience {
                            s: prev.s,
                            a: prev.a,
                            r,
                            s_next: prev.s_next.unwrap(),
                            a_next: None,
                        },
                    )
                    .unwrap();
            }
        }
        pending = Some(rec);
        counts.push((0..q.num_states()).filter(|&s| !p.needs_teaching(&q, s)).count());
    }
    counts
}

#[test]
fn navteach_subtasks_complete_in_order() {
    for seed in 0..30 {
        let p = peacock_instance(0.2).unwrap();
        let trace = traced(&p, Level::Three, seed);
        let subtasks: Vec<usize> = trace.iter().filter_map(|r| r.subtask).collect();
        assert!(subtasks.windows(2).all(|w| w[0] <= w[1]));
        let counts = taught_counts(&p, &trace);
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn level1_length_is_needs_teaching_count(s in 1usize..12, a in 2usize..5, eps in 0.0f64..1.0, seed in any::<u64>()) {
        let mdp = make_random_sparse(s, a, s, 0.3, seed).unwrap();
        let target: Vec<usize> = (0..s).map(|x| (x + seed as usize) % a).collect();
        let p = problem(mdp, eps, UpdateRule::StandardQ, target);
        let res = run_session(&p, &SessionConfig::new(Level::One), seed).unwrap();
        prop_assert_eq!(res.total_steps as usize, p.untaught_states().len());
    }

    #[test]
    fn navteach_terminates_on_random_mdps(s in 1usize..7, eps in 0.0f64..0.5, seed in any::<u64>(), four in any::<bool>()) {
        let mdp = make_random_sparse(s, 2, s.max(2), 0.3, seed).unwrap();
        let p = problem(mdp, eps, UpdateRule::StandardQ, vec![1; s]);
        let level = if four { Level::Four } else { Level::Three };
        let res = run_session(&p, &SessionConfig::new(level).with_trace(), seed).unwrap();
        prop_assert!(res.terminated);
        validate_trace(level, &p.mdp, res.trace.as_ref().unwrap()).unwrap();
    }
}
