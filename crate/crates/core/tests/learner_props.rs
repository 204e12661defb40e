use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use teachdim::learner::{greedy_policy, sample_action, Experience, Goal, LearnerSpec, QTable, UpdateRule};

fn spec(eps: f64, alpha: f64, gamma: f64, rule: UpdateRule) -> LearnerSpec {
    LearnerSpec::new(eps, alpha, gamma, rule).unwrap()
}

fn goal_strategy() -> impl Strategy<Value = Goal> {
    prop_oneof![Just(Goal::Promote), Just(Goal::Demote), Just(Goal::Maintain)]
}

fn table_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (1usize..5, 2usize..5).prop_flat_map(|(s, a)| (Just(s), Just(a), prop::collection::vec(-50.0f64..50.0, s * a)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inversion_realises_goal(
        (s_n, a_n, vals) in table_strategy(),
        picks in (any::<usize>(), any::<usize>(), any::<usize>(), any::<usize>()),
        alpha in 0.01f64..=1.0,
        gamma in 0.0f64..0.999,
        delta in 0.001f64..10.0,
        goal in goal_strategy(),
        sarsa in any::<bool>(),
    ) {
        let rows = vals.chunks(a_n).map(<[f64]>::to_vec).collect();
        let mut q = QTable::from_rows(rows).unwrap();
        let (s, a, sn, an) = (picks.0 % s_n, picks.1 % a_n, picks.2 % s_n, picks.3 % a_n);
        let rule = if sarsa { UpdateRule::Sarsa } else { UpdateRule::StandardQ };
        let l = spec(0.1, alpha, gamma, rule);
        let a_next = sarsa.then_some(an);
        let others: Vec<f64> = (0..a_n).filter(|&b| b != a).map(|b| q.get(s, b)).collect();
        let want = match goal {
            Goal::Promote => others.iter().cloned().fold(f64::MIN, f64::max) + delta,
            Goal::Demote => others.iter().cloned().fold(f64::MAX, f64::min) - delta,
            Goal::Maintain => q.get(s, a),
        };
        let before = q.clone();
        let r = l.solve_reward(&q, s, a, sn, a_next, goal, delta).unwrap();
        l.apply_update(&mut q, &Experience { s, a, r, s_next: sn, a_next }).unwrap();
        prop_assert!((q.get(s, a) - want).abs() <= 1e-9 * want.abs().max(1.0));
        for x in 0..s_n {
            for b in 0..a_n {
                if (x, b) != (s, a) {
                    prop_assert_eq!(q.get(x, b).to_bits(), before.get(x, b).to_bits());
                }
            }
        }
        match goal {
            Goal::Promote => prop_assert!(q.strictly_prefers(s, a)),
            Goal::Demote => prop_assert!((0..a_n).all(|b| b == a || q.get(s, b) > q.get(s, a))),
            Goal::Maintain => {}
        }
    }

    #[test]
    fn sampled_actions_in_range((s_n, a_n, vals) in table_strategy(), eps in 0.0f64..=1.0, seed in any::<u64>()) {
        let q = QTable::from_rows(vals.chunks(a_n).map(<[f64]>::to_vec).collect()).unwrap();
        let l = spec(eps, 0.5, 0.9, UpdateRule::StandardQ);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in 0..s_n {
            for _ in 0..20 {
                prop_assert!(sample_action(&q, s, &l, &mut rng) < a_n);
            }
        }
    }
}

fn frequencies(q: &QTable, eps: f64, draws: usize) -> Vec<f64> {
    let l = spec(eps, 0.5, 0.9, UpdateRule::StandardQ);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut counts = vec![0usize; q.num_actions()];
    for _ in 0..draws {
        counts[sample_action(q, 0, &l, &mut rng)] += 1;
    }
    counts.into_iter().map(|c| c as f64 / draws as f64).collect()
}

#[test]
fn greedy_at_zero_epsilon() {
    let q = QTable::from_rows(vec![vec![0.0, 1.0]]).unwrap();
    assert!(frequencies(&q, 0.0, 1000).iter().zip([0.0, 1.0]).all(|(f, e)| *f == e));
}

#[test]
fn full_exploration_skips_argmax() {
    let q = QTable::from_rows(vec![vec![5.0, 0.0, 0.0]]).unwrap();
    let n = 100_000.0;
    let f = frequencies(&q, 1.0, n as usize);
    assert_eq!(f[0], 0.0);
    let sigma = (0.25f64 / n).sqrt();
    assert!((f[1] - 0.5).abs() < 3.0 * sigma && (f[2] - 0.5).abs() < 3.0 * sigma);
}

#[test]
fn greedy_mass_is_one_minus_epsilon() {
    let q = QTable::from_rows(vec![vec![0.0, 0.0, 3.0, 1.0]]).unwrap();
    let n = 100_000.0;
    let f = frequencies(&q, 0.3, n as usize);
    let sigma = (0.7f64 * 0.3 / n).sqrt();
    assert!((f[2] - 0.7).abs() < 3.0 * sigma, "{f:?}");
    // every action has positive probability
    assert!(f.iter().all(|&x| x > 0.0));
}

#[test]
fn greedy_policy_examples() {
    let q = QTable::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let p = greedy_policy(&q);
    assert_eq!(p.actions, vec![1, 0, 0]);
    assert_eq!(p.strict, vec![true, true, false]);
    assert!(!p.strictly_equals(&[1, 0, 0]));
}

#[test]
fn degenerate_rates_copy_reward() {
    let mut q = QTable::from_rows(vec![vec![3.0, -2.0]]).unwrap();
    let l = spec(0.0, 1.0, 0.0, UpdateRule::StandardQ);
    l.apply_update(&mut q, &Experience { s: 0, a: 1, r: 7.5, s_next: 0, a_next: None }).unwrap();
    assert_eq!(q.get(0, 1), 7.5);
}
