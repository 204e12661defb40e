//! Epsilon-greedy tabular learners (standard Q-learning and SARSA) and the
//! closed-form reward inversion that makes them controllable.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{Action, State};

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError {
    #[error("SARSA update needs the next action")]
    MissingNextAction,
    #[error("invalid learner parameters: {0}")]
    InvalidSpec(String),
    #[error("Q-table shape mismatch: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateRule {
    #[serde(rename = "q")]
    StandardQ,
    Sarsa,
}

impl UpdateRule {
    pub fn as_str(self) -> &'static str {
        match self {
            UpdateRule::StandardQ => "q",
            UpdateRule::Sarsa => "sarsa",
        }
    }
}

impl std::fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UpdateRule {
    type Err = LearnerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "q" | "standardq" | "qlearning" | "q-learning" => Ok(UpdateRule::StandardQ),
            "sarsa" => Ok(UpdateRule::Sarsa),
            other => Err(LearnerError::InvalidSpec(format!("unknown update rule `{other}`"))),
        }
    }
}

/// Reward goal for the controllability inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Goal {
    /// Rank the action first, `delta` above the runner-up.
    Promote,
    /// Rank the action last, `delta` below the others.
    Demote,
    /// Leave the entry unchanged.
    Maintain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub epsilon: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub rule: UpdateRule,
}

impl LearnerSpec {
    pub fn new(epsilon: f64, alpha: f64, gamma: f64, rule: UpdateRule) -> Result<Self, LearnerError> {
        let spec = Self { epsilon, alpha, gamma, rule };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(LearnerError::InvalidSpec(format!("epsilon {} not in [0, 1]", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnerError::InvalidSpec(format!("alpha {} not in (0, 1]", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(LearnerError::InvalidSpec(format!("gamma {} not in [0, 1)", self.gamma)));
        }
        Ok(())
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    fn bootstrap(&self, q: &QTable, s_next: State, a_next: Option<Action>) -> Result<f64, LearnerError> {
        match self.rule {
            UpdateRule::StandardQ => Ok(q.max(s_next)),
            UpdateRule::Sarsa => {
                let a_next = a_next.ok_or(LearnerError::MissingNextAction)?;
                Ok(q.get(s_next, a_next))
            }
        }
    }

    /// Applies one learning update in place. Only `(e.s, e.a)` changes.
    pub fn apply_update(&self, q: &mut QTable, e: &Experience) -> Result<(), LearnerError> {
        let boot = self.bootstrap(q, e.s_next, e.a_next)?;
        let old = q.get(e.s, e.a);
        q.set(e.s, e.a, (1.0 - self.alpha) * old + self.alpha * (e.r + self.gamma * boot));
        Ok(())
    }

    /// Reward that makes the update realise `goal` for `(s, a)`.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_reward(
        &self,
        q: &QTable,
        s: State,
        a: Action,
        s_next: State,
        a_next: Option<Action>,
        goal: Goal,
        delta: f64,
    ) -> Result<f64, LearnerError> {
        let target = goal_value(q, s, a, goal, delta);
        let boot = self.bootstrap(q, s_next, a_next)?;
        Ok((target - (1.0 - self.alpha) * q.get(s, a)) / self.alpha - self.gamma * boot)
    }
}

/// Post-update value of `q(s, a)` demanded by `goal`.
pub fn goal_value(q: &QTable, s: State, a: Action, goal: Goal, delta: f64) -> f64 {
    let others = q.row(s).iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &v)| v);
    match goal {
        Goal::Promote => others.fold(f64::NEG_INFINITY, f64::max) + delta,
        Goal::Demote => others.fold(f64::INFINITY, f64::min) - delta,
        Goal::Maintain => q.get(s, a),
    }
}

/// Dense `S x A` table of action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, values: vec![0.0; num_states * num_actions] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, LearnerError> {
        let num_states = rows.len();
        let num_actions = rows.first().map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 {
            return Err(LearnerError::Shape("Q-table must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != num_actions) {
            return Err(LearnerError::Shape("ragged Q-table rows".into()));
        }
        let values: Vec<f64> = rows.into_iter().flatten().collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LearnerError::Shape("Q-table entries must be finite".into()));
        }
        Ok(Self { num_states, num_actions, values })
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.num_actions).map(<[f64]>::to_vec).collect()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, s: State, a: Action) -> f64 {
        self.values[s * self.num_actions + a]
    }

    pub fn set(&mut self, s: State, a: Action, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    pub fn row(&self, s: State) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn max(&self, s: State) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Lowest-index argmax of row `s` and whether it is unique.
    pub fn argmax(&self, s: State) -> (Action, bool) {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        let strict = row.iter().enumerate().all(|(a, &v)| a == best || v < row[best]);
        (best, strict)
    }

    /// True when `a` is the unique argmax of row `s`.
    pub fn strictly_prefers(&self, s: State, a: Action) -> bool {
        let row = self.row(s);
        row.iter().enumerate().all(|(b, &v)| b == a || v < row[a])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: State,
    pub a: Action,
    pub r: f64,
    pub s_next: State,
    /// Present only for SARSA's five-tuple.
    pub a_next: Option<Action>,
}

/// Epsilon-greedy draw: the argmax with probability `1 - epsilon`, otherwise
/// uniform over the remaining `A - 1` actions.
pub fn sample_action<R: Rng + ?Sized>(q: &QTable, s: State, spec: &LearnerSpec, rng: &mut R) -> Action {
    let (best, _) = q.argmax(s);
    if spec.epsilon > 0.0 && rng.random_bool(spec.epsilon) {
        let k = rng.random_range(0..q.num_actions() - 1);
        if k < best {
            k
        } else {
            k + 1
        }
    } else {
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GreedyPolicy {
    pub actions: Vec<Action>,
    pub strict: Vec<bool>,
}

impl GreedyPolicy {
    /// True when every state's unique argmax equals `target`.
    pub fn strictly_equals(&self, target: &[Action]) -> bool {
        self.actions.len() == target.len()
            && self.actions.iter().zip(&self.strict).zip(target).all(|((a, s), t)| *s && a == t)
    }
}

pub fn greedy_policy(q: &QTable) -> GreedyPolicy {
    let (actions, strict) = (0..q.num_states()).map(|s| q.argmax(s)).unzip();
    GreedyPolicy { actions, strict }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q_spec() -> LearnerSpec {
        LearnerSpec::new(0.0, 0.5, 0.9, UpdateRule::StandardQ).unwrap()
    }

    #[test]
    fn greedy_when_epsilon_zero() {
        let q = QTable::from_rows(vec![vec![0.0, 1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(sample_action(&q, 0, &q_spec(), &mut rng), 1);
        }
    }

    #[test]
    fn full_exploration_splits_evenly() {
        let q = QTable::from_rows(vec![vec![5.0, 1.0, 0.0]]).unwrap();
        let spec = q_spec().with_epsilon(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[sample_action(&q, 0, &spec, &mut rng)] += 1;
        }
        assert_eq!(counts[0], 0);
        let sigma = (n as f64 * 0.25).sqrt();
        for c in &counts[1..] {
            assert!((*c as f64 - n as f64 / 2.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn greedy_frequency_matches_epsilon() {
        let q = QTable::from_rows(vec![vec![0.0, 0.0, 3.0, 0.0]]).unwrap();
        let spec = q_spec().with_epsilon(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let hits = (0..n).filter(|_| sample_action(&q, 0, &spec, &mut rng) == 2).count();
        let sigma = (n as f64 * 0.7 * 0.3).sqrt();
        assert!((hits as f64 - 0.7 * n as f64).abs() < 3.0 * sigma);
    }

    #[test]
    fn update_arithmetic() {
        let mut q = QTable::zeros(2, 2);
        let e = Experience { s: 0, a: 1, r: 2.2, s_next: 1, a_next: None };
        q_spec().apply_update(&mut q, &e).unwrap();
        assert!((q.get(0, 1) - 1.1).abs() < 1e-12);
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(q.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn unit_rates_copy_reward() {
        let spec = LearnerSpec::new(0.0, 1.0, 0.0, UpdateRule::StandardQ).unwrap();
        let mut q = QTable::from_rows(vec![vec![3.0, -4.0], vec![7.0, 1.0]]).unwrap();
        spec.apply_update(&mut q, &Experience { s: 1, a: 0, r: -0.625, s_next: 0, a_next: None }).unwrap();
        assert_eq!(q.get(1, 0), -0.625);
    }

    #[test]
    fn sarsa_requires_next_action() {
        let spec = LearnerSpec::new(0.0, 0.5, 0.9, UpdateRule::Sarsa).unwrap();
        let mut q = QTable::zeros(1, 2);
        let e = Experience { s: 0, a: 0, r: 1.0, s_next: 0, a_next: None };
        assert_eq!(spec.apply_update(&mut q, &e), Err(LearnerError::MissingNextAction));
    }

    #[test]
    fn sarsa_bootstraps_on_next_pair() {
        let spec = LearnerSpec::new(0.0, 0.5, 0.5, UpdateRule::Sarsa).unwrap();
        let mut q = QTable::from_rows(vec![vec![0.0, 0.0], vec![10.0, 2.0]]).unwrap();
        let e = Experience { s: 0, a: 0, r: 1.0, s_next: 1, a_next: Some(1) };
        spec.apply_update(&mut q, &e).unwrap();
        // 0.5 * (1 + 0.5 * 2)
        assert_eq!(q.get(0, 0), 1.0);
    }

    #[test]
    fn promote_reward() {
        let q = QTable::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r = q_spec().solve_reward(&q, 0, 1, 1, None, Goal::Promote, 0.1).unwrap();
        assert!((r - 2.2).abs() < 1e-12);
        let mut q2 = q.clone();
        q_spec().apply_update(&mut q2, &Experience { s: 0, a: 1, r, s_next: 1, a_next: None }).unwrap();
        assert!((q2.get(0, 1) - 1.1).abs() < 1e-12);
        let p = greedy_policy(&q2);
        assert_eq!(p.actions[0], 1);
        assert!(p.strict[0]);
    }

    #[test]
    fn demote_reward() {
        let q = QTable::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r = q_spec().solve_reward(&q, 0, 0, 1, None, Goal::Demote, 0.1).unwrap();
        assert!((r + 1.2).abs() < 1e-12);
    }

    #[test]
    fn maintain_reward_keeps_table() {
        let q = QTable::from_rows(vec![vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let r = q_spec().solve_reward(&q, 0, 0, 1, None, Goal::Maintain, 0.1).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let mut q2 = q.clone();
        q_spec().apply_update(&mut q2, &Experience { s: 0, a: 0, r, s_next: 1, a_next: None }).unwrap();
        assert_eq!(q, q2);
    }

    #[test]
    fn greedy_ties_take_lowest_index() {
        let q = QTable::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0], vec![4.0, 4.0]]).unwrap();
        let p = greedy_policy(&q);
        assert_eq!(p.actions, vec![1, 0, 0]);
        assert_eq!(p.strict, vec![true, true, false]);
    }
}
