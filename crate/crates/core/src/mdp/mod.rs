//! Episodic tabular MDPs with sparse transition rows.
//!
//! Only the support structure of an [`Mdp`] matters to the stronger
//! teachers; the probabilities matter when transitions are sampled.

mod generators;
pub mod io;
mod nav;

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

pub use generators::{
    make_chain, make_peacock, make_peacock_tree, make_peacock_tree_with_depth, make_random_sparse,
    peacock_tree_depth_for, PeacockTreeLayout,
};
pub use nav::{build_nav_plan, NavPlan};

pub type State = usize;
pub type Action = usize;

/// Tolerance used for "sums to one" checks.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("state {0} is unreachable from every supported initial state")]
    UnreachableState(State),
    #[error("parse error at line {line}, column {column} (field `{field}`): {message}")]
    Parse { line: usize, column: usize, field: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An episodic MDP `(S, A, R, P, mu0, H)`.
///
/// Rows of `P` are stored sparsely, sorted by next state. Every `(s, a)`
/// has a non-empty row.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    num_states: usize,
    num_actions: usize,
    transitions: Vec<Vec<(State, f64)>>,
    initial_dist: Vec<f64>,
    horizon: usize,
    base_reward: Option<Vec<f64>>,
}

impl Mdp {
    /// Builds and validates an MDP.
    ///
    /// `transitions` is indexed by `s * num_actions + a`. Rows are sorted by
    /// next state; a duplicated next state is an error.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        mut transitions: Vec<Vec<(State, f64)>>,
        initial_dist: Vec<f64>,
        horizon: usize,
        base_reward: Option<Vec<f64>>,
    ) -> Result<Self, MdpError> {
        if num_states == 0 {
            return Err(MdpError::InvariantViolation("num_states must be positive".into()));
        }
        if num_actions < 2 {
            return Err(MdpError::InvariantViolation(format!("num_actions must be at least 2, got {num_actions}")));
        }
        if horizon == 0 {
            return Err(MdpError::InvariantViolation("horizon must be positive".into()));
        }
        if transitions.len() != num_states * num_actions {
            return Err(MdpError::InvariantViolation(format!(
                "expected {} transition rows, got {}",
                num_states * num_actions,
                transitions.len()
            )));
        }
        for (idx, row) in transitions.iter_mut().enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            if row.is_empty() {
                return Err(MdpError::InvariantViolation(format!("no transitions for (s={s}, a={a})")));
            }
            row.sort_by_key(|&(next, _)| next);
            let mut total = 0.0;
            for (i, &(next, p)) in row.iter().enumerate() {
                if next >= num_states {
                    return Err(MdpError::InvariantViolation(format!(
                        "(s={s}, a={a}) has next state {next} out of range"
                    )));
                }
                if i > 0 && row[i - 1].0 == next {
                    return Err(MdpError::InvariantViolation(format!("(s={s}, a={a}) lists next state {next} twice")));
                }
                if !(p > 0.0 && p <= 1.0) {
                    return Err(MdpError::InvariantViolation(format!(
                        "(s={s}, a={a}) -> {next} has probability {p} outside (0, 1]"
                    )));
                }
                total += p;
            }
            if (total - 1.0).abs() > PROB_TOLERANCE {
                return Err(MdpError::InvariantViolation(format!("(s={s}, a={a}) probabilities sum to {total}")));
            }
        }
        if initial_dist.len() != num_states {
            return Err(MdpError::InvariantViolation(format!(
                "mu0 has {} entries, expected {num_states}",
                initial_dist.len()
            )));
        }
        if initial_dist.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(MdpError::InvariantViolation("mu0 has a negative entry".into()));
        }
        let mu_total: f64 = initial_dist.iter().sum();
        if (mu_total - 1.0).abs() > PROB_TOLERANCE {
            return Err(MdpError::InvariantViolation(format!("mu0 sums to {mu_total}")));
        }
        if let Some(r) = &base_reward {
            if r.len() != num_states * num_actions {
                return Err(MdpError::InvariantViolation(format!(
                    "base_reward has {} entries, expected {}",
                    r.len(),
                    num_states * num_actions
                )));
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(MdpError::InvariantViolation("base_reward must be finite".into()));
            }
        }
        Ok(Self { num_states, num_actions, transitions, initial_dist, horizon, base_reward })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    /// Same MDP with a different episode length.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self, MdpError> {
        if horizon == 0 {
            return Err(MdpError::InvariantViolation("horizon must be positive".into()));
        }
        Ok(Self { horizon, ..self.clone() })
    }

    /// Sparse row `P(. | s, a)`, sorted by next state.
    pub fn transitions(&self, s: State, a: Action) -> &[(State, f64)] {
        &self.transitions[s * self.num_actions + a]
    }

    pub fn prob(&self, s: State, a: Action, next: State) -> f64 {
        let row = self.transitions(s, a);
        row.binary_search_by_key(&next, |&(n, _)| n).map(|i| row[i].1).unwrap_or(0.0)
    }

    pub fn supports(&self, s: State, a: Action, next: State) -> bool {
        self.transitions(s, a).binary_search_by_key(&next, |&(n, _)| n).is_ok()
    }

    /// Next states reachable from `(s, a)` with positive probability.
    pub fn support(&self, s: State, a: Action) -> impl Iterator<Item = State> + '_ {
        self.transitions(s, a).iter().map(|&(n, _)| n)
    }

    pub fn initial_support(&self) -> impl Iterator<Item = State> + '_ {
        self.initial_dist.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s, _)| s)
    }

    pub fn is_initial(&self, s: State) -> bool {
        self.initial_dist.get(s).is_some_and(|&p| p > 0.0)
    }

    pub fn base_reward(&self, s: State, a: Action) -> f64 {
        self.base_reward.as_ref().map_or(0.0, |r| r[s * self.num_actions + a])
    }

    pub fn base_reward_table(&self) -> Option<&[f64]> {
        self.base_reward.as_deref()
    }

    /// Draws `s' ~ P(. | s, a)`.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: State, a: Action, rng: &mut R) -> State {
        sample_sparse(self.transitions(s, a), rng)
    }

    /// Draws `s0 ~ mu0`.
    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (s, &p) in self.initial_dist.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last = s;
                if u < acc {
                    return s;
                }
            }
        }
        last
    }

    /// Out-neighbours of `s` in the support digraph, over all actions, ascending.
    pub fn successors(&self, s: State) -> Vec<State> {
        let mut out: Vec<State> = (0..self.num_actions).flat_map(|a| self.support(s, a)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Support-digraph BFS distance from the nearest supported initial state.
    pub fn start_distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.num_states];
        let mut queue = VecDeque::new();
        for s in self.initial_support() {
            dist[s] = Some(0);
            queue.push_back(s);
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for v in self.successors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Length of the shortest supported path to the hardest-to-reach state.
    pub fn diameter(&self) -> Result<usize, MdpError> {
        let mut max = 0;
        for (s, d) in self.start_distances().into_iter().enumerate() {
            match d {
                Some(d) => max = max.max(d),
                None => return Err(MdpError::UnreachableState(s)),
            }
        }
        Ok(max)
    }

    /// Smallest positive transition probability (`p_min`).
    pub fn min_transition_prob(&self) -> f64 {
        self.transitions.iter().flatten().map(|&(_, p)| p).fold(1.0, f64::min)
    }
}

fn sample_sparse<R: Rng + ?Sized>(row: &[(State, f64)], rng: &mut R) -> State {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(next, p) in row {
        acc += p;
        if u < acc {
            return next;
        }
    }
    row[row.len() - 1].0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain4() -> Mdp {
        make_chain(4, 2, 4).unwrap()
    }

    #[test]
    fn chain_diameter_is_length() {
        assert_eq!(chain4().diameter().unwrap(), 3);
    }

    #[test]
    fn single_state_diameter_zero() {
        let m = Mdp::new(1, 2, vec![vec![(0, 1.0)], vec![(0, 1.0)]], vec![1.0], 1, None).unwrap();
        assert_eq!(m.diameter().unwrap(), 0);
        assert_eq!(m.min_transition_prob(), 1.0);
    }

    #[test]
    fn deterministic_pmin_is_one() {
        assert_eq!(chain4().min_transition_prob(), 1.0);
    }

    #[test]
    fn pmin_of_listed_entries() {
        let m = Mdp::new(
            2,
            2,
            vec![vec![(0, 0.5), (1, 0.5)], vec![(0, 0.3), (1, 0.7)], vec![(1, 1.0)], vec![(1, 1.0)]],
            vec![1.0, 0.0],
            2,
            None,
        )
        .unwrap();
        assert_eq!(m.min_transition_prob(), 0.3);
    }

    #[test]
    fn rejects_single_action() {
        let err = Mdp::new(1, 1, vec![vec![(0, 1.0)]], vec![1.0], 1, None).unwrap_err();
        assert!(matches!(err, MdpError::InvariantViolation(_)));
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = Mdp::new(
            2,
            2,
            vec![vec![(0, 0.4), (1, 0.5)], vec![(1, 1.0)], vec![(1, 1.0)], vec![(1, 1.0)]],
            vec![1.0, 0.0],
            2,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, MdpError::InvariantViolation(_)));
    }

    #[test]
    fn rejects_duplicate_next_state() {
        let err = Mdp::new(1, 2, vec![vec![(0, 0.5), (0, 0.5)], vec![(0, 1.0)]], vec![1.0], 1, None).unwrap_err();
        assert!(matches!(err, MdpError::InvariantViolation(_)));
    }

    #[test]
    fn unreachable_state_reported() {
        let m = Mdp::new(
            2,
            2,
            vec![vec![(0, 1.0)], vec![(0, 1.0)], vec![(1, 1.0)], vec![(0, 1.0)]],
            vec![1.0, 0.0],
            2,
            None,
        )
        .unwrap();
        assert!(matches!(m.diameter(), Err(MdpError::UnreachableState(1))));
    }

    #[test]
    fn diameter_takes_min_over_starts() {
        // 0 -> 1 -> 2, with mu0 on {0, 2}: state 2 is at distance 0.
        let m = Mdp::new(
            3,
            2,
            vec![vec![(1, 1.0)], vec![(0, 1.0)], vec![(2, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)], vec![(2, 1.0)]],
            vec![0.5, 0.0, 0.5],
            3,
            None,
        )
        .unwrap();
        assert_eq!(m.diameter().unwrap(), 1);
    }
}
