//! Teachers of increasing constraint: Level 1 (full experience control),
//! Level 2 (no action override), and NavTeach for Level 3 (next states from
//! the transition support) and Level 4 (next states sampled by the MDP).

mod level1;
mod level2;
mod navteach;
mod validate;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::{Goal, LearnerError, LearnerSpec, QTable};
use crate::mdp::{Action, Mdp, MdpError, State};

pub use level1::Level1Teacher;
pub use level2::Level2Teacher;
pub use navteach::NavTeachTeacher;
pub use validate::{validate_step, validate_trace};

#[derive(Debug, Error)]
pub enum TeachError {
    #[error("level violation: {0}")]
    LevelViolation(String),
    #[error("invalid teaching problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
}

/// Teacher power level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Level {
    One = 1,
    Two = 2,
    Three = 3,
    Four = 4,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::One, Level::Two, Level::Three, Level::Four];

    pub fn number(self) -> u8 {
        self as u8
    }

    /// Whether the harness performs episode resets at this level. Levels 1
    /// and 2 place states freely, so resets are absorbed.
    pub fn resets_episodes(self) -> bool {
        self >= Level::Three
    }
}

impl TryFrom<u8> for Level {
    type Error = TeachError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Level::One),
            2 => Ok(Level::Two),
            3 => Ok(Level::Three),
            4 => Ok(Level::Four),
            _ => Err(TeachError::InvalidProblem(format!("teacher level must be 1-4, got {v}"))),
        }
    }
}

impl From<Level> for u8 {
    fn from(l: Level) -> u8 {
        l.number()
    }
}

impl FromStr for Level {
    type Err = TeachError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<u8>()
            .map_err(|_| TeachError::InvalidProblem(format!("bad level `{s}`")))
            .and_then(Level::try_from)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// An instance `(M, L, Q0, target policy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TeachingProblem {
    pub mdp: Mdp,
    pub spec: LearnerSpec,
    pub q0: QTable,
    pub target: Vec<Action>,
}

impl TeachingProblem {
    pub fn new(mdp: Mdp, spec: LearnerSpec, q0: QTable, target: Vec<Action>) -> Result<Self, TeachError> {
        let p = Self { mdp, spec, q0, target };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TeachError> {
        self.spec.validate()?;
        let (s_n, a_n) = (self.mdp.num_states(), self.mdp.num_actions());
        if self.q0.num_states() != s_n || self.q0.num_actions() != a_n {
            return Err(TeachError::InvalidProblem(format!(
                "Q0 is {}x{}, MDP is {s_n}x{a_n}",
                self.q0.num_states(),
                self.q0.num_actions()
            )));
        }
        if self.target.len() != s_n {
            return Err(TeachError::InvalidProblem(format!(
                "target policy has {} entries, expected {s_n}",
                self.target.len()
            )));
        }
        if let Some(s) = self.target.iter().position(|&a| a >= a_n) {
            return Err(TeachError::InvalidProblem(format!("target action at state {s} out of range")));
        }
        Ok(())
    }

    /// A state needs teaching iff its target action is not the unique argmax.
    pub fn needs_teaching(&self, q: &QTable, s: State) -> bool {
        !q.strictly_prefers(s, self.target[s])
    }

    /// States needing teaching under `Q0`, ascending.
    pub fn untaught_states(&self) -> Vec<State> {
        (0..self.mdp.num_states()).filter(|&s| self.needs_teaching(&self.q0, s)).collect()
    }
}

/// Which rule of a teacher produced a decision; recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Level 1: override and promote.
    Override,
    /// Level 2: learner played the target action.
    Promote,
    /// Level 2: demoting the last blocker completes the state.
    DemoteAdvance,
    /// Level 2: demote and revisit.
    DemoteStay,
    /// NavTeach at the current target state.
    Target,
    /// NavTeach on the navigation path, transition toward the next path state.
    PathPromote,
    /// NavTeach on the navigation path, action cannot reach the next path state.
    PathDemote,
    /// No-op step.
    Maintain,
    /// Scripted walk replay.
    Replay,
}

/// What a teacher does with one step. The reward itself follows from
/// `goal` by reward inversion once the update's bootstrap term is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeacherDecision {
    /// Level 1 only.
    pub override_action: Option<Action>,
    pub goal: Goal,
    /// Levels 1-3; absent at Level 4 where the environment samples.
    pub next_state: Option<State>,
    pub branch: Branch,
    pub subtask: Option<usize>,
}

impl TeacherDecision {
    #[allow(clippy::too_many_arguments)]
    pub fn reward(
        &self,
        spec: &LearnerSpec,
        q: &QTable,
        s: State,
        a: Action,
        s_next: State,
        a_next: Option<Action>,
        delta: f64,
    ) -> Result<f64, LearnerError> {
        spec.solve_reward(q, s, a, s_next, a_next, self.goal, delta)
    }
}

/// Inputs available to the teacher at one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub problem: &'a TeachingProblem,
    pub q: &'a QTable,
    pub s: State,
    /// Action actually taken (after any Level 1 override).
    pub a: Action,
    /// Environment-sampled next state (Level 4 only).
    pub sampled_next: Option<State>,
}

pub trait Teacher {
    fn level(&self) -> Level;

    /// Teacher-chosen initial state at an episode start, if any.
    fn initial_state(&mut self, problem: &TeachingProblem, q: &QTable, rng: &mut dyn RngCore) -> Option<State>;

    /// Level 1 replaces the learner's action; everyone else keeps it.
    fn choose_action(&mut self, _problem: &TeachingProblem, _s: State, learner_action: Action) -> Action {
        learner_action
    }

    fn decide(&mut self, ctx: &StepContext<'_>, rng: &mut dyn RngCore) -> Result<TeacherDecision, TeachError>;
}

/// `Q0` with every target action strictly last: `q(s, target) = 0` and the
/// other actions get `2, 3, ...` in index order.
pub fn adversarial_q0(mdp: &Mdp, target: &[Action]) -> QTable {
    let a_n = mdp.num_actions();
    let rows = target
        .iter()
        .map(|&t| {
            let mut rank = 1.0;
            (0..a_n)
                .map(|a| {
                    if a == t {
                        0.0
                    } else {
                        rank += 1.0;
                        rank
                    }
                })
                .collect()
        })
        .collect();
    QTable::from_rows(rows).expect("adversarial Q0 has the MDP's shape")
}

/// `Q0` with every target action strictly first.
pub fn favoring_q0(mdp: &Mdp, target: &[Action]) -> QTable {
    let a_n = mdp.num_actions();
    let rows = target
        .iter()
        .map(|&t| {
            let mut rank = 0.0;
            (0..a_n)
                .map(|a| {
                    if a == t {
                        a_n as f64
                    } else {
                        rank += 1.0;
                        rank
                    }
                })
                .collect()
        })
        .collect();
    QTable::from_rows(rows).expect("favoring Q0 has the MDP's shape")
}

pub(crate) fn uniform_support(mdp: &Mdp, s: State, a: Action, rng: &mut dyn RngCore) -> State {
    let row = mdp.transitions(s, a);
    row[rng.random_range(0..row.len())].0
}
