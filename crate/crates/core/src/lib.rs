//! Teaching-by-reinforcement for tabular Q-learning.
//!
//! A teacher controls parts of a learner's experience (rewards always; and,
//! depending on its power level, actions, next states, and episode starts)
//! to make the learner's greedy policy equal a target policy in as few steps
//! as possible. The crate provides the MDP model and hard instance
//! families, epsilon-greedy Q-learning and SARSA learners with exact reward
//! inversion, teachers for all four power levels, a seeded Monte Carlo
//! harness, closed-form bounds, and exact oracles on small graphs.

pub mod analytic;
pub mod harness;
pub mod instances;
pub mod learner;
pub mod mdp;
pub mod oracle;
pub mod teacher;

pub use analytic::{tdim_bounds, BoundInputs, DomainError};
pub use harness::{run_session, run_trials, SessionConfig, SessionResult, TrialStats};
pub use learner::{Goal, LearnerSpec, QTable, UpdateRule};
pub use mdp::{Mdp, MdpError, NavPlan};
pub use teacher::{Level, Teacher, TeachingProblem};
