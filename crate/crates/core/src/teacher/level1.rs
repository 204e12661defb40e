use rand::RngCore;

use super::{Branch, Level, StepContext, TeachError, Teacher, TeacherDecision, TeachingProblem};
use crate::learner::{Goal, QTable};
use crate::mdp::{Action, State};

/// Full experience control: visit each state that needs teaching once,
/// force the target action, and promote it.
#[derive(Debug, Clone)]
pub struct Level1Teacher {
    schedule: Vec<State>,
    cursor: usize,
}

impl Level1Teacher {
    pub fn new(problem: &TeachingProblem) -> Self {
        Self { schedule: problem.untaught_states(), cursor: 0 }
    }

    pub fn schedule(&self) -> &[State] {
        &self.schedule
    }
}

impl Teacher for Level1Teacher {
    fn level(&self) -> Level {
        Level::One
    }

    fn initial_state(&mut self, _problem: &TeachingProblem, _q: &QTable, _rng: &mut dyn RngCore) -> Option<State> {
        self.schedule.get(self.cursor).copied()
    }

    fn choose_action(&mut self, problem: &TeachingProblem, s: State, _learner_action: Action) -> Action {
        problem.target[s]
    }

    fn decide(&mut self, ctx: &StepContext<'_>, _rng: &mut dyn RngCore) -> Result<TeacherDecision, TeachError> {
        let subtask = self.cursor;
        if self.schedule.get(self.cursor) == Some(&ctx.s) {
            self.cursor += 1;
        }
        let next = self.schedule.get(self.cursor).copied().unwrap_or(ctx.s);
        Ok(TeacherDecision {
            override_action: Some(ctx.problem.target[ctx.s]),
            goal: Goal::Promote,
            next_state: Some(next),
            branch: Branch::Override,
            subtask: Some(subtask),
        })
    }
}
