use rand::RngCore;

use super::{Branch, Level, StepContext, TeachError, Teacher, TeacherDecision, TeachingProblem};
use crate::learner::{Goal, QTable, UpdateRule};
use crate::mdp::State;

/// No action override: promote the target when the learner plays it,
/// otherwise push the played action to the bottom of its row.
///
/// Under SARSA a decision only lands one step later, so revisiting the same
/// state right away would replay the same greedy action. When other states
/// remain, the teacher moves on to the next one instead of staying.
#[derive(Debug, Clone)]
pub struct Level2Teacher {
    remaining: Vec<State>,
    cursor: usize,
    rule: UpdateRule,
}

impl Level2Teacher {
    pub fn new(problem: &TeachingProblem) -> Self {
        Self { remaining: problem.untaught_states(), cursor: 0, rule: problem.spec.rule }
    }

    pub fn remaining(&self) -> &[State] {
        &self.remaining
    }
}

impl Teacher for Level2Teacher {
    fn level(&self) -> Level {
        Level::Two
    }

    fn initial_state(&mut self, _problem: &TeachingProblem, _q: &QTable, _rng: &mut dyn RngCore) -> Option<State> {
        self.remaining.get(self.cursor).copied()
    }

    fn decide(&mut self, ctx: &StepContext<'_>, _rng: &mut dyn RngCore) -> Result<TeacherDecision, TeachError> {
        let (s, a) = (ctx.s, ctx.a);
        let target = ctx.problem.target[s];
        let (goal, branch) = if a == target {
            (Goal::Promote, Branch::Promote)
        } else {
            let floor = ctx.q.get(s, target);
            let blockers_left = ctx.q.row(s).iter().enumerate().all(|(b, &v)| b == a || b == target || v < floor);
            if blockers_left && ctx.q.get(s, a) >= floor {
                (Goal::Demote, Branch::DemoteAdvance)
            } else {
                (Goal::Demote, Branch::DemoteStay)
            }
        };

        let pos = self.remaining.iter().position(|&x| x == s);
        let subtask = pos;
        let completes = branch != Branch::DemoteStay;
        let next = match pos {
            Some(i) if completes => {
                self.remaining.remove(i);
                if self.remaining.is_empty() {
                    s
                } else {
                    self.cursor = i % self.remaining.len();
                    self.remaining[self.cursor]
                }
            }
            Some(i) if self.rule == UpdateRule::Sarsa && self.remaining.len() > 1 => {
                self.cursor = (i + 1) % self.remaining.len();
                self.remaining[self.cursor]
            }
            _ => s,
        };
        Ok(TeacherDecision { override_action: None, goal, next_state: Some(next), branch, subtask })
    }
}
