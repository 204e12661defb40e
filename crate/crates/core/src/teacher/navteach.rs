use std::sync::Arc;

use rand::RngCore;

use super::{uniform_support, Branch, Level, StepContext, TeachError, Teacher, TeacherDecision, TeachingProblem};
use crate::learner::{Goal, QTable};
use crate::mdp::{build_nav_plan, NavPlan, State};

/// Navigate-then-teach for Levels 3 and 4: for each subtask in post-order,
/// teach the actions along the tree path from the root, then the target
/// action at the subtask's state.
#[derive(Debug, Clone)]
pub struct NavTeachTeacher {
    plan: Arc<NavPlan>,
    level: Level,
    subtask: usize,
    /// Next path state for each interior state of the current subtask's path.
    path_next: Vec<Option<State>>,
}

impl NavTeachTeacher {
    pub fn new(problem: &TeachingProblem, level: Level) -> Result<Self, TeachError> {
        let plan = Arc::new(build_nav_plan(&problem.mdp)?);
        Self::with_plan(plan, level)
    }

    /// Shares a precomputed plan between sessions.
    pub fn with_plan(plan: Arc<NavPlan>, level: Level) -> Result<Self, TeachError> {
        if level < Level::Three {
            return Err(TeachError::LevelViolation(format!("NavTeach runs at levels 3 and 4, not {level}")));
        }
        if let Err((earlier, later)) = plan.check_schedule() {
            return Err(TeachError::InvalidProblem(format!(
                "state {earlier} is scheduled before {later} but lies on its path"
            )));
        }
        let n = plan.num_states();
        let mut t = Self { plan, level, subtask: 0, path_next: vec![None; n] };
        t.load_path();
        Ok(t)
    }

    pub fn plan(&self) -> &NavPlan {
        &self.plan
    }

    /// Index into the subtask order; equals its length once all are done.
    pub fn subtask_index(&self) -> usize {
        self.subtask
    }

    pub fn current_target(&self) -> Option<State> {
        self.plan.subtask_order().get(self.subtask).copied()
    }

    fn load_path(&mut self) {
        self.path_next.iter_mut().for_each(|x| *x = None);
        if let Some(target) = self.current_target() {
            let states = self.plan.path_states(target);
            for w in states.windows(2) {
                self.path_next[w[0]] = Some(w[1]);
            }
        }
    }

    /// Skips subtasks whose state already holds its target strictly.
    fn settle(&mut self, problem: &TeachingProblem, q: &QTable) {
        let before = self.subtask;
        while let Some(s) = self.current_target() {
            if problem.needs_teaching(q, s) {
                break;
            }
            self.subtask += 1;
        }
        if self.subtask != before {
            self.load_path();
        }
    }
}

impl Teacher for NavTeachTeacher {
    fn level(&self) -> Level {
        self.level
    }

    fn initial_state(&mut self, problem: &TeachingProblem, q: &QTable, _rng: &mut dyn RngCore) -> Option<State> {
        self.settle(problem, q);
        (self.level == Level::Three).then(|| self.plan.root())
    }

    fn decide(&mut self, ctx: &StepContext<'_>, rng: &mut dyn RngCore) -> Result<TeacherDecision, TeachError> {
        if self.level == Level::Four && ctx.sampled_next.is_none() {
            return Err(TeachError::LevelViolation("level 4 needs the sampled next state".into()));
        }
        self.settle(ctx.problem, ctx.q);
        let mdp = &ctx.problem.mdp;
        let (s, a) = (ctx.s, ctx.a);
        let random_next = |rng: &mut dyn RngCore| match self.level {
            Level::Three => Some(uniform_support(mdp, s, a, rng)),
            _ => None,
        };

        let subtask = self.current_target().map(|_| self.subtask);
        let (goal, next_state, branch) = if self.current_target() == Some(s) {
            let goal = if a == ctx.problem.target[s] { Goal::Promote } else { Goal::Demote };
            (goal, random_next(rng), Branch::Target)
        } else if let Some(u) = self.path_next[s] {
            if mdp.supports(s, a, u) {
                let next = (self.level == Level::Three).then_some(u);
                (Goal::Promote, next, Branch::PathPromote)
            } else {
                (Goal::Demote, random_next(rng), Branch::PathDemote)
            }
        } else {
            (Goal::Maintain, random_next(rng), Branch::Maintain)
        };
        Ok(TeacherDecision { override_action: None, goal, next_state, branch, subtask })
    }
}
