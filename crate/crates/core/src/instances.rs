//! Ready-made teaching problems used by the test suites and the CLI.

use crate::learner::{LearnerSpec, QTable, UpdateRule};
use crate::mdp::{make_peacock, make_peacock_tree_with_depth, Mdp, PeacockTreeLayout};
use crate::teacher::{adversarial_q0, favoring_q0, TeachError, TeachingProblem};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_GAMMA: f64 = 0.9;

pub fn default_spec(epsilon: f64, rule: UpdateRule) -> Result<LearnerSpec, TeachError> {
    Ok(LearnerSpec::new(epsilon, DEFAULT_ALPHA, DEFAULT_GAMMA, rule)?)
}

/// Peacock(S=8, D=3, A=3, H=6, p=0.2) with target action 1 everywhere and
/// every target ranked last, so each state (neck included) needs teaching.
pub fn peacock_instance(epsilon: f64) -> Result<TeachingProblem, TeachError> {
    let mdp = make_peacock(8, 3, 3, 6, 0.2)?;
    let target = vec![1; mdp.num_states()];
    let q0 = adversarial_q0(&mdp, &target);
    TeachingProblem::new(mdp, default_spec(epsilon, UpdateRule::StandardQ)?, q0, target)
}

/// Peacock tree (D=3, tree depth 2, A=2, H=8, p_min=0.5) with target action
/// 0 everywhere. Leaves start with the target ranked last; every other state
/// starts correct and only needs repair after being used for navigation.
pub fn peacock_tree_instance(epsilon: f64) -> Result<TeachingProblem, TeachError> {
    let layout = PeacockTreeLayout::new(3, 2)?;
    let mdp = make_peacock_tree_with_depth(3, 2, 2, 8, 0.5)?;
    let target = vec![0; mdp.num_states()];
    let bad = adversarial_q0(&mdp, &target);
    let good = favoring_q0(&mdp, &target);
    let rows = (0..mdp.num_states())
        .map(|s| if layout.is_leaf(s) { bad.row(s).to_vec() } else { good.row(s).to_vec() })
        .collect();
    let q0 = QTable::from_rows(rows)?;
    TeachingProblem::new(mdp, default_spec(epsilon, UpdateRule::StandardQ)?, q0, target)
}

/// Single self-looping state where `n_blockers` actions outrank the target
/// (action 0) and the rest rank below it.
pub fn blocker_subgame(
    num_actions: usize,
    epsilon: f64,
    n_blockers: usize,
    rule: UpdateRule,
) -> Result<TeachingProblem, TeachError> {
    if num_actions < 2 || n_blockers == 0 || n_blockers >= num_actions {
        return Err(TeachError::InvalidProblem(format!(
            "need 1 <= blockers <= A-1, got {n_blockers} blockers with A={num_actions}"
        )));
    }
    let mdp = Mdp::new(1, num_actions, vec![vec![(0, 1.0)]; num_actions], vec![1.0], 1, None)?;
    let row = (0..num_actions)
        .map(|a| match a {
            0 => 0.0,
            a if a <= n_blockers => a as f64,
            a => -(a as f64),
        })
        .collect();
    let q0 = QTable::from_rows(vec![row])?;
    TeachingProblem::new(mdp, default_spec(epsilon, rule)?, q0, vec![0])
}
