use super::{Level, TeachError};
use crate::harness::StepRecord;
use crate::mdp::Mdp;

/// Checks that a recorded step uses only powers available at `level`.
pub fn validate_step(level: Level, mdp: &Mdp, rec: &StepRecord) -> Result<(), TeachError> {
    let violation = |msg: String| Err(TeachError::LevelViolation(format!("step {}: {msg}", rec.t)));
    if level >= Level::Two && rec.a != rec.learner_a {
        return violation(format!("action overridden {} -> {}", rec.learner_a, rec.a));
    }
    if level >= Level::Three {
        if let Some(s) = rec.s_next {
            if !mdp.supports(rec.s, rec.a, s) {
                return violation(format!("next state {s} outside support of ({}, {})", rec.s, rec.a));
            }
        }
        if let Some(s0) = rec.initial_override {
            if !mdp.is_initial(s0) {
                return violation(format!("initial state {s0} has zero initial probability"));
            }
        }
    }
    if level == Level::Four {
        if rec.teacher_next {
            return violation("teacher chose the next state".into());
        }
        if rec.initial_override.is_some() {
            return violation("teacher chose the initial state".into());
        }
    }
    Ok(())
}

/// Validates a whole trace at `level` and every weaker level.
pub fn validate_trace(level: Level, mdp: &Mdp, trace: &[StepRecord]) -> Result<(), TeachError> {
    for rec in trace {
        for weaker in Level::ALL.into_iter().filter(|&l| l <= level) {
            validate_step(weaker, mdp, rec)?;
        }
    }
    Ok(())
}
