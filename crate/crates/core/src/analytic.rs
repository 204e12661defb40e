//! Closed-form teaching-length formulas and bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::teacher::Level;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

fn check_eps(epsilon: f64) -> Result<(), DomainError> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(DomainError(format!("epsilon {epsilon} not in [0, 1)")))
    }
}

fn check_blockers(n: usize, a: usize) -> Result<(), DomainError> {
    if a < 2 {
        return Err(DomainError(format!("need at least 2 actions, got {a}")));
    }
    if n > a - 1 {
        return Err(DomainError(format!("blocker count {n} exceeds A-1 = {}", a - 1)));
    }
    Ok(())
}

/// Expected visits to one state under the Level-2 promote/demote rule when
/// `n` actions rank above the target.
pub fn expected_visits_closed(n: usize, a: usize, epsilon: f64) -> Result<f64, DomainError> {
    check_blockers(n, a)?;
    check_eps(epsilon)?;
    if n == 0 {
        return Ok(0.0);
    }
    let stay = (a - 1 - n) as f64 / (a - 1) as f64 * epsilon;
    Ok(n as f64 / (1.0 - stay))
}

/// Same quantity from the one-step recursion, solved upward from `T(0) = 0`.
/// Each level is a linear fixed point in `T(n)`.
pub fn expected_visits_recursion(n: usize, a: usize, epsilon: f64) -> Result<f64, DomainError> {
    check_blockers(n, a)?;
    check_eps(epsilon)?;
    let explore = epsilon / (a - 1) as f64;
    let t0 = 0.0;
    let mut prev = t0;
    for k in 1..=n {
        let down = 1.0 - epsilon + (k - 1) as f64 * explore;
        let same = (a - k - 1) as f64 * explore;
        prev = (1.0 + down * prev + explore * t0) / (1.0 - same);
    }
    Ok(prev)
}

/// Parameters of the teaching-dimension bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub s: usize,
    pub a: usize,
    pub h: usize,
    pub d: usize,
    pub epsilon: f64,
    pub p_min: f64,
}

impl BoundInputs {
    pub fn new(s: usize, a: usize, h: usize, d: usize, epsilon: f64, p_min: f64) -> Self {
        Self { s, a, h, d, epsilon, p_min }
    }

    fn validate(&self) -> Result<(), DomainError> {
        if self.s == 0 || self.h == 0 {
            return Err(DomainError("S and H must be positive".into()));
        }
        if self.a < 2 {
            return Err(DomainError(format!("need at least 2 actions, got {}", self.a)));
        }
        if self.d > self.h {
            return Err(DomainError(format!("diameter {} exceeds horizon {}", self.d, self.h)));
        }
        if !(self.p_min > 0.0 && self.p_min <= 1.0) {
            return Err(DomainError(format!("p_min {} not in (0, 1]", self.p_min)));
        }
        check_eps(self.epsilon)
    }

    fn navigation_factor(&self, level: Level) -> f64 {
        let per_step = match level {
            Level::Four => self.p_min * (1.0 - self.epsilon),
            _ => 1.0 - self.epsilon,
        };
        per_step.powi(-(self.d as i32))
    }
}

/// `(lower, upper)` teaching-dimension bounds for a power level.
pub fn tdim_bounds(level: Level, inp: &BoundInputs) -> Result<(f64, f64), DomainError> {
    inp.validate()?;
    let (s, a1, h, d) = (inp.s as f64, (inp.a - 1) as f64, inp.h as f64, inp.d as f64);
    match level {
        Level::One => Ok((s, s)),
        Level::Two => Ok((s * a1, s * a1)),
        Level::Three | Level::Four => {
            if inp.s < inp.d + 2 {
                return Err(DomainError(format!("need S >= D + 2, got S={} D={}", inp.s, inp.d)));
            }
            let nav = inp.navigation_factor(level);
            let upper = (2.0 * s - 1.0) * a1 * h * nav;
            let lower = if level == Level::Three { (s - d - 1.0) * a1 * h * nav } else { 0.5 * (s - d) * a1 * h * nav };
            Ok((lower, upper))
        }
    }
}

/// `H (1 - eps) / eps * ((1 - eps)^-D - 1)`, with its limit `H D` at `eps = 0`.
fn navigation_overhead(h: usize, d: usize, epsilon: f64) -> f64 {
    if epsilon == 0.0 {
        return (h * d) as f64;
    }
    let growth = (-(d as f64) * (-epsilon).ln_1p()).exp_m1();
    h as f64 * (1.0 - epsilon) / epsilon * growth
}

/// Tighter Level-3 bounds including the navigation overhead term.
pub fn tight_theta_level3(inp: &BoundInputs) -> Result<(f64, f64), DomainError> {
    inp.validate()?;
    if inp.s < inp.d + 2 {
        return Err(DomainError(format!("need S >= D + 2, got S={} D={}", inp.s, inp.d)));
    }
    let (s, a1, h, d) = (inp.s as f64, (inp.a - 1) as f64, inp.h as f64, inp.d as f64);
    let nav = inp.navigation_factor(Level::Three);
    let extra = navigation_overhead(inp.h, inp.d, inp.epsilon);
    let lower = (s - d - 1.0) * a1 * h * nav + extra;
    let upper = (2.0 * s - 1.0 - 2.0 * d) * a1 * h * nav + extra;
    Ok((lower, upper))
}

/// Worst-case expected visits per state under the delayed SARSA update.
pub fn sarsa_worstcase_visits(a: usize) -> Result<f64, DomainError> {
    if a < 2 {
        return Err(DomainError(format!("need at least 2 actions, got {a}")));
    }
    Ok((2 * a - 2) as f64)
}

/// Upper bound on a session's expected length, used to size step budgets.
/// Unlike `tdim_bounds` it does not require `S >= D + 2`, and it covers
/// the extra delayed step of SARSA.
pub fn session_upper_bound(level: Level, inp: &BoundInputs, sarsa: bool) -> f64 {
    let (s, a1, h) = (inp.s as f64, (inp.a - 1).max(1) as f64, inp.h as f64);
    let base = match level {
        Level::One => s,
        Level::Two => s * a1,
        Level::Three | Level::Four => (2.0 * s - 1.0) * a1 * h * inp.navigation_factor(level),
    };
    if sarsa {
        2.0 * base + 1.0
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(expected_visits_closed(0, 4, 0.5).unwrap(), 0.0);
        for eps in [0.0, 0.3, 0.9] {
            assert!((expected_visits_closed(3, 4, eps).unwrap() - 3.0).abs() < 1e-15);
        }
        assert!((expected_visits_closed(1, 3, 0.5).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((expected_visits_recursion(1, 4, 0.6).unwrap() - 5.0 / 3.0).abs() < 1e-12);
        assert!((expected_visits_recursion(2, 3, 0.9).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(expected_visits_closed(4, 4, 0.1).is_err());
        assert!(expected_visits_closed(1, 4, 1.0).is_err());
        assert!(tdim_bounds(Level::Three, &BoundInputs::new(4, 3, 6, 3, 0.0, 1.0)).is_err());
        assert!(sarsa_worstcase_visits(1).is_err());
    }

    #[test]
    fn level3_examples() {
        let inp = BoundInputs::new(8, 3, 6, 3, 0.2, 1.0);
        let (lo, hi) = tdim_bounds(Level::Three, &inp).unwrap();
        assert!((lo - 93.75).abs() < 1e-9);
        assert!((hi - 351.5625).abs() < 1e-9);
        let (lo, hi) = tdim_bounds(Level::Three, &BoundInputs { epsilon: 0.0, ..inp }).unwrap();
        assert_eq!((lo, hi), (48.0, 180.0));
        assert_eq!(tdim_bounds(Level::One, &inp).unwrap(), (8.0, 8.0));
        assert_eq!(tdim_bounds(Level::Two, &inp).unwrap(), (16.0, 16.0));
    }

    #[test]
    fn overhead_limit() {
        assert_eq!(navigation_overhead(6, 3, 0.0), 18.0);
        assert!((navigation_overhead(6, 3, 1e-8) - 18.0).abs() < 1e-5);
    }

    #[test]
    fn sarsa_values() {
        assert_eq!(sarsa_worstcase_visits(2).unwrap(), 2.0);
        assert_eq!(sarsa_worstcase_visits(4).unwrap(), 6.0);
    }
}
