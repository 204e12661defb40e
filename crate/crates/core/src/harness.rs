//! The teaching loop, Monte Carlo trials, and result/trace output.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::{session_upper_bound, BoundInputs};
use crate::learner::{sample_action, Experience, Goal, LearnerError, LearnerSpec, QTable, UpdateRule};
use crate::mdp::{build_nav_plan, Action, MdpError, NavPlan, State};
use crate::teacher::{
    Branch, Level, Level1Teacher, Level2Teacher, NavTeachTeacher, StepContext, TeachError, Teacher, TeachingProblem,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Teach(#[from] TeachError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("invalid harness input: {0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub const DEFAULT_DELTA: f64 = 1.0;
pub const DEFAULT_BUDGET_MULTIPLIER: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub level: Level,
    pub delta: f64,
    /// `None` means `budget_multiplier` times the analytic upper bound.
    pub step_budget: Option<u64>,
    pub budget_multiplier: f64,
    pub record_trace: bool,
}

impl SessionConfig {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            delta: DEFAULT_DELTA,
            step_budget: None,
            budget_multiplier: DEFAULT_BUDGET_MULTIPLIER,
            record_trace: false,
        }
    }

    pub fn with_trace(self) -> Self {
        Self { record_trace: true, ..self }
    }

    pub fn with_budget(self, budget: u64) -> Self {
        Self { step_budget: Some(budget), ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }
}

/// One protocol step as recorded in a session trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    pub episode: u64,
    pub s: State,
    /// Action actually taken.
    pub a: Action,
    /// Reward for this step's experience; under SARSA it is only known one
    /// step later and stays empty for an experience that is never applied.
    pub r: Option<f64>,
    pub s_next: Option<State>,
    pub branch: Branch,
    pub subtask: Option<usize>,
    pub goal: Goal,
    /// Action the learner sampled before any override.
    pub learner_a: Action,
    /// True when the teacher rather than the environment chose `s_next`.
    pub teacher_next: bool,
    /// Set on the first step of an episode whose start state the teacher chose.
    pub initial_override: Option<State>,
    /// Q-table entry updated during this step, if any.
    pub update_sa: Option<(State, Action)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub total_steps: u64,
    pub total_episodes: u64,
    pub visits: Vec<u64>,
    pub terminated: bool,
    pub final_q: QTable,
    pub trace: Option<Vec<StepRecord>>,
}

/// Builds fresh teachers for a problem, sharing any navigation plan.
#[derive(Debug, Clone)]
pub struct TeacherFactory {
    level: Level,
    plan: Option<Arc<NavPlan>>,
}

impl TeacherFactory {
    pub fn new(problem: &TeachingProblem, level: Level) -> Result<Self, TeachError> {
        let plan = if level >= Level::Three { Some(Arc::new(build_nav_plan(&problem.mdp)?)) } else { None };
        Ok(Self { level, plan })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn plan(&self) -> Option<&NavPlan> {
        self.plan.as_deref()
    }

    pub fn build(&self, problem: &TeachingProblem) -> Result<Box<dyn Teacher + Send>, TeachError> {
        Ok(match (self.level, &self.plan) {
            (Level::One, _) => Box::new(Level1Teacher::new(problem)),
            (Level::Two, _) => Box::new(Level2Teacher::new(problem)),
            (level, Some(plan)) => Box::new(NavTeachTeacher::with_plan(Arc::clone(plan), level)?),
            (level, None) => Box::new(NavTeachTeacher::new(problem, level)?),
        })
    }
}

/// Default step budget for a problem at a level.
pub fn default_budget(problem: &TeachingProblem, level: Level, multiplier: f64) -> Result<u64, HarnessError> {
    let mdp = &problem.mdp;
    let d = if level >= Level::Three { mdp.diameter()? } else { 0 };
    let inputs = BoundInputs::new(
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon().max(d),
        d,
        problem.spec.epsilon.min(1.0 - 1e-12),
        mdp.min_transition_prob(),
    );
    let upper = session_upper_bound(level, &inputs, problem.spec.rule == UpdateRule::Sarsa);
    Ok((multiplier * upper).ceil().clamp(1.0, 1e15) as u64)
}

/// Runs one session with a freshly built teacher.
pub fn run_session(
    problem: &TeachingProblem,
    config: &SessionConfig,
    seed: u64,
) -> Result<SessionResult, HarnessError> {
    let factory = TeacherFactory::new(problem, config.level)?;
    let mut teacher = factory.build(problem)?;
    run_session_with(problem, teacher.as_mut(), config, seed)
}

struct Pending {
    s: State,
    a: Action,
    s_next: State,
    goal: Goal,
    record: Option<usize>,
}

struct Progress {
    correct: Vec<bool>,
    count: usize,
}

impl Progress {
    fn new(problem: &TeachingProblem, q: &QTable) -> Self {
        let correct: Vec<bool> = (0..q.num_states()).map(|s| !problem.needs_teaching(q, s)).collect();
        let count = correct.iter().filter(|&&c| c).count();
        Self { correct, count }
    }

    fn refresh(&mut self, problem: &TeachingProblem, q: &QTable, s: State) {
        let now = !problem.needs_teaching(q, s);
        if now != self.correct[s] {
            self.correct[s] = now;
            if now {
                self.count += 1;
            } else {
                self.count -= 1;
            }
        }
    }

    fn done(&self) -> bool {
        self.count == self.correct.len()
    }
}

/// Runs the teaching protocol with a caller-supplied teacher.
///
/// Each step: the learner samples an action (Level 1 may replace it); under
/// SARSA the previous step's experience is completed with that action and
/// applied; at Level 4 the environment samples the next state; the teacher
/// decides; under Q-learning the update is applied at once. The session
/// ends as soon as the greedy policy strictly equals the target.
pub fn run_session_with(
    problem: &TeachingProblem,
    teacher: &mut dyn Teacher,
    config: &SessionConfig,
    seed: u64,
) -> Result<SessionResult, HarnessError> {
    problem.validate()?;
    let level = config.level;
    if teacher.level() != level {
        return Err(HarnessError::Invalid(format!(
            "teacher runs at level {}, session at level {level}",
            teacher.level()
        )));
    }
    if !(config.delta > 0.0 && config.delta.is_finite()) {
        return Err(HarnessError::Invalid(format!("delta must be positive, got {}", config.delta)));
    }
    let budget = match config.step_budget {
        Some(b) => b,
        None => default_budget(problem, level, config.budget_multiplier)?,
    };
    let mdp = &problem.mdp;
    let spec: &LearnerSpec = &problem.spec;
    let sarsa = spec.rule == UpdateRule::Sarsa;
    let horizon = mdp.horizon() as u64;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = problem.q0.clone();
    let mut progress = Progress::new(problem, &q);
    let mut visits = vec![0u64; mdp.num_states()];
    let mut trace = config.record_trace.then(Vec::new);
    let mut t = 0u64;
    let mut episodes = 0u64;

    let finish = |t: u64, episodes: u64, visits, terminated, q, trace| {
        let total_episodes = if level.resets_episodes() { episodes } else { t.div_ceil(horizon) };
        Ok(SessionResult { total_steps: t, total_episodes, visits, terminated, final_q: q, trace })
    };

    if progress.done() {
        return finish(0, 0, visits, true, q, trace);
    }

    loop {
        // episode start
        let chosen = teacher.initial_state(problem, &q, &mut rng);
        if let Some(s0) = chosen {
            if s0 >= mdp.num_states() || (level == Level::Three && !mdp.is_initial(s0)) {
                return Err(TeachError::LevelViolation(format!("illegal initial state {s0}")).into());
            }
            if level == Level::Four {
                return Err(TeachError::LevelViolation("level 4 teacher chose the initial state".into()).into());
            }
        }
        let mut s = match chosen {
            Some(s0) => s0,
            None => mdp.sample_initial(&mut rng),
        };
        episodes += 1;
        let mut pending: Option<Pending> = None;
        let mut h = 0u64;

        while !level.resets_episodes() || h < horizon {
            if t >= budget {
                return finish(t, episodes, visits, false, q, trace);
            }
            let learner_a = sample_action(&q, s, spec, &mut rng);
            let a = teacher.choose_action(problem, s, learner_a);
            if a >= mdp.num_actions() || (level >= Level::Two && a != learner_a) {
                return Err(TeachError::LevelViolation(format!("action override at step {t}")).into());
            }
            visits[s] += 1;
            let mut update_sa = None;

            if let Some(p) = pending.take() {
                let r = spec.solve_reward(&q, p.s, p.a, p.s_next, Some(a), p.goal, config.delta)?;
                spec.apply_update(&mut q, &Experience { s: p.s, a: p.a, r, s_next: p.s_next, a_next: Some(a) })?;
                progress.refresh(problem, &q, p.s);
                update_sa = Some((p.s, p.a));
                if let (Some(tr), Some(i)) = (trace.as_mut(), p.record) {
                    let rec: &mut StepRecord = &mut tr[i];
                    rec.r = Some(r);
                }
            }

            let sampled_next = (level == Level::Four).then(|| mdp.sample_next(s, a, &mut rng));
            let ctx = StepContext { problem, q: &q, s, a, sampled_next };
            let decision = teacher.decide(&ctx, &mut rng)?;
            if level >= Level::Two && decision.override_action.is_some() {
                return Err(TeachError::LevelViolation(format!("override at level {level}")).into());
            }
            let s_next = match (level, sampled_next, decision.next_state) {
                (Level::Four, Some(_), Some(_)) => {
                    return Err(TeachError::LevelViolation("level 4 teacher chose the next state".into()).into())
                }
                (Level::Four, Some(sn), None) => sn,
                (_, _, Some(sn)) if sn < mdp.num_states() => {
                    if level == Level::Three && !mdp.supports(s, a, sn) {
                        return Err(TeachError::LevelViolation(format!(
                            "next state {sn} outside support of ({s}, {a})"
                        ))
                        .into());
                    }
                    sn
                }
                _ => {
                    return Err(
                        TeachError::LevelViolation(format!("teacher gave no valid next state at step {t}")).into()
                    )
                }
            };

            let mut r = None;
            if sarsa {
                pending = Some(Pending { s, a, s_next, goal: decision.goal, record: trace.as_ref().map(Vec::len) });
            } else {
                let rv = spec.solve_reward(&q, s, a, s_next, None, decision.goal, config.delta)?;
                spec.apply_update(&mut q, &Experience { s, a, r: rv, s_next, a_next: None })?;
                progress.refresh(problem, &q, s);
                update_sa = Some((s, a));
                r = Some(rv);
            }

            if let Some(tr) = trace.as_mut() {
                tr.push(StepRecord {
                    t,
                    episode: episodes - 1,
                    s,
                    a,
                    r,
                    s_next: Some(s_next),
                    branch: decision.branch,
                    subtask: decision.subtask,
                    goal: decision.goal,
                    learner_a,
                    teacher_next: sampled_next.is_none(),
                    initial_override: if h == 0 { chosen } else { None },
                    update_sa,
                });
            }
            t += 1;
            h += 1;
            if progress.done() {
                return finish(t, episodes, visits, true, q, trace);
            }
            s = s_next;
        }
    }
}

/// Aggregate over independent sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub trials: u64,
    pub completed: u64,
    pub failures: u64,
    pub mean_steps: f64,
    pub std_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub seeds: Vec<u64>,
}

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

impl TrialStats {
    pub fn from_steps(seeds: Vec<u64>, steps: &[Option<u64>]) -> Self {
        let mut acc = RunningStats::default();
        for x in steps.iter().flatten() {
            acc.push(*x as f64);
        }
        let se = acc.std_error();
        let mean = if acc.count() == 0 { f64::NAN } else { acc.mean() };
        Self {
            trials: steps.len() as u64,
            completed: acc.count(),
            failures: steps.len() as u64 - acc.count(),
            mean_steps: mean,
            std_error: se,
            ci95_low: mean - 1.96 * se,
            ci95_high: mean + 1.96 * se,
            seeds,
        }
    }
}

/// Runs `n_trials` sessions with seeds `base_seed + i` in parallel and
/// aggregates them in seed order. Budget overruns count as failures.
pub fn run_trials(
    problem: &TeachingProblem,
    config: &SessionConfig,
    n_trials: u64,
    base_seed: u64,
) -> Result<TrialStats, HarnessError> {
    if n_trials == 0 {
        return Err(HarnessError::Invalid("need at least one trial".into()));
    }
    let factory = TeacherFactory::new(problem, config.level)?;
    let config = SessionConfig {
        record_trace: false,
        step_budget: match config.step_budget {
            Some(b) => Some(b),
            None => Some(default_budget(problem, config.level, config.budget_multiplier)?),
        },
        ..*config
    };
    let seeds: Vec<u64> = (0..n_trials).map(|i| base_seed.wrapping_add(i)).collect();
    let steps = seeds
        .par_iter()
        .map(|&seed| {
            let mut teacher = factory.build(problem)?;
            let res = run_session_with(problem, teacher.as_mut(), &config, seed)?;
            Ok(res.terminated.then_some(res.total_steps))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(TrialStats::from_steps(seeds, &steps))
}

/// Monte Carlo estimate of the visits one state needs under the Level-2
/// rule when `n_blockers` actions rank above the target.
pub fn expected_visits_mc(
    num_actions: usize,
    epsilon: f64,
    n_blockers: usize,
    rule: UpdateRule,
    trials: u64,
    seed: u64,
) -> Result<f64, HarnessError> {
    let problem = crate::instances::blocker_subgame(num_actions, epsilon, n_blockers, rule)?;
    let stats = run_trials(&problem, &SessionConfig::new(Level::Two), trials, seed)?;
    if stats.failures > 0 {
        return Err(HarnessError::Invalid(format!("{} subgame sessions exceeded the budget", stats.failures)));
    }
    Ok(stats.mean_steps)
}

/// Writes a trace as JSON lines.
pub fn write_trace<W: Write>(mut out: W, trace: &[StepRecord]) -> Result<(), HarnessError> {
    for rec in trace {
        serde_json::to_writer(&mut out, rec).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> Result<Vec<StepRecord>, HarnessError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| HarnessError::Invalid(format!("bad trace line: {e}"))))
        .collect()
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub level: u8,
    pub learner_rule: String,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "H")]
    pub h: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub epsilon: f64,
    pub p_min: f64,
    pub delta: f64,
    pub trials: u64,
    pub failures: u64,
    pub mean_steps: f64,
    pub std_error: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub bound_lower: Option<f64>,
    pub bound_upper: Option<f64>,
    pub base_seed: u64,
}

pub const RESULT_HEADER: [&str; 19] = [
    "experiment_id",
    "level",
    "learner_rule",
    "S",
    "A",
    "H",
    "D",
    "epsilon",
    "p_min",
    "delta",
    "trials",
    "failures",
    "mean_steps",
    "std_error",
    "ci95_low",
    "ci95_high",
    "bound_lower",
    "bound_upper",
    "base_seed",
];

/// Writes rows as CSV, with the header only when `with_header` is set.
pub fn write_results<W: Write>(out: W, rows: &[ResultRow], with_header: bool) -> Result<(), HarnessError> {
    let mut w = csv::WriterBuilder::new().has_headers(with_header).from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() && with_header {
        w.write_record(RESULT_HEADER)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(RESULT_HEADER.iter().copied()) {
        return Err(HarnessError::Invalid(format!("unexpected results header: {headers:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<ResultRow>, _>>()?)
}

/// Shared RNG type for sessions.
pub type SessionRng = ChaCha8Rng;

pub fn session_rng(seed: u64) -> SessionRng {
    ChaCha8Rng::seed_from_u64(seed)
}
