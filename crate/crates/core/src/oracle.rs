//! Exact small-instance oracles: minimum covering walks (asymmetric TSP
//! paths over the metric closure), the reduction from covering walks to
//! Level-3 teaching, and certification of teaching lengths on it.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{run_session_with, HarnessError, SessionConfig};
use crate::instances::{DEFAULT_ALPHA, DEFAULT_GAMMA};
use crate::learner::{Goal, LearnerSpec, QTable, UpdateRule};
use crate::mdp::{Mdp, MdpError, State};
use crate::teacher::{Branch, Level, StepContext, TeachError, Teacher, TeacherDecision, TeachingProblem};

pub const HELD_KARP_MAX: usize = 20;
pub const BRUTE_FORCE_MAX: usize = 9;
pub const EXHAUSTIVE_MAX: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("vertex {0} is unreachable from the start vertex")]
    Unreachable(usize),
    #[error("graph has {n} vertices, limit is {max}")]
    TooLarge { n: usize, max: usize },
    #[error("certification failed: {0}")]
    CertificationFailure(String),
    #[error(transparent)]
    Teach(#[from] TeachError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Weighted digraph with a start vertex. Serialised as
/// `{"n": .., "start": .., "edges": [[u, v, w], ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DigraphFile", into = "DigraphFile")]
pub struct Digraph {
    n: usize,
    start: usize,
    edges: Vec<(usize, usize, u32)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DigraphFile {
    n: usize,
    start: usize,
    edges: Vec<(usize, usize, u32)>,
}

impl TryFrom<DigraphFile> for Digraph {
    type Error = OracleError;

    fn try_from(f: DigraphFile) -> Result<Self, Self::Error> {
        Digraph::new(f.n, f.start, f.edges)
    }
}

impl From<Digraph> for DigraphFile {
    fn from(g: Digraph) -> Self {
        Self { n: g.n, start: g.start, edges: g.edges }
    }
}

const INF: u64 = u64::MAX / 4;

impl Digraph {
    /// Validates indices, weights, and reachability from `start`.
    pub fn new(n: usize, start: usize, edges: Vec<(usize, usize, u32)>) -> Result<Self, OracleError> {
        if n == 0 {
            return Err(OracleError::InvalidGraph("graph has no vertices".into()));
        }
        if start >= n {
            return Err(OracleError::InvalidGraph(format!("start {start} out of range")));
        }
        if let Some(&(u, v, w)) = edges.iter().find(|&&(u, v, w)| u >= n || v >= n || w == 0) {
            return Err(OracleError::InvalidGraph(format!("bad edge ({u}, {v}, {w})")));
        }
        let g = Self { n, start, edges };
        let hops = g.hop_distances();
        if let Some(v) = hops.iter().position(Option::is_none) {
            return Err(OracleError::Unreachable(v));
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<Self, OracleError> {
        serde_json::from_str::<DigraphFile>(text)
            .map_err(|e| OracleError::InvalidGraph(e.to_string()))
            .and_then(Digraph::try_from)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serialisation cannot fail")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn edges(&self) -> &[(usize, usize, u32)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.iter().any(|&(a, b, _)| a == u && b == v)
    }

    /// Distinct out-neighbours of `u`, ascending.
    pub fn out_neighbors(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.edges.iter().filter(|e| e.0 == u).map(|e| e.1).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Unweighted hop distance from the start vertex.
    pub fn hop_distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[self.start] = Some(0);
        let mut queue = VecDeque::from([self.start]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for v in self.out_neighbors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Largest hop distance from the start vertex.
    pub fn diameter_from_start(&self) -> usize {
        self.hop_distances().into_iter().flatten().max().unwrap_or(0)
    }

    /// All-pairs shortest path weights and next hops (Floyd-Warshall).
    fn metric_closure(&self) -> (Vec<Vec<u64>>, Vec<Vec<usize>>) {
        let n = self.n;
        let mut dist = vec![vec![INF; n]; n];
        let mut next = vec![vec![usize::MAX; n]; n];
        for v in 0..n {
            dist[v][v] = 0;
            next[v][v] = v;
        }
        for &(u, v, w) in &self.edges {
            if u != v && u64::from(w) < dist[u][v] {
                dist[u][v] = u64::from(w);
                next[u][v] = v;
            }
        }
        for k in 0..n {
            for i in 0..n {
                if dist[i][k] == INF {
                    continue;
                }
                for j in 0..n {
                    let via = dist[i][k] + dist[k][j];
                    if via < dist[i][j] {
                        dist[i][j] = via;
                        next[i][j] = next[i][k];
                    }
                }
            }
        }
        (dist, next)
    }
}

/// A walk from the start vertex that visits every vertex at least once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoveringWalk {
    /// Sum of edge weights along `walk`.
    pub length: u64,
    pub walk: Vec<usize>,
}

/// Minimum covering walk by Held-Karp subset DP over the metric closure,
/// expanded back to graph edges.
pub fn atsp_held_karp(g: &Digraph) -> Result<CoveringWalk, OracleError> {
    let n = g.n;
    if n > HELD_KARP_MAX {
        return Err(OracleError::TooLarge { n, max: HELD_KARP_MAX });
    }
    let (dist, next) = g.metric_closure();
    if n == 1 {
        return Ok(CoveringWalk { length: 0, walk: vec![g.start] });
    }
    // DP over subsets of the non-start vertices
    let others: Vec<usize> = (0..n).filter(|&v| v != g.start).collect();
    let m = others.len();
    let full = (1usize << m) - 1;
    let unreached = u32::MAX;
    let mut dp = vec![unreached; (full + 1) * m];
    for (j, &v) in others.iter().enumerate() {
        dp[(1 << j) * m + j] = dist[g.start][v] as u32;
    }
    for mask in 1..=full {
        for j in 0..m {
            let cur = dp[mask * m + j];
            if cur == unreached || mask & (1 << j) == 0 {
                continue;
            }
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    continue;
                }
                let cand = cur + dist[others[j]][others[k]] as u32;
                let slot = &mut dp[(mask | (1 << k)) * m + k];
                if cand < *slot {
                    *slot = cand;
                }
            }
        }
    }
    let (mut last, best) =
        (0..m).map(|j| (j, dp[full * m + j])).min_by_key(|&(j, c)| (c, j)).expect("at least one non-start vertex");

    // recover the visit order
    let mut order = vec![others[last]];
    let mut mask = full;
    while mask != 1 << last {
        let prev_mask = mask & !(1 << last);
        let cost = dp[mask * m + last];
        let prev = (0..m)
            .find(|&i| {
                prev_mask & (1 << i) != 0
                    && dp[prev_mask * m + i] != unreached
                    && dp[prev_mask * m + i] + dist[others[i]][others[last]] as u32 == cost
            })
            .expect("Held-Karp table is consistent");
        order.push(others[prev]);
        mask = prev_mask;
        last = prev;
    }
    order.push(g.start);
    order.reverse();

    let mut walk = vec![g.start];
    for pair in order.windows(2) {
        let (mut u, v) = (pair[0], pair[1]);
        while u != v {
            u = next[u][v];
            walk.push(u);
        }
    }
    Ok(CoveringWalk { length: u64::from(best), walk })
}

/// Minimum covering-walk length by trying every visit order.
pub fn atsp_brute_force(g: &Digraph) -> Result<u64, OracleError> {
    let n = g.n;
    if n > BRUTE_FORCE_MAX {
        return Err(OracleError::TooLarge { n, max: BRUTE_FORCE_MAX });
    }
    let (dist, _) = g.metric_closure();
    let mut rest: Vec<usize> = (0..n).filter(|&v| v != g.start).collect();
    fn search(dist: &[Vec<u64>], at: usize, rest: &mut Vec<usize>, acc: u64, best: &mut u64) {
        if rest.is_empty() {
            *best = (*best).min(acc);
            return;
        }
        for i in 0..rest.len() {
            let v = rest.swap_remove(i);
            search(dist, v, rest, acc + dist[at][v], best);
            rest.push(v);
            let last = rest.len() - 1;
            rest.swap(i, last);
        }
    }
    let mut best = INF;
    search(&dist, g.start, &mut rest, 0, &mut best);
    Ok(best)
}

/// Checks that `walk` starts at the start vertex, uses only graph edges,
/// and covers every vertex. Returns its weight.
pub fn check_walk(g: &Digraph, walk: &[usize]) -> Result<u64, OracleError> {
    if walk.first() != Some(&g.start) {
        return Err(OracleError::CertificationFailure("walk does not begin at the start vertex".into()));
    }
    let mut seen = vec![false; g.n];
    let mut length = 0;
    for &v in walk {
        if v >= g.n {
            return Err(OracleError::CertificationFailure(format!("walk leaves the graph at {v}")));
        }
        seen[v] = true;
    }
    for pair in walk.windows(2) {
        let w = g
            .edges
            .iter()
            .filter(|e| e.0 == pair[0] && e.1 == pair[1])
            .map(|e| e.2)
            .min()
            .ok_or_else(|| OracleError::CertificationFailure(format!("no edge {} -> {}", pair[0], pair[1])))?;
        length += u64::from(w);
    }
    if let Some(v) = seen.iter().position(|&s| !s) {
        return Err(OracleError::CertificationFailure(format!("walk misses vertex {v}")));
    }
    Ok(length)
}

/// Random digraph with every vertex reachable from vertex 0: a random
/// Hamiltonian cycle plus each remaining ordered pair with probability
/// `extra`. Weights are uniform in `1..=max_weight`.
pub fn random_strongly_connected(n: usize, max_weight: u32, extra: f64, seed: u64) -> Result<Digraph, OracleError> {
    if n == 0 || max_weight == 0 {
        return Err(OracleError::InvalidGraph("need n >= 1 and max_weight >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cycle: Vec<usize> = (0..n).collect();
    cycle[1..].shuffle(&mut rng);
    let mut edges = Vec::new();
    if n > 1 {
        for i in 0..n {
            edges.push((cycle[i], cycle[(i + 1) % n], rng.random_range(1..=max_weight)));
        }
    }
    for u in 0..n {
        for v in 0..n {
            if u != v && !edges.iter().any(|e| e.0 == u && e.1 == v) && rng.random_bool(extra) {
                edges.push((u, v, rng.random_range(1..=max_weight)));
            }
        }
    }
    Digraph::new(n, 0, edges)
}

/// A covering-walk instance recast as a Level-3 teaching problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub problem: TeachingProblem,
    /// Hop diameter from the start vertex.
    pub diameter: usize,
    /// Horizon prescribed by the construction, `max(D^2, 1)`.
    pub nominal_horizon: usize,
}

/// Builds the two-action teaching problem whose Level-3 teaching length
/// tracks the graph's covering walk. Both actions share each vertex's
/// out-neighbours (uniformly); `Q0` prefers action 0 and the target is
/// action 1 everywhere. Vertices without out-edges get a self-loop.
pub fn reduce_atsp_to_teaching(g: &Digraph, epsilon: f64) -> Result<Reduction, OracleError> {
    if g.n > HELD_KARP_MAX {
        return Err(OracleError::TooLarge { n: g.n, max: HELD_KARP_MAX });
    }
    if g.edges.iter().any(|e| e.2 != 1) {
        return Err(OracleError::InvalidGraph("reduction needs unit edge weights".into()));
    }
    let d = g.diameter_from_start();
    let horizon = (d * d).max(1);
    let rows: Vec<Vec<(State, f64)>> = (0..g.n)
        .flat_map(|u| {
            let mut out = g.out_neighbors(u);
            if out.is_empty() {
                out.push(u);
            }
            let p = 1.0 / out.len() as f64;
            let row: Vec<(State, f64)> = out.into_iter().map(|v| (v, p)).collect();
            [row.clone(), row]
        })
        .collect();
    let mut mu0 = vec![0.0; g.n];
    mu0[g.start] = 1.0;
    let mdp = Mdp::new(g.n, 2, rows, mu0, horizon, None)?;
    let q0 = QTable::from_rows(vec![vec![1.0, 0.0]; g.n]).map_err(TeachError::from)?;
    let spec =
        LearnerSpec::new(epsilon, DEFAULT_ALPHA, DEFAULT_GAMMA, UpdateRule::StandardQ).map_err(TeachError::from)?;
    let problem = TeachingProblem::new(mdp, spec, q0, vec![1; g.n])?;
    Ok(Reduction { problem, diameter: d, nominal_horizon: horizon })
}

/// Level-3 teacher that drives the learner along a fixed walk, promoting
/// the target action when played and demoting the other one otherwise.
#[derive(Debug, Clone)]
pub struct WalkReplayTeacher {
    walk: Vec<State>,
    pos: usize,
}

impl WalkReplayTeacher {
    pub fn new(walk: Vec<State>) -> Self {
        Self { walk, pos: 0 }
    }
}

impl Teacher for WalkReplayTeacher {
    fn level(&self) -> Level {
        Level::Three
    }

    fn initial_state(&mut self, _problem: &TeachingProblem, _q: &QTable, _rng: &mut dyn RngCore) -> Option<State> {
        self.pos = 0;
        self.walk.first().copied()
    }

    fn decide(&mut self, ctx: &StepContext<'_>, _rng: &mut dyn RngCore) -> Result<TeacherDecision, TeachError> {
        let goal = if ctx.a == ctx.problem.target[ctx.s] { Goal::Promote } else { Goal::Demote };
        let next = match self.walk.get(self.pos + 1) {
            Some(&v) => v,
            None => ctx.problem.mdp.transitions(ctx.s, ctx.a)[0].0,
        };
        self.pos += 1;
        Ok(TeacherDecision {
            override_action: None,
            goal,
            next_state: Some(next),
            branch: Branch::Replay,
            subtask: Some(self.pos - 1),
        })
    }
}

/// Certified teaching length of a reduction instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetalCertificate {
    /// Covering-walk length in edges.
    pub length: u64,
    /// Steps of the certified teaching session (states visited, `length + 1`).
    pub session_length: u64,
    pub walk: Vec<usize>,
    pub certified_epsilons: Vec<f64>,
    /// Horizon used for certification.
    pub horizon: usize,
    pub nominal_horizon: usize,
    /// True when the nominal horizon would cut the walk with an episode reset.
    pub horizon_raised: bool,
}

pub const CERTIFY_EPSILONS: [f64; 3] = [0.0, 0.3, 0.7];

/// Solves the covering walk for `g`, then replays it as a Level-3 teaching
/// session on the reduced instance at every `epsilon`, requiring exactly one
/// step per walk vertex.
pub fn exact_metal_reduction_instance(
    g: &Digraph,
    epsilons: &[f64],
    seed: u64,
) -> Result<MetalCertificate, OracleError> {
    let cover = atsp_held_karp(g)?;
    check_walk(g, &cover.walk)?;
    let expected = cover.walk.len() as u64;
    let mut horizon = 0;
    let mut nominal = 0;
    for &eps in epsilons {
        let red = reduce_atsp_to_teaching(g, eps)?;
        nominal = red.nominal_horizon;
        horizon = nominal.max(cover.walk.len());
        let problem = TeachingProblem { mdp: red.problem.mdp.with_horizon(horizon)?, ..red.problem };
        let mut teacher = WalkReplayTeacher::new(cover.walk.clone());
        let config = SessionConfig::new(Level::Three).with_budget(expected + 1);
        let res = run_session_with(&problem, &mut teacher, &config, seed)?;
        if !res.terminated || res.total_steps != expected {
            return Err(OracleError::CertificationFailure(format!(
                "replay at epsilon {eps} took {} steps (terminated: {}), expected {expected}",
                res.total_steps, res.terminated
            )));
        }
    }
    Ok(MetalCertificate {
        length: cover.length,
        session_length: expected,
        walk: cover.walk,
        certified_epsilons: epsilons.to_vec(),
        horizon,
        nominal_horizon: nominal,
        horizon_raised: horizon > nominal,
    })
}

/// Fewest steps any Level-3 teacher needs on a reduction instance within one
/// episode, by breadth-first search over (current state, untaught set).
/// Each visit teaches its state, so the learner collapses to one bit per state.
pub fn exhaustive_min_session_length(problem: &TeachingProblem) -> Result<u64, OracleError> {
    let mdp = &problem.mdp;
    let n = mdp.num_states();
    if n > EXHAUSTIVE_MAX {
        return Err(OracleError::TooLarge { n, max: EXHAUSTIVE_MAX });
    }
    let all: usize = problem.untaught_states().into_iter().fold(0, |m, s| m | (1 << s));
    if all == 0 {
        return Ok(0);
    }
    let mut seen = vec![false; n << n];
    let mut queue = VecDeque::new();
    for s0 in mdp.initial_support() {
        seen[(s0 << n) | all] = true;
        queue.push_back((s0, all, 0u64));
    }
    while let Some((v, mask, steps)) = queue.pop_front() {
        let left = mask & !(1 << v);
        if left == 0 {
            return Ok(steps + 1);
        }
        for a in 0..mdp.num_actions() {
            for u in mdp.support(v, a) {
                let key = (u << n) | left;
                if !seen[key] {
                    seen[key] = true;
                    queue.push_back((u, left, steps + 1));
                }
            }
        }
    }
    Err(OracleError::CertificationFailure("some state can never be visited".into()))
}
