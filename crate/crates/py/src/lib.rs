//! Python bindings: MDP generators, teaching problems, sessions, trials,
//! analytic bounds and covering-walk oracles.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use teachdim_core::analytic::{expected_visits_closed, tight_theta_level3 as tight_theta};
use teachdim_core::harness::{self, write_trace, SessionConfig};
use teachdim_core::learner::LearnerSpec;
use teachdim_core::mdp::{self, io};
use teachdim_core::oracle::{self, Digraph, CERTIFY_EPSILONS};
use teachdim_core::teacher::adversarial_q0;
use teachdim_core::{BoundInputs, Level, QTable, TeachingProblem, UpdateRule};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn level(n: u8) -> PyResult<Level> {
    Level::try_from(n).map_err(err)
}

/// Episodic tabular MDP.
#[pyclass(name = "Mdp", module = "teachdim", frozen)]
struct PyMdp {
    inner: mdp::Mdp,
}

#[pymethods]
impl PyMdp {
    #[staticmethod]
    #[pyo3(signature = (s, d, a, h, p))]
    fn peacock(s: usize, d: usize, a: usize, h: usize, p: f64) -> PyResult<Self> {
        Ok(Self { inner: mdp::make_peacock(s, d, a, h, p).map_err(err)? })
    }

    #[staticmethod]
    fn peacock_tree(s: usize, d: usize, a: usize, h: usize, p_min: f64) -> PyResult<Self> {
        Ok(Self { inner: mdp::make_peacock_tree(s, d, a, h, p_min).map_err(err)? })
    }

    #[staticmethod]
    fn chain(s: usize, a: usize, h: usize) -> PyResult<Self> {
        Ok(Self { inner: mdp::make_chain(s, a, h).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (s, a, h, density, seed=0))]
    fn random(s: usize, a: usize, h: usize, density: f64, seed: u64) -> PyResult<Self> {
        Ok(Self { inner: mdp::make_random_sparse(s, a, h, density, seed).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: io::mdp_from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        io::mdp_to_json(&self.inner)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn diameter(&self) -> PyResult<usize> {
        self.inner.diameter().map_err(err)
    }

    fn min_transition_prob(&self) -> f64 {
        self.inner.min_transition_prob()
    }

    /// `(next_state, probability)` pairs for one state-action pair.
    fn transitions(&self, s: usize, a: usize) -> PyResult<Vec<(usize, f64)>> {
        if s >= self.inner.num_states() || a >= self.inner.num_actions() {
            return Err(PyValueError::new_err(format!("({s}, {a}) out of range")));
        }
        Ok(self.inner.transitions(s, a).to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Mdp(S={}, A={}, H={})", self.inner.num_states(), self.inner.num_actions(), self.inner.horizon())
    }
}

/// MDP, learner, initial Q-table and target policy.
#[pyclass(name = "Problem", module = "teachdim", frozen)]
struct PyProblem {
    inner: TeachingProblem,
}

#[pymethods]
impl PyProblem {
    /// `q0` defaults to the adversarial table that ranks the target last.
    #[new]
    #[pyo3(signature = (mdp, target, epsilon=0.1, alpha=0.5, gamma=0.9, rule="q", q0=None))]
    fn new(
        mdp: &PyMdp,
        target: Vec<usize>,
        epsilon: f64,
        alpha: f64,
        gamma: f64,
        rule: &str,
        q0: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let rule: UpdateRule = rule.parse().map_err(err)?;
        let spec = LearnerSpec::new(epsilon, alpha, gamma, rule).map_err(err)?;
        let m = mdp.inner.clone();
        if target.len() != m.num_states() {
            return Err(PyValueError::new_err(format!(
                "target has {} entries, MDP has {} states",
                target.len(),
                m.num_states()
            )));
        }
        let q0 = match q0 {
            Some(rows) => QTable::from_rows(rows).map_err(err)?,
            None => adversarial_q0(&m, &target),
        };
        Ok(Self { inner: TeachingProblem::new(m, spec, q0, target).map_err(err)? })
    }

    #[getter]
    fn mdp(&self) -> PyMdp {
        PyMdp { inner: self.inner.mdp.clone() }
    }

    #[getter]
    fn q0(&self) -> Vec<Vec<f64>> {
        self.inner.q0.to_rows()
    }

    #[getter]
    fn target(&self) -> Vec<usize> {
        self.inner.target.clone()
    }

    fn untaught_states(&self) -> Vec<usize> {
        self.inner.untaught_states()
    }
}

#[pyclass(name = "SessionResult", module = "teachdim", frozen, get_all)]
struct PySessionResult {
    total_steps: u64,
    total_episodes: u64,
    visits: Vec<u64>,
    terminated: bool,
    final_q: Vec<Vec<f64>>,
    /// JSON lines, one per step, when a trace was requested.
    trace: Option<String>,
}

#[pyclass(name = "TrialStats", module = "teachdim", frozen, get_all)]
struct PyTrialStats {
    trials: u64,
    completed: u64,
    failures: u64,
    mean_steps: f64,
    std_error: f64,
    ci95_low: f64,
    ci95_high: f64,
}

#[pyclass(name = "Certificate", module = "teachdim", frozen, get_all)]
struct PyCertificate {
    length: u64,
    session_length: u64,
    walk: Vec<usize>,
    certified_epsilons: Vec<f64>,
    horizon: usize,
    nominal_horizon: usize,
    horizon_raised: bool,
}

fn session_config(lv: u8, delta: f64, budget: Option<u64>, trace: bool) -> PyResult<SessionConfig> {
    let mut cfg = SessionConfig::new(level(lv)?).with_delta(delta);
    cfg.step_budget = budget;
    cfg.record_trace = trace;
    Ok(cfg)
}

/// Runs one teaching session. The GIL is released while it runs.
#[pyfunction]
#[pyo3(signature = (problem, level, seed=0, delta=1.0, budget=None, trace=false))]
fn run_session(
    py: Python<'_>,
    problem: &PyProblem,
    level: u8,
    seed: u64,
    delta: f64,
    budget: Option<u64>,
    trace: bool,
) -> PyResult<PySessionResult> {
    let cfg = session_config(level, delta, budget, trace)?;
    let res = py.detach(|| harness::run_session(&problem.inner, &cfg, seed)).map_err(err)?;
    let trace = match &res.trace {
        Some(t) => {
            let mut buf = Vec::new();
            write_trace(&mut buf, t).map_err(err)?;
            Some(String::from_utf8(buf).map_err(err)?)
        }
        None => None,
    };
    Ok(PySessionResult {
        total_steps: res.total_steps,
        total_episodes: res.total_episodes,
        visits: res.visits,
        terminated: res.terminated,
        final_q: res.final_q.to_rows(),
        trace,
    })
}

/// Runs `trials` sessions with seeds `base_seed + i` in parallel.
#[pyfunction]
#[pyo3(signature = (problem, level, trials, base_seed=0, delta=1.0, budget=None))]
fn run_trials(
    py: Python<'_>,
    problem: &PyProblem,
    level: u8,
    trials: u64,
    base_seed: u64,
    delta: f64,
    budget: Option<u64>,
) -> PyResult<PyTrialStats> {
    let cfg = session_config(level, delta, budget, false)?;
    let st = py.detach(|| harness::run_trials(&problem.inner, &cfg, trials, base_seed)).map_err(err)?;
    Ok(PyTrialStats {
        trials: st.trials,
        completed: st.completed,
        failures: st.failures,
        mean_steps: st.mean_steps,
        std_error: st.std_error,
        ci95_low: st.ci95_low,
        ci95_high: st.ci95_high,
    })
}

/// `(lower, upper)` teaching-dimension bounds for a teacher level.
#[pyfunction]
#[pyo3(signature = (level, s, a, h, d, epsilon, p_min=1.0))]
fn tdim_bounds(level: u8, s: usize, a: usize, h: usize, d: usize, epsilon: f64, p_min: f64) -> PyResult<(f64, f64)> {
    let lv = self::level(level)?;
    teachdim_core::tdim_bounds(lv, &BoundInputs::new(s, a, h, d, epsilon, p_min)).map_err(err)
}

#[pyfunction]
fn tight_theta_level3(s: usize, a: usize, h: usize, d: usize, epsilon: f64) -> PyResult<(f64, f64)> {
    tight_theta(&BoundInputs::new(s, a, h, d, epsilon, 1.0)).map_err(err)
}

/// Expected visits to teach one state with `n` actions ranked above the target.
#[pyfunction]
fn expected_visits(n: usize, a: usize, epsilon: f64) -> PyResult<f64> {
    expected_visits_closed(n, a, epsilon).map_err(err)
}

/// Minimum covering walk: `(length, walk)`.
#[pyfunction]
#[pyo3(signature = (n, edges, start=0))]
fn atsp(n: usize, edges: Vec<(usize, usize, u32)>, start: usize) -> PyResult<(u64, Vec<usize>)> {
    let g = Digraph::new(n, start, edges).map_err(err)?;
    let w = oracle::atsp_held_karp(&g).map_err(err)?;
    Ok((w.length, w.walk))
}

/// Covering walk of a unit-weight graph, certified by replaying it as a
/// teaching session.
#[pyfunction]
#[pyo3(signature = (n, edges, start=0, seed=0))]
fn metal_certificate(n: usize, edges: Vec<(usize, usize, u32)>, start: usize, seed: u64) -> PyResult<PyCertificate> {
    let g = Digraph::new(n, start, edges).map_err(err)?;
    let c = oracle::exact_metal_reduction_instance(&g, &CERTIFY_EPSILONS, seed).map_err(err)?;
    Ok(PyCertificate {
        length: c.length,
        session_length: c.session_length,
        walk: c.walk,
        certified_epsilons: c.certified_epsilons,
        horizon: c.horizon,
        nominal_horizon: c.nominal_horizon,
        horizon_raised: c.horizon_raised,
    })
}

#[pymodule]
fn teachdim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySessionResult>()?;
    m.add_class::<PyTrialStats>()?;
    m.add_class::<PyCertificate>()?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(run_trials, m)?)?;
    m.add_function(wrap_pyfunction!(tdim_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(tight_theta_level3, m)?)?;
    m.add_function(wrap_pyfunction!(expected_visits, m)?)?;
    m.add_function(wrap_pyfunction!(atsp, m)?)?;
    m.add_function(wrap_pyfunction!(metal_certificate, m)?)?;
    Ok(())
}
