//! JSON file formats for MDPs, Q-tables and policies.
//!
//! Floats are written in shortest round-trip form, so save/load is exact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Action, Mdp, MdpError, State};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MdpFile {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    mu0: Vec<f64>,
    transitions: Vec<TransitionRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_reward: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRow {
    s: State,
    a: Action,
    next: Vec<(State, f64)>,
}

/// Parses JSON, reporting the line/column and the field path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, MdpError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let field = err.path().to_string();
        let inner = err.into_inner();
        MdpError::Parse { line: inner.line(), column: inner.column(), field, message: inner.to_string() }
    })
}

pub fn mdp_to_json(mdp: &Mdp) -> String {
    let (s_n, a_n) = (mdp.num_states(), mdp.num_actions());
    let file = MdpFile {
        num_states: s_n,
        num_actions: a_n,
        horizon: mdp.horizon(),
        mu0: mdp.initial_dist().to_vec(),
        transitions: (0..s_n)
            .flat_map(|s| (0..a_n).map(move |a| (s, a)))
            .map(|(s, a)| TransitionRow { s, a, next: mdp.transitions(s, a).to_vec() })
            .collect(),
        base_reward: mdp.base_reward_table().map(|r| r.chunks(a_n).map(<[f64]>::to_vec).collect()),
    };
    serde_json::to_string_pretty(&file).expect("MDP serialisation cannot fail")
}

pub fn mdp_from_json(text: &str) -> Result<Mdp, MdpError> {
    let file: MdpFile = parse_json(text)?;
    let (s_n, a_n) = (file.num_states, file.num_actions);
    if s_n == 0 || a_n == 0 {
        return Err(MdpError::InvariantViolation(format!(
            "num_states and num_actions must be positive, got {s_n} and {a_n}"
        )));
    }
    let mut rows: Vec<Option<Vec<(State, f64)>>> = vec![None; s_n * a_n];
    for (i, row) in file.transitions.into_iter().enumerate() {
        if row.s >= s_n || row.a >= a_n {
            return Err(MdpError::InvariantViolation(format!(
                "transitions[{i}] refers to (s={}, a={}) out of range",
                row.s, row.a
            )));
        }
        let slot = &mut rows[row.s * a_n + row.a];
        if slot.is_some() {
            return Err(MdpError::InvariantViolation(format!("transitions[{i}] repeats (s={}, a={})", row.s, row.a)));
        }
        *slot = Some(row.next);
    }
    let rows = rows
        .into_iter()
        .enumerate()
        .map(|(idx, r)| {
            r.ok_or_else(|| {
                MdpError::InvariantViolation(format!("missing transitions for (s={}, a={})", idx / a_n, idx % a_n))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let base_reward = match file.base_reward {
        None => None,
        Some(table) => {
            if table.len() != s_n || table.iter().any(|r| r.len() != a_n) {
                return Err(MdpError::InvariantViolation(format!("base_reward must be a {s_n} x {a_n} matrix")));
            }
            Some(table.into_iter().flatten().collect())
        }
    };
    Mdp::new(s_n, a_n, rows, file.mu0, file.horizon, base_reward)
}

pub fn save_mdp(mdp: &Mdp, path: impl AsRef<Path>) -> Result<(), MdpError> {
    fs::write(path, mdp_to_json(mdp))?;
    Ok(())
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<Mdp, MdpError> {
    mdp_from_json(&fs::read_to_string(path)?)
}

/// Q-table file: `S` rows of `A` numbers.
pub fn save_matrix(rows: &[Vec<f64>], path: impl AsRef<Path>) -> Result<(), MdpError> {
    fs::write(path, serde_json::to_string(rows).expect("matrix serialisation cannot fail"))?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>, MdpError> {
    parse_json(&fs::read_to_string(path)?)
}

/// Policy file: one action index per state.
pub fn save_policy(policy: &[Action], path: impl AsRef<Path>) -> Result<(), MdpError> {
    fs::write(path, serde_json::to_string(policy).expect("policy serialisation cannot fail"))?;
    Ok(())
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<Vec<Action>, MdpError> {
    parse_json(&fs::read_to_string(path)?)
}
