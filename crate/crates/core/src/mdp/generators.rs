//! Instance families: the peacock and peacock-tree hard instances, a
//! deterministic chain, and seeded random sparse MDPs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Mdp, MdpError, State, PROB_TOLERANCE};

fn point_mass(num_states: usize, s: State) -> Vec<f64> {
    let mut mu = vec![0.0; num_states];
    mu[s] = 1.0;
    mu
}

/// `p` towards `next`, the rest towards `sink`.
fn leaky(next: State, sink: State, p: f64) -> Vec<(State, f64)> {
    if p >= 1.0 {
        vec![(next, 1.0)]
    } else {
        vec![(next, p), (sink, 1.0 - p)]
    }
}

/// Peacock MDP: a neck of `d` states, a star of `s - d - 1` tail states and
/// one absorbing state (the last index).
///
/// Action 0 on the neck moves right with probability `p`; on the last neck
/// state it fans out to every tail state with probability `p` each. All
/// other actions, and everything on the tail, fall into the absorbing state.
pub fn make_peacock(s: usize, d: usize, a: usize, h: usize, p: f64) -> Result<Mdp, MdpError> {
    if d < 1 {
        return Err(MdpError::InvalidShape(format!("peacock needs D >= 1, got {d}")));
    }
    if s < d + 2 {
        return Err(MdpError::InvalidShape(format!("peacock needs S >= D + 2, got S={s}, D={d}")));
    }
    if a < 2 {
        return Err(MdpError::InvalidShape(format!("peacock needs A >= 2, got {a}")));
    }
    if h < d + 1 {
        return Err(MdpError::InvalidShape(format!("peacock needs H >= D + 1, got H={h}, D={d}")));
    }
    let tails = s - d - 1;
    if !(p > 0.0 && p * tails as f64 <= 1.0 + PROB_TOLERANCE) {
        return Err(MdpError::InvalidShape(format!(
            "peacock needs 0 < p <= 1/(S-D-1) = {}, got {p}",
            1.0 / tails as f64
        )));
    }
    let sink = s - 1;
    let mut rows = Vec::with_capacity(s * a);
    for state in 0..s {
        for action in 0..a {
            let row = if state < d && action == 0 {
                if state + 1 < d {
                    leaky(state + 1, sink, p)
                } else {
                    let mut row: Vec<(State, f64)> = (d..d + tails).map(|t| (t, p)).collect();
                    let rest = 1.0 - p * tails as f64;
                    if rest > PROB_TOLERANCE {
                        row.push((sink, rest));
                    } else if let Some(last) = row.last_mut() {
                        // absorb rounding so the row sums to one
                        last.1 += rest;
                    }
                    row
                }
            } else {
                vec![(sink, 1.0)]
            };
            rows.push(row);
        }
    }
    Mdp::new(s, a, rows, point_mass(s, 0), h, None)
}

/// Index layout of a peacock-tree MDP with diameter `D` and tree depth `d`.
///
/// States `0..chain_len` are the chain, followed by the binary tree in heap
/// order (node `j` has children `2j+1` via action 0 and `2j+2` via action 1),
/// and the absorbing state last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeacockTreeLayout {
    pub diameter: usize,
    pub tree_depth: usize,
}

impl PeacockTreeLayout {
    pub fn new(diameter: usize, tree_depth: usize) -> Result<Self, MdpError> {
        if tree_depth >= diameter {
            return Err(MdpError::InvalidShape(format!(
                "peacock tree needs tree depth d < D, got d={tree_depth}, D={diameter}"
            )));
        }
        if tree_depth >= 20 {
            return Err(MdpError::InvalidShape(format!("tree depth {tree_depth} is too large")));
        }
        Ok(Self { diameter, tree_depth })
    }

    pub fn chain_len(&self) -> usize {
        self.diameter - self.tree_depth
    }

    pub fn tree_nodes(&self) -> usize {
        (1usize << (self.tree_depth + 1)) - 1
    }

    /// `2^(d+1) + (D - d)`.
    pub fn num_states(&self) -> usize {
        self.chain_len() + self.tree_nodes() + 1
    }

    pub fn absorbing(&self) -> State {
        self.num_states() - 1
    }

    pub fn tree_root(&self) -> State {
        self.chain_len()
    }

    pub fn leaves(&self) -> Vec<State> {
        let first_leaf = (1usize << self.tree_depth) - 1;
        (first_leaf..self.tree_nodes()).map(|j| self.chain_len() + j).collect()
    }

    pub fn is_leaf(&self, s: State) -> bool {
        let first_leaf = self.chain_len() + (1usize << self.tree_depth) - 1;
        s >= first_leaf && s < self.absorbing()
    }
}

/// Smallest tree depth `d < D` with `2^d + (D-d+1) <= S <= 2^(d+1) + (D-d)`.
pub fn peacock_tree_depth_for(s: usize, d: usize) -> Option<usize> {
    (0..d.min(20)).find(|&depth| {
        let lo = (1usize << depth) + (d - depth + 1);
        let hi = (1usize << (depth + 1)) + (d - depth);
        lo <= s && s <= hi
    })
}

/// Peacock tree for a requested state count. The tree is completed to a full
/// binary tree, so the result may have more states than `s`; read the actual
/// count from [`Mdp::num_states`].
pub fn make_peacock_tree(s: usize, d: usize, a: usize, h: usize, p_min: f64) -> Result<Mdp, MdpError> {
    let depth = peacock_tree_depth_for(s, d)
        .ok_or_else(|| MdpError::InvalidShape(format!("no binary-tree depth fits S={s} with D={d}")))?;
    make_peacock_tree_with_depth(d, depth, a, h, p_min)
}

/// Peacock tree with an explicit binary-tree depth.
pub fn make_peacock_tree_with_depth(
    d: usize,
    tree_depth: usize,
    a: usize,
    h: usize,
    p_min: f64,
) -> Result<Mdp, MdpError> {
    let layout = PeacockTreeLayout::new(d, tree_depth)?;
    if a < 2 {
        return Err(MdpError::InvalidShape(format!("peacock tree needs A >= 2, got {a}")));
    }
    if h < d + 1 {
        return Err(MdpError::InvalidShape(format!("peacock tree needs H >= D + 1, got H={h}, D={d}")));
    }
    if !(p_min > 0.0 && p_min <= 1.0) {
        return Err(MdpError::InvalidShape(format!("p_min must be in (0, 1], got {p_min}")));
    }
    let n = layout.num_states();
    let sink = layout.absorbing();
    let chain = layout.chain_len();
    let mut rows = Vec::with_capacity(n * a);
    for state in 0..n {
        for action in 0..a {
            let row = if state < chain {
                if action == 0 {
                    leaky(state + 1, sink, p_min)
                } else {
                    vec![(sink, 1.0)]
                }
            } else if state < sink && !layout.is_leaf(state) {
                let j = state - chain;
                match action {
                    0 => leaky(chain + 2 * j + 1, sink, p_min),
                    1 => leaky(chain + 2 * j + 2, sink, p_min),
                    _ => vec![(sink, 1.0)],
                }
            } else {
                vec![(sink, 1.0)]
            };
            rows.push(row);
        }
    }
    Mdp::new(n, a, rows, point_mass(n, 0), h, None)
}

/// Deterministic chain `0 -> 1 -> ... -> S-1`: action 0 advances (the last
/// state loops), every other action stays put.
pub fn make_chain(s: usize, a: usize, h: usize) -> Result<Mdp, MdpError> {
    if s == 0 {
        return Err(MdpError::InvalidShape("chain needs S >= 1".into()));
    }
    let mut rows = Vec::with_capacity(s * a);
    for state in 0..s {
        for action in 0..a {
            let next = if action == 0 { (state + 1).min(s - 1) } else { state };
            rows.push(vec![(next, 1.0)]);
        }
    }
    Mdp::new(s, a, rows, point_mass(s, 0), h, None)
}

/// Seeded random sparse MDP with every state reachable from state 0.
///
/// Each `(s, a)` includes each next state independently with probability
/// `density` (at least one), plus a random spanning arborescence rooted at 0.
/// Probabilities are random positive weights, normalised.
pub fn make_random_sparse(s: usize, a: usize, h: usize, density: f64, seed: u64) -> Result<Mdp, MdpError> {
    if s == 0 {
        return Err(MdpError::InvalidShape("random MDP needs S >= 1".into()));
    }
    if a < 2 {
        return Err(MdpError::InvalidShape(format!("random MDP needs A >= 2, got {a}")));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(MdpError::InvalidShape(format!("density must be in [0, 1], got {density}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut supports: Vec<Vec<State>> =
        (0..s * a).map(|_| (0..s).filter(|_| rng.random_bool(density)).collect()).collect();
    let mut order: Vec<State> = (1..s).collect();
    order.shuffle(&mut rng);
    let mut placed = vec![0];
    for child in order {
        let parent = placed[rng.random_range(0..placed.len())];
        let action = rng.random_range(0..a);
        supports[parent * a + action].push(child);
        placed.push(child);
    }
    let rows = supports
        .into_iter()
        .map(|mut sup| {
            if sup.is_empty() {
                sup.push(rng.random_range(0..s));
            }
            sup.sort_unstable();
            sup.dedup();
            let weights: Vec<f64> = sup.iter().map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            sup.into_iter().zip(weights).map(|(n, w)| (n, w / total)).collect()
        })
        .collect();
    Mdp::new(s, a, rows, point_mass(s, 0), h, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peacock_shape() {
        let m = make_peacock(8, 3, 3, 6, 0.2).unwrap();
        assert_eq!(m.num_states(), 8);
        assert_eq!(m.diameter().unwrap(), 3);
        // neck
        assert_eq!(m.transitions(0, 0), &[(1, 0.2), (7, 0.8)]);
        assert_eq!(m.transitions(1, 0), &[(2, 0.2), (7, 0.8)]);
        assert_eq!(m.transitions(0, 1), &[(7, 1.0)]);
        // fan-out to the four tail states
        let fan = m.transitions(2, 0);
        assert_eq!(fan.len(), 5);
        for t in 3..7 {
            assert_eq!(m.prob(2, 0, t), 0.2);
        }
        assert!((m.prob(2, 0, 7) - 0.2).abs() < 1e-12);
        for t in 3..8 {
            for a in 0..3 {
                assert_eq!(m.transitions(t, a), &[(7, 1.0)]);
            }
        }
    }

    #[test]
    fn peacock_pmin_is_p() {
        let m = make_peacock(8, 3, 3, 6, 0.1).unwrap();
        assert_eq!(m.min_transition_prob(), 0.1);
    }

    #[test]
    fn degenerate_peacock() {
        let m = make_peacock(3, 1, 2, 2, 1.0).unwrap();
        assert_eq!(m.transitions(0, 0), &[(1, 1.0)]);
        assert_eq!(m.transitions(0, 1), &[(2, 1.0)]);
        assert_eq!(m.transitions(1, 0), &[(2, 1.0)]);
        assert_eq!(m.transitions(2, 1), &[(2, 1.0)]);
        assert_eq!(m.diameter().unwrap(), 1);
    }

    #[test]
    fn peacock_rejects_bad_shapes() {
        assert!(make_peacock(4, 3, 3, 6, 0.2).is_err());
        assert!(make_peacock(8, 3, 1, 6, 0.2).is_err());
        assert!(make_peacock(8, 3, 3, 3, 0.2).is_err());
        assert!(make_peacock(8, 3, 3, 6, 0.3).is_err());
        assert!(make_peacock(8, 3, 3, 6, 0.0).is_err());
    }

    #[test]
    fn peacock_tree_counts() {
        let m = make_peacock_tree_with_depth(3, 2, 2, 8, 0.5).unwrap();
        assert_eq!(m.num_states(), 9);
        assert_eq!(m.diameter().unwrap(), 3);
        let layout = PeacockTreeLayout::new(3, 2).unwrap();
        assert_eq!(layout.leaves(), vec![4, 5, 6, 7]);
        for leaf in layout.leaves() {
            for a in 0..2 {
                assert_eq!(m.transitions(leaf, a), &[(8, 1.0)]);
            }
        }
        assert_eq!(m.transitions(1, 0), &[(2, 0.5), (8, 0.5)]);
        assert_eq!(m.transitions(1, 1), &[(3, 0.5), (8, 0.5)]);
    }

    #[test]
    fn peacock_tree_from_state_count() {
        assert_eq!(peacock_tree_depth_for(9, 3), Some(2));
        // 7 states with D = 3 rounds up to the d = 2 tree
        assert_eq!(peacock_tree_depth_for(7, 3), Some(2));
        let m = make_peacock_tree(7, 3, 2, 8, 0.5).unwrap();
        assert_eq!(m.num_states(), 9);
        assert!(make_peacock_tree(100, 3, 2, 8, 0.5).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let a = make_random_sparse(10, 3, 12, 0.3, 7).unwrap();
        let b = make_random_sparse(10, 3, 12, 0.3, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.diameter().is_ok());
    }
}
