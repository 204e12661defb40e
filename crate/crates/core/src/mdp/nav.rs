//! Breadth-first navigation trees and the post-order subtask schedule.

use std::collections::VecDeque;

use super::{Action, Mdp, MdpError, State};

/// A minimum-depth BFS tree over the support digraph together with the
/// post-order teaching schedule derived from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NavPlan {
    root: State,
    parent_edge: Vec<Option<(State, Action)>>,
    depth: Vec<usize>,
    children: Vec<Vec<State>>,
    subtask_order: Vec<State>,
}

struct BfsTree {
    parent_edge: Vec<Option<(State, Action)>>,
    depth: Vec<Option<usize>>,
}

fn bfs_tree(mdp: &Mdp, root: State) -> BfsTree {
    let n = mdp.num_states();
    let mut parent_edge = vec![None; n];
    let mut depth = vec![None; n];
    depth[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        let du = depth[u].unwrap_or(0);
        for a in 0..mdp.num_actions() {
            for v in mdp.support(u, a) {
                if depth[v].is_none() {
                    depth[v] = Some(du + 1);
                    parent_edge[v] = Some((u, a));
                    queue.push_back(v);
                }
            }
        }
    }
    BfsTree { parent_edge, depth }
}

/// Picks the supported initial state whose BFS tree is shallowest (lowest
/// index on ties) and schedules states in post-order.
pub fn build_nav_plan(mdp: &Mdp) -> Result<NavPlan, MdpError> {
    // reports the first state unreachable from every start
    mdp.diameter()?;

    let mut best: Option<(usize, State, BfsTree)> = None;
    for start in mdp.initial_support() {
        let tree = bfs_tree(mdp, start);
        let Some(tree_depth) = tree.depth.iter().copied().collect::<Option<Vec<_>>>() else {
            continue;
        };
        let tree_depth = tree_depth.into_iter().max().unwrap_or(0);
        if best.as_ref().is_none_or(|(d, _, _)| tree_depth < *d) {
            best = Some((tree_depth, start, tree));
        }
    }
    let Some((_, root, tree)) = best else {
        // no single start reaches everything; name a state the best start misses
        let start = mdp.initial_support().next().unwrap_or(0);
        let tree = bfs_tree(mdp, start);
        let missing = tree.depth.iter().position(Option::is_none).unwrap_or(0);
        return Err(MdpError::UnreachableState(missing));
    };

    let n = mdp.num_states();
    let depth: Vec<usize> = tree.depth.into_iter().map(|d| d.unwrap_or(0)).collect();
    let mut children = vec![Vec::new(); n];
    for (s, edge) in tree.parent_edge.iter().enumerate() {
        if let Some((p, _)) = edge {
            children[*p].push(s);
        }
    }

    // iterative post-order DFS, children in ascending index
    let mut subtask_order = Vec::with_capacity(n);
    let mut stack = vec![(root, 0usize)];
    while let Some((node, next_child)) = stack.pop() {
        if let Some(&child) = children[node].get(next_child) {
            stack.push((node, next_child + 1));
            stack.push((child, 0));
        } else {
            subtask_order.push(node);
        }
    }

    Ok(NavPlan { root, parent_edge: tree.parent_edge, depth, children, subtask_order })
}

impl NavPlan {
    pub fn root(&self) -> State {
        self.root
    }

    pub fn parent_edge(&self, s: State) -> Option<(State, Action)> {
        self.parent_edge[s]
    }

    pub fn depth(&self, s: State) -> usize {
        self.depth[s]
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn children(&self, s: State) -> &[State] {
        &self.children[s]
    }

    pub fn subtask_order(&self) -> &[State] {
        &self.subtask_order
    }

    pub fn num_states(&self) -> usize {
        self.depth.len()
    }

    /// Tree edges `(state, action)` from the root down to `s`.
    pub fn ancestral_path(&self, s: State) -> Vec<(State, Action)> {
        let mut path = Vec::with_capacity(self.depth[s]);
        let mut cur = s;
        while let Some((p, a)) = self.parent_edge[cur] {
            path.push((p, a));
            cur = p;
        }
        path.reverse();
        path
    }

    /// States on the root-to-`s` path, both ends included.
    pub fn path_states(&self, s: State) -> Vec<State> {
        let mut states: Vec<State> = self.ancestral_path(s).into_iter().map(|(p, _)| p).collect();
        states.push(s);
        states
    }

    /// True when `ancestor` lies on the root-to-`s` path (inclusive).
    pub fn is_ancestor(&self, ancestor: State, s: State) -> bool {
        let mut cur = s;
        loop {
            if cur == ancestor {
                return true;
            }
            match self.parent_edge[cur] {
                Some((p, _)) => cur = p,
                None => return false,
            }
        }
    }

    /// Checks that no scheduled state is an interior node of a later
    /// subtask's ancestral path. Returns the offending `(earlier, later)`
    /// pair otherwise.
    pub fn check_schedule(&self) -> Result<(), (State, State)> {
        let mut position = vec![0; self.num_states()];
        for (i, &s) in self.subtask_order.iter().enumerate() {
            position[s] = i;
        }
        for (i, &later) in self.subtask_order.iter().enumerate() {
            for (p, _) in self.ancestral_path(later) {
                if position[p] < i {
                    return Err((p, later));
                }
            }
        }
        Ok(())
    }
}
