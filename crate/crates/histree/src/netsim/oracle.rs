//! Ground truth derived from a trace: the full history tree by partition
//! refinement, per-agent views cut out of it, and the collective tree of a
//! set of agent states.
//!
//! Nothing here is available to the agents; the oracle sees the whole
//! trace and therefore knows the anonymity of every class.

use std::collections::BTreeMap;

use num_bigint::BigUint;

use super::trace::NetworkTrace;
use crate::view::{
    merge_views_in, CodeCtx, NodeId, RawNode, View, ViewError, ViewKind, ROOT,
};

/// The exact history tree of a trace, with the per-class data only an
/// omniscient observer has.
#[derive(Debug, Clone)]
pub struct OracleTree {
    view: View,
    anonymity: Vec<u64>,
    members: Vec<Vec<usize>>,
    /// class_by_round[t][agent] = node of the agent's class after round t
    class_by_round: Vec<Vec<NodeId>>,
}

impl OracleTree {
    pub fn view(&self) -> &View {
        &self.view
    }

    /// Number of agents the class represents; the root carries all n.
    pub fn anonymity(&self, node: NodeId) -> u64 {
        self.anonymity[node]
    }

    /// Agents inside the class, ascending.
    pub fn members(&self, node: NodeId) -> &[usize] {
        &self.members[node]
    }

    /// Round after which the class exists: its depth (-1 for the root,
    /// which predates all observations).
    pub fn birth_round(&self, node: NodeId) -> i32 {
        self.view.depth(node)
    }

    pub fn up_to(&self) -> usize {
        self.class_by_round.len() - 1
    }

    /// The class of `agent` after round `t`.
    pub fn class_of(&self, agent: usize, t: usize) -> NodeId {
        self.class_by_round[t][agent]
    }

    /// What `agent` itself can know after round `t`: every node with a
    /// path into the agent's class, bottom included. Depths beyond `t`
    /// cannot reach the class, so a deeper oracle tree serves all rounds.
    pub fn agent_view(&self, agent: usize, t: usize) -> View {
        self.view.sub_view(self.class_of(agent, t))
    }
}

/// Partition refinement over the trace, rounds 1..=up_to.
///
/// B_0 groups agents by input; B_t refines B_{t-1} by the multiset of
/// B_{t-1} classes heard over the round-t links, with link multiplicities.
/// Each refinement step appends one level: black edge from the parent
/// class, one red edge per distinct heard class. Every member of a class
/// heard the same multiset (that is what being in the class means), so
/// the red multiplicities are well defined by construction.
pub fn oracle_history_tree(trace: &NetworkTrace, up_to: usize) -> OracleTree {
    let n = trace.n();
    let mut raw = vec![RawNode { parent: None, label: None, red_in: Vec::new() }];
    let mut anonymity = vec![n as u64];
    let mut members: Vec<Vec<usize>> = vec![(0..n).collect()];

    // level 0: distinguishable iff inputs differ
    let mut by_label: BTreeMap<&crate::label::InputLabel, Vec<usize>> = BTreeMap::new();
    for p in 0..n {
        by_label.entry(trace.input(p)).or_default().push(p);
    }
    let mut current = vec![ROOT; n];
    for (label, group) in by_label {
        let id = raw.len();
        raw.push(RawNode {
            parent: Some(ROOT),
            label: Some(label.clone()),
            red_in: Vec::new(),
        });
        anonymity.push(group.len() as u64);
        for &p in &group {
            current[p] = id;
        }
        members.push(group);
    }
    let mut class_by_round = vec![current.clone()];

    for t in 1..=up_to {
        let graph = trace.graph(t);
        // key: (own class, multiset of heard classes)
        let mut groups: BTreeMap<(NodeId, Vec<(NodeId, u64)>), Vec<usize>> = BTreeMap::new();
        for p in 0..n {
            let mut heard: BTreeMap<NodeId, u64> = BTreeMap::new();
            for (q, copies) in graph.neighbor_counts(p) {
                *heard.entry(current[q]).or_insert(0) += copies as u64;
            }
            groups
                .entry((current[p], heard.into_iter().collect()))
                .or_default()
                .push(p);
        }
        let mut next = vec![ROOT; n];
        for ((parent, heard), group) in groups {
            let id = raw.len();
            raw.push(RawNode {
                parent: Some(parent),
                label: raw[parent].label.clone(),
                red_in: heard
                    .into_iter()
                    .map(|(src, m)| (src, BigUint::from(m)))
                    .collect(),
            });
            anonymity.push(group.len() as u64);
            for &p in &group {
                next[p] = id;
            }
            members.push(group);
        }
        current = next;
        class_by_round.push(current.clone());
    }

    let view = View::from_parts(ViewKind::Standard, raw, None)
        .expect("partition refinement yields a well-formed history tree");
    OracleTree { view, anonymity, members, class_by_round }
}

/// The view of one agent after round `t`, straight from the oracle.
pub fn oracle_view(trace: &NetworkTrace, agent: usize, t: usize) -> View {
    oracle_history_tree(trace, t).agent_view(agent, t)
}

/// Match-and-merge of all current states: standard when every state is
/// standard (so it can be compared byte-for-byte against the oracle
/// tree), generalized otherwise.
pub fn collective_tree(states: &[View]) -> Result<View, ViewError> {
    let refs: Vec<&View> = states.iter().collect();
    collective_tree_of(&refs)
}

/// Borrowing variant of [`collective_tree`] for callers that hold the
/// states elsewhere (the round loop rebuilds this every round).
pub fn collective_tree_of(states: &[&View]) -> Result<View, ViewError> {
    collective_tree_with(states, &mut CodeCtx::new())
}

/// [`collective_tree_of`] against a caller-owned code context; successive
/// rounds share most structure, so a persistent context saves recoding it.
pub(crate) fn collective_tree_with(
    states: &[&View],
    ctx: &mut CodeCtx,
) -> Result<View, ViewError> {
    let kind = if states.iter().all(|v| v.kind() == ViewKind::Standard) {
        ViewKind::Standard
    } else {
        ViewKind::Generalized
    };
    merge_views_in(states, kind, ctx)
}
