//! Views: leveled DAGs recording everything an agent can observe.
//!
//! A view has a unique root at depth -1, a black tree (class refinement),
//! and red multi-edges (message flows). Standard views keep every red edge
//! between consecutive depths; generalized views let red edges span levels
//! arbitrarily, as long as black and red edges together form a DAG.
//!
//! Views are immutable: every operation builds a new value. Construction
//! always runs the full well-formedness check, so a `View` in hand is valid
//! by type.

mod chop;
mod code;
mod dot;
mod encode;
mod update;

pub use encode::{decode_view, encode_view, DecodeError};
pub(crate) use encode::decode_view_prefix;
pub use update::merge_views;
pub(crate) use update::merge_views_in;

use crate::label::InputLabel;
use num_bigint::BigUint;
use num_traits::Zero;
use std::collections::VecDeque;
use std::sync::OnceLock;
use thiserror::Error;

pub(crate) use code::{CodeCtx, CodeId};

/// Node reference, an index into the view's node table.
pub type NodeId = usize;

/// Red-edge multiplicity. Arbitrary precision: multiplicities never exceed
/// the agent count in honest runs, but adversarial initial states may encode
/// anything.
pub type Mult = BigUint;

/// The root is always node 0.
pub const ROOT: NodeId = 0;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum ViewKind {
    /// Red edges only between consecutive depths; the shape produced by
    /// lock-step rounds.
    Standard,
    /// Red edges may span any depths (produced when agents skip updates);
    /// black and red edges together must form a DAG.
    Generalized,
}

/// Construction input for [`View::from_parts`]: one node's raw fields.
#[derive(Clone, Debug)]
pub struct RawNode {
    pub parent: Option<NodeId>,
    pub label: Option<InputLabel>,
    /// Inbound red edges as (source, multiplicity) pairs.
    pub red_in: Vec<(NodeId, Mult)>,
}

#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub(crate) parent: Option<NodeId>,
    pub(crate) label: Option<InputLabel>,
    pub(crate) depth: i32,
    /// Sorted by source id; at most one entry per source.
    pub(crate) red_in: Vec<(NodeId, Mult)>,
    /// Sorted ascending by id.
    pub(crate) children: Vec<NodeId>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ViewError {
    #[error("view has no nodes")]
    Empty,
    #[error("node 0 must be the unique root (no parent, no label)")]
    BadRoot,
    #[error("node {0} must have a parent and a label")]
    MissingParentOrLabel(NodeId),
    #[error("node {0} references an unknown node")]
    BadReference(NodeId),
    #[error("black parent chain of node {0} contains a cycle")]
    ParentCycle(NodeId),
    #[error("red edge into node {0} has multiplicity 0")]
    ZeroMultiplicity(NodeId),
    #[error("duplicate red edge source into node {0}")]
    DuplicateRedSource(NodeId),
    #[error("red edge into the root")]
    RedIntoRoot,
    #[error("standard view has a red edge not between consecutive depths")]
    RedDepthSkew,
    #[error("black and red edges contain a directed cycle")]
    CyclicEdges,
    #[error("bottom node has outgoing edges")]
    BottomNotSink,
    #[error("node {0} has no directed path to the bottom")]
    UnreachableBottom(NodeId),
    #[error("nodes {0} and {1} have isomorphic sub-views")]
    DuplicateCode(NodeId, NodeId),
    #[error("operation requires a view with a bottom node")]
    BottomRequired,
    #[error("standard update requires equal heights, got {0} and {1}")]
    HeightMismatch(usize, usize),
    #[error("chop of the root-only view")]
    ChopRootOnly,
    #[error("merged bottom child collides with an existing interior node")]
    BottomCollision,
    #[error("operation requires standard views")]
    StandardRequired,
}

/// An agent's knowledge, or a collective compound of several agents' views
/// (in which case there is no bottom node).
#[derive(Debug)]
pub struct View {
    kind: ViewKind,
    nodes: Vec<Node>,
    bottom: Option<NodeId>,
    /// Topological order over black and red edges, root first.
    topo: Vec<NodeId>,
    canonical: OnceLock<Vec<u8>>,
}

impl Clone for View {
    fn clone(&self) -> Self {
        View {
            kind: self.kind,
            nodes: self.nodes.clone(),
            bottom: self.bottom,
            topo: self.topo.clone(),
            canonical: self.canonical.clone(),
        }
    }
}

impl View {
    /// Root plus one child labeled `input`; the child is the bottom.
    /// This is every agent's canonical starting view.
    pub fn new_leaf(input: &InputLabel) -> View {
        View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(ROOT), label: Some(input.clone()), red_in: vec![] },
            ],
            Some(1),
        )
        .expect("two-node leaf view is always valid")
    }

    /// The single-root view; the root itself is the bottom. Height 0.
    pub fn root_only(kind: ViewKind) -> View {
        View::from_parts(
            kind,
            vec![RawNode { parent: None, label: None, red_in: vec![] }],
            Some(ROOT),
        )
        .expect("root-only view is always valid")
    }

    /// Validates and assembles a view. This is the only constructor, so any
    /// `View` satisfies: unique unlabeled root at node 0, labeled non-root
    /// nodes, acyclic black+red edges, positive deduplicated red
    /// multiplicities, kind-specific depth rules, bottom sink/reachability
    /// when a bottom is present, and pairwise non-isomorphic sub-views.
    pub fn from_parts(
        kind: ViewKind,
        raw: Vec<RawNode>,
        bottom: Option<NodeId>,
    ) -> Result<View, ViewError> {
        if raw.is_empty() {
            return Err(ViewError::Empty);
        }
        let n = raw.len();
        if raw[0].parent.is_some() || raw[0].label.is_some() {
            return Err(ViewError::BadRoot);
        }
        for (i, r) in raw.iter().enumerate().skip(1) {
            if r.parent.is_none() || r.label.is_none() {
                return Err(ViewError::MissingParentOrLabel(i));
            }
        }

        let mut nodes: Vec<Node> = raw
            .into_iter()
            .map(|r| Node {
                parent: r.parent,
                label: r.label,
                depth: 0,
                red_in: r.red_in,
                children: Vec::new(),
            })
            .collect();

        // Depths via parent walk, detecting cycles. 0 unvisited, 1 in
        // progress, 2 done.
        let mut state = vec![0u8; n];
        let mut depth = vec![0i32; n];
        depth[ROOT] = -1;
        state[ROOT] = 2;
        for i in 0..n {
            if state[i] == 2 {
                continue;
            }
            let mut chain = Vec::new();
            let mut cur = i;
            loop {
                if state[cur] == 2 {
                    break;
                }
                if state[cur] == 1 {
                    return Err(ViewError::ParentCycle(cur));
                }
                state[cur] = 1;
                chain.push(cur);
                let p = nodes[cur].parent.expect("non-root checked above");
                if p >= n {
                    return Err(ViewError::BadReference(cur));
                }
                cur = p;
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
                state[c] = 2;
            }
        }
        for i in 0..n {
            nodes[i].depth = depth[i];
        }

        // Red edges: in-range non-root targets, positive multiplicities, at
        // most one edge per source, normalized source order.
        for i in 0..n {
            let red = &mut nodes[i].red_in;
            if !red.is_empty() && i == ROOT {
                return Err(ViewError::RedIntoRoot);
            }
            red.sort_by(|a, b| a.0.cmp(&b.0));
            for w in 0..red.len() {
                let (src, m) = &red[w];
                if *src >= n || *src == i {
                    return Err(ViewError::BadReference(i));
                }
                if m.is_zero() {
                    return Err(ViewError::ZeroMultiplicity(i));
                }
                if w > 0 && red[w - 1].0 == *src {
                    return Err(ViewError::DuplicateRedSource(i));
                }
            }
        }

        if kind == ViewKind::Standard {
            for i in 0..n {
                for &(src, _) in &nodes[i].red_in {
                    if depth[i] != depth[src] + 1 {
                        return Err(ViewError::RedDepthSkew);
                    }
                }
            }
        }

        // Children lists (ascending by construction).
        for i in 1..n {
            let p = nodes[i].parent.unwrap();
            nodes[p].children.push(i);
        }

        // Topological order over black + red edges; also the DAG check that
        // generalized views need (standard views pass by the depth rule).
        let mut red_out: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for i in 0..n {
            for &(src, _) in &nodes[i].red_in {
                red_out[src].push(i);
            }
        }
        let mut indeg = vec![0usize; n];
        for i in 0..n {
            if nodes[i].parent.is_some() {
                indeg[i] += 1;
            }
            indeg[i] += nodes[i].red_in.len();
        }
        let mut queue: VecDeque<NodeId> =
            (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(u) = queue.pop_front() {
            topo.push(u);
            for &c in &nodes[u].children {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
            for &d in &red_out[u] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    queue.push_back(d);
                }
            }
        }
        if topo.len() != n {
            return Err(ViewError::CyclicEdges);
        }

        // Bottom: a sink every node can reach.
        if let Some(b) = bottom {
            if b >= n {
                return Err(ViewError::BadReference(b));
            }
            if !nodes[b].children.is_empty() || !red_out[b].is_empty() {
                return Err(ViewError::BottomNotSink);
            }
            let mut seen = vec![false; n];
            seen[b] = true;
            let mut stack = vec![b];
            while let Some(u) = stack.pop() {
                if let Some(p) = nodes[u].parent {
                    if !seen[p] {
                        seen[p] = true;
                        stack.push(p);
                    }
                }
                for &(src, _) in &nodes[u].red_in {
                    if !seen[src] {
                        seen[src] = true;
                        stack.push(src);
                    }
                }
            }
            if let Some(i) = (0..n).find(|&i| !seen[i]) {
                return Err(ViewError::UnreachableBottom(i));
            }
        }

        let view = View { kind, nodes, bottom, topo, canonical: OnceLock::new() };

        // No two nodes may have isomorphic sub-views; equivalently all
        // canonical codes are distinct. Merging relies on this.
        let mut ctx = CodeCtx::new();
        let codes = ctx.code_view(&view);
        let mut by_code: Vec<(CodeId, NodeId)> =
            codes.iter().copied().zip(0..n).collect();
        by_code.sort_unstable();
        for w in by_code.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ViewError::DuplicateCode(w[0].1, w[1].1));
            }
        }

        // The coding pass above is exactly what the canonical serialization
        // needs, so pay the byte assembly now instead of a second pass later.
        let bytes = encode::encode_with(&view, &mut ctx, &codes);
        view.canonical.set(bytes).expect("fresh lock");

        Ok(view)
    }

    pub fn kind(&self) -> ViewKind {
        self.kind
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bottom(&self) -> Option<NodeId> {
        self.bottom
    }

    /// Number of non-root levels: 1 + max depth; 0 for the root-only view.
    pub fn height(&self) -> usize {
        (self.max_depth() + 1) as usize
    }

    pub(crate) fn max_depth(&self) -> i32 {
        self.nodes.iter().map(|v| v.depth).max().unwrap_or(-1)
    }

    pub fn depth(&self, v: NodeId) -> i32 {
        self.nodes[v].depth
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn label(&self, v: NodeId) -> Option<&InputLabel> {
        self.nodes[v].label.as_ref()
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn red_in(&self, v: NodeId) -> &[(NodeId, Mult)] {
        &self.nodes[v].red_in
    }

    /// Multiplicity of the red edge src -> dst, if present.
    pub fn red_mult(&self, src: NodeId, dst: NodeId) -> Option<&Mult> {
        self.nodes[dst]
            .red_in
            .iter()
            .find(|(s, _)| *s == src)
            .map(|(_, m)| m)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        0..self.nodes.len()
    }

    /// All nodes at black-tree depth `d`, ascending by id.
    pub fn nodes_at_depth(&self, d: i32) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].depth == d).collect()
    }

    pub(crate) fn topo(&self) -> &[NodeId] {
        &self.topo
    }

    /// True iff `anc` is a strict black-tree ancestor of `v`.
    pub fn is_strict_ancestor(&self, anc: NodeId, v: NodeId) -> bool {
        let mut cur = self.nodes[v].parent;
        while let Some(u) = cur {
            if u == anc {
                return true;
            }
            cur = self.nodes[u].parent;
        }
        false
    }

    /// The maximal view whose bottom is `v`: the subgraph of everything that
    /// can reach `v` along black or red edges. For standard views this
    /// coincides with the span of all shortest root-to-`v` paths, because
    /// every edge advances depth by exactly one.
    pub fn sub_view(&self, v: NodeId) -> View {
        assert!(v < self.nodes.len(), "unknown node reference");
        let n = self.nodes.len();
        let mut keep = vec![false; n];
        keep[v] = true;
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if let Some(p) = self.nodes[u].parent {
                if !keep[p] {
                    keep[p] = true;
                    stack.push(p);
                }
            }
            for &(src, _) in &self.nodes[u].red_in {
                if !keep[src] {
                    keep[src] = true;
                    stack.push(src);
                }
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut next = 0;
        for i in 0..n {
            if keep[i] {
                remap[i] = next;
                next += 1;
            }
        }
        let raw: Vec<RawNode> = (0..n)
            .filter(|&i| keep[i])
            .map(|i| RawNode {
                parent: self.nodes[i].parent.map(|p| remap[p]),
                label: self.nodes[i].label.clone(),
                red_in: self.nodes[i]
                    .red_in
                    .iter()
                    .map(|(s, m)| (remap[*s], m.clone()))
                    .collect(),
            })
            .collect();
        View::from_parts(self.kind, raw, Some(remap[v]))
            .expect("sub-view of a valid view is valid")
    }

    /// Canonical serialization; equal bytes iff isomorphic views.
    pub fn canonical_bytes(&self) -> &[u8] {
        self.canonical.get_or_init(|| encode::encode_view(self))
    }

    /// Label-, structure-, multiplicity- and bottom-preserving isomorphism.
    pub fn isomorphic(&self, other: &View) -> bool {
        self.canonical_bytes() == other.canonical_bytes()
    }
}

/// Canonical code of `node`'s sub-view: an opaque, totally ordered byte
/// sequence. Codes are equal exactly when the sub-views are isomorphic,
/// across arbitrary host views.
pub fn canonical_code(view: &View, node: NodeId) -> Vec<u8> {
    view.sub_view(node).canonical_bytes().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn lbl(s: &str) -> InputLabel {
        InputLabel::new(s).unwrap()
    }

    fn m(x: u32) -> Mult {
        Mult::from(x)
    }

    #[test]
    fn new_leaf_shape() {
        let v = View::new_leaf(&lbl("a"));
        assert_eq!(v.height(), 1);
        assert_eq!(v.bottom(), Some(1));
        assert_eq!(v.label(1), Some(&lbl("a")));
        assert_eq!(v.depth(ROOT), -1);
        assert_eq!(v.depth(1), 0);
        assert_eq!(v.children(ROOT), &[1]);
    }

    #[test]
    fn leaf_views_differ_by_label() {
        let a = View::new_leaf(&lbl("a"));
        let a2 = View::new_leaf(&lbl("a"));
        let b = View::new_leaf(&lbl("b"));
        assert!(a.isomorphic(&a2));
        assert!(!a.isomorphic(&b));
    }

    #[test]
    fn root_only_height_zero() {
        let v = View::root_only(ViewKind::Standard);
        assert_eq!(v.height(), 0);
        assert_eq!(v.bottom(), Some(ROOT));
    }

    #[test]
    fn rejects_zero_multiplicity() {
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode {
                    parent: Some(1),
                    label: Some(lbl("a")),
                    red_in: vec![(2, Mult::zero())],
                },
            ],
            Some(3),
        );
        assert_eq!(r.unwrap_err(), ViewError::ZeroMultiplicity(3));
    }

    #[test]
    fn rejects_parent_cycle() {
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(2), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
            ],
            None,
        );
        assert!(matches!(r.unwrap_err(), ViewError::ParentCycle(_)));
    }

    #[test]
    fn rejects_duplicate_subviews() {
        // Two same-labeled siblings with identical (empty) red-ins are
        // indistinguishable, which a valid view never contains.
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
            ],
            None,
        );
        assert!(matches!(r.unwrap_err(), ViewError::DuplicateCode(_, _)));
    }

    #[test]
    fn siblings_distinguished_by_red_multiplicity() {
        // Same labels, same parent, but different inbound multiplicities.
        let v = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("p")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(1, m(1))] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(1, m(2))] },
            ],
            None,
        );
        assert!(v.is_ok());
    }

    #[test]
    fn standard_rejects_level_skipping_red() {
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(2), label: Some(lbl("a")), red_in: vec![(1, m(1))] },
            ],
            Some(3),
        );
        assert_eq!(r.unwrap_err(), ViewError::RedDepthSkew);
    }

    #[test]
    fn generalized_accepts_level_skipping_red() {
        let r = View::from_parts(
            ViewKind::Generalized,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(2), label: Some(lbl("a")), red_in: vec![(1, m(1))] },
            ],
            Some(3),
        );
        assert!(r.is_ok());
    }

    #[test]
    fn generalized_rejects_red_cycle() {
        // Mutual red edges between two sibling nodes close a directed cycle.
        let r = View::from_parts(
            ViewKind::Generalized,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![(2, m(1))] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![(1, m(1))] },
            ],
            None,
        );
        assert_eq!(r.unwrap_err(), ViewError::CyclicEdges);
    }

    #[test]
    fn generalized_accepts_cross_branch_reds() {
        // Red edges across branches in one direction do not form a cycle.
        let r = View::from_parts(
            ViewKind::Generalized,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(3, m(1))] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(3), label: Some(lbl("b")), red_in: vec![(1, m(1))] },
            ],
            None,
        );
        assert!(r.is_ok());
    }

    #[test]
    fn bottom_must_be_sink() {
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
            ],
            Some(1),
        );
        assert_eq!(r.unwrap_err(), ViewError::BottomNotSink);
    }

    #[test]
    fn all_nodes_must_reach_bottom() {
        let r = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
            ],
            Some(3),
        );
        assert_eq!(r.unwrap_err(), ViewError::UnreachableBottom(2));
    }

    #[test]
    fn reach_bottom_through_red_edges() {
        let v = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(2, m(1))] },
            ],
            Some(3),
        )
        .unwrap();
        assert_eq!(v.height(), 2);
        assert_eq!(v.red_mult(2, 3), Some(&m(1)));
    }

    #[test]
    fn sub_view_at_root_is_trivial() {
        let v = View::new_leaf(&lbl("a"));
        let s = v.sub_view(ROOT);
        assert_eq!(s.node_count(), 1);
        assert_eq!(s.height(), 0);
        assert_eq!(s.bottom(), Some(ROOT));
    }

    #[test]
    fn sub_view_at_bottom_is_whole_view() {
        let v = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(2, m(1))] },
            ],
            Some(3),
        )
        .unwrap();
        let s = v.sub_view(3);
        assert!(s.isomorphic(&v));
    }

    #[test]
    fn sub_view_drops_unrelated_branch() {
        // Node 3 reaches the bottom only in the full view; sub_view(1) must
        // exclude both 2's subtree and the red edge evidence.
        let v = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(2, m(1))] },
            ],
            Some(3),
        )
        .unwrap();
        let s = v.sub_view(1);
        assert_eq!(s.node_count(), 2);
        assert!(s.isomorphic(&View::new_leaf(&lbl("a"))));
    }

    #[test]
    fn canonical_code_detects_multiplicity() {
        let mk = |mult: u32| {
            View::from_parts(
                ViewKind::Standard,
                vec![
                    RawNode { parent: None, label: None, red_in: vec![] },
                    RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                    RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                    RawNode {
                        parent: Some(1),
                        label: Some(lbl("a")),
                        red_in: vec![(2, m(mult))],
                    },
                ],
                Some(3),
            )
            .unwrap()
        };
        assert_ne!(canonical_code(&mk(1), 3), canonical_code(&mk(2), 3));
        assert_eq!(canonical_code(&mk(2), 3), canonical_code(&mk(2), 3));
    }

    #[test]
    fn isomorphism_ignores_node_numbering() {
        let v1 = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![(2, m(1))] },
            ],
            Some(3),
        )
        .unwrap();
        // Same structure, nodes listed in a different order.
        let v2 = View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode { parent: Some(3), label: Some(lbl("a")), red_in: vec![(1, m(1))] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
            ],
            Some(2),
        )
        .unwrap();
        assert!(v1.isomorphic(&v2));
    }
}
