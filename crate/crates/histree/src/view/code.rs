//! Interned canonical codes deciding sub-view isomorphism.
//!
//! A node's sub-view (everything that can reach it) is determined up to
//! isomorphism by its label, its black parent's sub-view, and the multiset
//! of (red source sub-view, multiplicity) pairs: two nodes with equal such
//! triples have isomorphic sub-views, and conversely. Interning the triples
//! turns isomorphism checks into id comparisons, and lets several views be
//! matched against each other by coding them into one shared context.
//!
//! Correctness of the recursion relies on each ingredient sub-view being
//! strictly smaller than the node's own, which holds because black and red
//! edges form a DAG: every view is coded in one pass along a topological
//! order.

use super::{Mult, NodeId, View};
use crate::label::InputLabel;
use std::cmp::Ordering;
use std::collections::HashMap;

/// Context-local code. Equal ids mean isomorphic sub-views; ids from
/// different contexts are not comparable.
pub(crate) type CodeId = u32;

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct NodeKey {
    pub(crate) label: Option<InputLabel>,
    pub(crate) parent: Option<CodeId>,
    /// Sorted by raw source id; at most one entry per source. Raw-id order
    /// is stable within a context, which is all key equality needs.
    pub(crate) red_in: Vec<(CodeId, Mult)>,
}

/// Interning table shared by every view participating in one operation.
/// May also persist across operations: codes only accumulate, so a
/// long-lived context is a pure memo.
#[derive(Default, Debug)]
pub(crate) struct CodeCtx {
    keys: Vec<NodeKey>,
    ids: HashMap<NodeKey, CodeId>,
    cmp_memo: HashMap<(CodeId, CodeId), Ordering>,
}

impl CodeCtx {
    pub(crate) fn new() -> Self {
        CodeCtx { keys: Vec::new(), ids: HashMap::new(), cmp_memo: HashMap::new() }
    }

    pub(crate) fn intern(&mut self, key: NodeKey) -> CodeId {
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.keys.len() as CodeId;
        if let Some(p) = key.parent {
            debug_assert!(p < id, "parent interned after child");
        }
        debug_assert!(key.red_in.iter().all(|&(s, _)| s < id));
        self.keys.push(key.clone());
        self.ids.insert(key, id);
        id
    }

    pub(crate) fn key(&self, id: CodeId) -> &NodeKey {
        &self.keys[id as usize]
    }

    pub(crate) fn lookup(&self, key: &NodeKey) -> Option<CodeId> {
        self.ids.get(key).copied()
    }

    /// Codes every node of `view`, returning the per-node ids. References in
    /// each key point at codes interned earlier, thanks to the topological
    /// order.
    pub(crate) fn code_view(&mut self, view: &View) -> Vec<CodeId> {
        let n = view.node_count();
        let mut codes: Vec<CodeId> = vec![CodeId::MAX; n];
        for &v in view.topo() {
            let key = NodeKey {
                label: view.label(v).cloned(),
                parent: view.parent(v).map(|p| {
                    debug_assert_ne!(codes[p], CodeId::MAX);
                    codes[p]
                }),
                red_in: normalize_red(
                    view.red_in(v).iter().map(|(s, m)| {
                        debug_assert_ne!(codes[*s], CodeId::MAX);
                        (codes[*s], m.clone())
                    }),
                ),
            };
            codes[v as NodeId] = self.intern(key);
        }
        codes
    }

    /// Total order on codes, invariant under isomorphism: comparing the
    /// codes of two nodes in any two views gives the same result as
    /// comparing their canonical serializations. `Equal` only for equal ids.
    pub(crate) fn cmp(&mut self, a: CodeId, b: CodeId) -> Ordering {
        if a == b {
            return Ordering::Equal;
        }
        if let Some(&o) = self.cmp_memo.get(&(a, b)) {
            return o;
        }
        let ka = self.key(a).clone();
        let kb = self.key(b).clone();
        let mut o = self.cmp_label(&ka.label, &kb.label);
        if o == Ordering::Equal {
            o = match (ka.parent, kb.parent) {
                (None, None) => Ordering::Equal,
                (None, Some(_)) => Ordering::Less,
                (Some(_), None) => Ordering::Greater,
                (Some(pa), Some(pb)) => self.cmp(pa, pb),
            };
        }
        if o == Ordering::Equal {
            let ra = self.sort_red_semantically(&ka.red_in);
            let rb = self.sort_red_semantically(&kb.red_in);
            for i in 0..ra.len().min(rb.len()) {
                o = self.cmp(ra[i].0, rb[i].0);
                if o == Ordering::Equal {
                    o = ra[i].1.cmp(&rb[i].1);
                }
                if o != Ordering::Equal {
                    break;
                }
            }
            if o == Ordering::Equal {
                o = ra.len().cmp(&rb.len());
            }
        }
        debug_assert_ne!(o, Ordering::Equal, "distinct codes compared equal");
        self.cmp_memo.insert((a, b), o);
        self.cmp_memo.insert((b, a), o.reverse());
        o
    }

    fn cmp_label(&self, a: &Option<InputLabel>, b: &Option<InputLabel>) -> Ordering {
        match (a, b) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(x), Some(y)) => x.as_bytes().cmp(y.as_bytes()),
        }
    }

    /// Red-in entries ordered by (structural code order, multiplicity):
    /// the same sequence for isomorphic red-in multisets.
    fn sort_red_semantically(&mut self, red: &[(CodeId, Mult)]) -> Vec<(CodeId, Mult)> {
        let mut out = red.to_vec();
        out.sort_by(|x, y| {
            let o = self.cmp(x.0, y.0);
            o.then_with(|| x.1.cmp(&y.1))
        });
        out
    }
}

/// Sorts by raw source id and folds duplicate sources by summing
/// multiplicities. Valid views never contain duplicates (their sources would
/// be isomorphic nodes), but merge intermediates may.
pub(crate) fn normalize_red(
    entries: impl Iterator<Item = (CodeId, Mult)>,
) -> Vec<(CodeId, Mult)> {
    let mut v: Vec<(CodeId, Mult)> = entries.collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(CodeId, Mult)> = Vec::with_capacity(v.len());
    for (s, m) in v {
        match out.last_mut() {
            Some(last) if last.0 == s => last.1 += m,
            _ => out.push((s, m)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{RawNode, ViewKind, ROOT};
    use super::*;

    fn lbl(s: &str) -> InputLabel {
        InputLabel::new(s).unwrap()
    }

    #[test]
    fn equal_ids_for_isomorphic_nodes_across_views() {
        let a1 = View::new_leaf(&lbl("a"));
        let a2 = View::new_leaf(&lbl("a"));
        let b = View::new_leaf(&lbl("b"));
        let mut ctx = CodeCtx::new();
        let c1 = ctx.code_view(&a1);
        let c2 = ctx.code_view(&a2);
        let c3 = ctx.code_view(&b);
        assert_eq!(c1[ROOT], c2[ROOT]);
        assert_eq!(c1[ROOT], c3[ROOT]);
        assert_eq!(c1[1], c2[1]);
        assert_ne!(c1[1], c3[1]);
    }

    #[test]
    fn parent_context_enters_the_code() {
        // Leaves with equal labels but differently labeled parents differ.
        let mk = |parent_label: &str| {
            View::from_parts(
                ViewKind::Standard,
                vec![
                    RawNode { parent: None, label: None, red_in: vec![] },
                    RawNode { parent: Some(0), label: Some(lbl(parent_label)), red_in: vec![] },
                    RawNode { parent: Some(1), label: Some(lbl("x")), red_in: vec![] },
                ],
                Some(2),
            )
            .unwrap()
        };
        let va = mk("a");
        let vb = mk("b");
        let mut ctx = CodeCtx::new();
        let ca = ctx.code_view(&va);
        let cb = ctx.code_view(&vb);
        assert_ne!(ca[2], cb[2]);
    }

    #[test]
    fn cmp_is_a_strict_total_order() {
        let views = [
            View::new_leaf(&lbl("a")),
            View::new_leaf(&lbl("b")),
            View::root_only(ViewKind::Standard),
        ];
        let mut ctx = CodeCtx::new();
        let mut ids: Vec<CodeId> = Vec::new();
        for v in &views {
            ids.extend(ctx.code_view(v));
        }
        ids.sort_unstable();
        ids.dedup();
        for &x in &ids {
            assert_eq!(ctx.cmp(x, x), Ordering::Equal);
            for &y in &ids {
                if x != y {
                    let o = ctx.cmp(x, y);
                    assert_ne!(o, Ordering::Equal);
                    assert_eq!(ctx.cmp(y, x), o.reverse());
                }
            }
        }
    }

    #[test]
    fn normalize_folds_duplicate_sources() {
        let out = normalize_red(
            vec![(3, Mult::from(2u32)), (1, Mult::from(1u32)), (3, Mult::from(5u32))]
                .into_iter(),
        );
        assert_eq!(out, vec![(1, Mult::from(1u32)), (3, Mult::from(7u32))]);
    }
}
