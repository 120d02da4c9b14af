//! Canonical-code isomorphism against an independent brute-force oracle.
//!
//! [`View::isomorphic`] compares canonical serializations. The oracle here
//! shares none of that machinery: it searches directly for a structure-
//! preserving bijection. The two must agree on every pair of views, however
//! the views were produced.

use histree::netsim::trace::{adversary_trace, TraceKind};
use histree::netsim::oracle::oracle_view;
use histree::view::RawNode;
use histree::{InputLabel, View, ViewKind};
use proptest::prelude::*;

fn lbl(s: &str) -> InputLabel {
    InputLabel::new(s).unwrap()
}

/// Backtracking bijection search. Nodes are assigned in depth order, so a
/// node's parent is always mapped first; red edges are checked once the
/// bijection is total.
fn brute_force_isomorphic(a: &View, b: &View) -> bool {
    if a.kind() != b.kind() || a.node_count() != b.node_count() {
        return false;
    }
    let n = a.node_count();
    let mut order: Vec<usize> = a.node_ids().skip(1).collect();
    order.sort_by_key(|&u| a.depth(u));
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[0] = 0;
    used[0] = true;
    assign(a, b, &order, 0, &mut map, &mut used)
}

fn assign(
    a: &View,
    b: &View,
    order: &[usize],
    i: usize,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    let Some(&u) = order.get(i) else {
        return red_edges_match(a, b, map);
    };
    let parent_image = map[a.parent(u).expect("non-root")];
    for v in b.node_ids() {
        let compatible = !used[v]
            && b.parent(v) == Some(parent_image)
            && a.depth(u) == b.depth(v)
            && a.label(u) == b.label(v)
            && (a.bottom() == Some(u)) == (b.bottom() == Some(v))
            && a.children(u).len() == b.children(v).len()
            && a.red_in(u).len() == b.red_in(v).len();
        if !compatible {
            continue;
        }
        map[u] = v;
        used[v] = true;
        if assign(a, b, order, i + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[v] = false;
    }
    false
}

fn red_edges_match(a: &View, b: &View, map: &[usize]) -> bool {
    a.node_ids().all(|u| {
        a.red_in(u).len() == b.red_in(map[u]).len()
            && a.red_in(u)
                .iter()
                .all(|(s, m)| b.red_mult(map[*s], map[u]) == Some(m))
    })
}

/// The same view rebuilt with its non-root nodes relocated by `salt`: node
/// ids change, structure does not.
fn permuted_copy(v: &View, salt: u64) -> View {
    let n = v.node_count();
    let mut perm: Vec<usize> = (1..n).collect();
    // Fisher-Yates driven by a tiny splitmix step; the quality bar is only
    // "not the identity most of the time".
    let mut state = salt.wrapping_add(0x9e37_79b9_7f4a_7c15);
    for i in (1..perm.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        perm.swap(i, (state as usize) % (i + 1));
    }
    let mut to_new = vec![0usize; n];
    for (new_minus_one, &old) in perm.iter().enumerate() {
        to_new[old] = new_minus_one + 1;
    }
    let mut raw = vec![
        RawNode { parent: None, label: None, red_in: vec![] };
        n
    ];
    for u in v.node_ids() {
        raw[to_new[u]] = RawNode {
            parent: v.parent(u).map(|p| to_new[p]),
            label: v.label(u).cloned(),
            red_in: v.red_in(u).iter().map(|(s, m)| (to_new[*s], m.clone())).collect(),
        };
    }
    View::from_parts(v.kind(), raw, v.bottom().map(|b| to_new[b])).expect("permuted rebuild")
}

/// Oracle views of a few agents across a few rounds: a cheap supply of
/// related-but-distinct standard views.
fn simulated_views(n: usize, rounds: usize, seed: u64) -> Vec<View> {
    let labels = ["a", "b", "c"];
    let inputs: Vec<InputLabel> =
        (0..n).map(|i| lbl(labels[i % labels.len()])).collect();
    let trace = adversary_trace(TraceKind::RandomConnected, inputs, rounds, seed).unwrap();
    let mut out = Vec::new();
    for t in 0..=rounds {
        for p in 0..n {
            out.push(oracle_view(&trace, p, t));
        }
    }
    out
}

/// Mixed-height generalized views: agents update through a round only when
/// their activity bit is set, so red edges cross multiple levels.
fn generalized_views(bits: &[bool; 12]) -> Vec<View> {
    let inputs = [lbl("a"), lbl("a"), lbl("b")];
    let mut views: Vec<View> =
        inputs.iter().map(|_| View::root_only(ViewKind::Generalized)).collect();
    for (round, chunk) in bits.chunks(3).enumerate() {
        let prev = views.clone();
        for p in 0..3 {
            if !chunk[p] {
                continue;
            }
            let q = (p + 1 + round % 2) % 3;
            let incoming = vec![(prev[q].clone(), histree::Mult::from(1u32))];
            // A bottom collision is legal input here; keep the old view
            // then, exactly as the finite-state algorithm does.
            views[p] = prev[p]
                .update(&incoming, &inputs[p], ViewKind::Generalized)
                .unwrap_or_else(|_| prev[p].clone());
        }
    }
    views
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_equality_agrees_with_the_bijection_search(
        n in 2usize..5,
        rounds in 1usize..4,
        seed in 0u64..500,
    ) {
        let views = simulated_views(n, rounds, seed);
        for (i, a) in views.iter().enumerate() {
            for b in &views[i..] {
                prop_assert_eq!(a.isomorphic(b), brute_force_isomorphic(a, b));
            }
        }
    }

    #[test]
    fn node_renumbering_never_changes_identity(
        n in 2usize..5,
        rounds in 1usize..4,
        seed in 0u64..500,
        salt in 0u64..u64::MAX,
    ) {
        for v in simulated_views(n, rounds, seed) {
            let p = permuted_copy(&v, salt);
            prop_assert!(v.isomorphic(&p));
            prop_assert!(brute_force_isomorphic(&v, &p));
            prop_assert_eq!(v.canonical_bytes(), p.canonical_bytes());
        }
    }

    #[test]
    fn generalized_views_agree_between_both_routes(
        bits in proptest::array::uniform12(proptest::bool::ANY),
        salt in 0u64..u64::MAX,
    ) {
        let views = generalized_views(&bits);
        for (i, a) in views.iter().enumerate() {
            let p = permuted_copy(a, salt);
            prop_assert!(a.isomorphic(&p));
            prop_assert!(brute_force_isomorphic(a, &p));
            for b in &views[i + 1..] {
                prop_assert_eq!(a.isomorphic(b), brute_force_isomorphic(a, b));
            }
        }
    }
}

#[test]
fn the_oracle_rejects_a_multiplicity_change() {
    // Same shape, different red multiplicity: both routes must say no.
    let mk = |m: u32| {
        View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("b")), red_in: vec![] },
                RawNode {
                    parent: Some(1),
                    label: Some(lbl("a")),
                    red_in: vec![(2, histree::Mult::from(m))],
                },
            ],
            Some(3),
        )
        .unwrap()
    };
    assert!(!mk(1).isomorphic(&mk(2)));
    assert!(!brute_force_isomorphic(&mk(1), &mk(2)));
    assert!(mk(2).isomorphic(&mk(2)));
    assert!(brute_force_isomorphic(&mk(2), &mk(2)));
}

#[test]
fn the_oracle_distinguishes_bottom_presence() {
    // Identical chains, one an agent view (bottom at the sink) and one a
    // bottomless compound: different identities on both routes.
    let chain = |bottom: Option<usize>| {
        View::from_parts(
            ViewKind::Standard,
            vec![
                RawNode { parent: None, label: None, red_in: vec![] },
                RawNode { parent: Some(0), label: Some(lbl("a")), red_in: vec![] },
                RawNode { parent: Some(1), label: Some(lbl("a")), red_in: vec![] },
            ],
            bottom,
        )
        .unwrap()
    };
    let with = chain(Some(2));
    let without = chain(None);
    assert!(with.isomorphic(&with.clone()));
    assert!(brute_force_isomorphic(&with, &with));
    assert!(!with.isomorphic(&without));
    assert!(!brute_force_isomorphic(&with, &without));
}
