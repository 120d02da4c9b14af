// AGENT-AUTHORED
//! Counting structure: levels, exposed pairs, cuts, dominance, and exact
//! input-frequency computation.
//!
//! A *cut* is a set of nodes meeting every root-to-leaf path of the black
//! tree exactly once. A cut is *counting* when each member has a unique
//! child and the members induce a connected subgraph of the exposed-pair
//! graph. On such a cut the mutual red multiplicities pin down the relative
//! anonymity of every member up to one free variable, which normalization
//! removes; aggregating the solved weights by input label yields the exact
//! frequency of each input among the agents the cut covers.
//!
//! All arithmetic is exact rational. Nothing here mutates a view.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::ser::{Serialize, SerializeSeq, Serializer};
use thiserror::Error;

use crate::label::InputLabel;
use crate::view::{canonical_code, NodeId, View, ROOT};

/// Search-step ceiling for cut enumeration. The frontier search is
/// exponential in the worst case; well-formed run views stay tiny, so
/// hitting this ceiling signals adversarial input rather than normal load.
const CUT_SEARCH_BUDGET: u64 = 10_000_000;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum CountingError {
    #[error("node {0} is not in the host view")]
    UnknownNode(NodeId),
    #[error("members do not meet every root-to-leaf path exactly once")]
    NotACut,
    #[error("cut member {0} has no unique child")]
    NoUniqueChild(NodeId),
    #[error("cut members are disconnected in the exposed-pair graph")]
    Disconnected,
    #[error("exposed-pair multiplicity equations are contradictory")]
    Inconsistent,
    #[error("cut enumeration exceeded {0} search steps")]
    SearchBudget(u64),
}

/// A set of nodes meeting every root-to-leaf black path exactly once.
///
/// Members are sorted, deduplicated node ids of a host view; a `Cut` is
/// only meaningful together with the view it was built against.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cut {
    members: Vec<NodeId>,
}

impl Cut {
    /// Validates the exactly-one-per-path property against `view`.
    pub fn new(view: &View, members: impl IntoIterator<Item = NodeId>) -> Result<Cut, CountingError> {
        let mut ms: Vec<NodeId> = members.into_iter().collect();
        ms.sort_unstable();
        ms.dedup();
        for &m in &ms {
            if m >= view.node_count() {
                return Err(CountingError::UnknownNode(m));
            }
        }
        let mut member = vec![false; view.node_count()];
        for &m in &ms {
            member[m] = true;
        }
        for leaf in view.node_ids().filter(|&v| view.children(v).is_empty()) {
            let mut hits = member[leaf] as usize;
            let mut cur = view.parent(leaf);
            while let Some(p) = cur {
                hits += member[p] as usize;
                cur = view.parent(p);
            }
            if hits != 1 {
                return Err(CountingError::NotACut);
            }
        }
        Ok(Cut { members: ms })
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Sorted canonical codes of the members' unique children. Two cuts are
/// isomorphic exactly when their signatures are equal: codes inside one
/// view are pairwise distinct, so set equality induces the bijection.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CutSignature(Vec<Vec<u8>>);

/// Relative anonymity weights for the members of one counting cut,
/// normalized to total 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnonymityAssignment {
    weights: BTreeMap<NodeId, BigRational>,
}

impl AnonymityAssignment {
    pub fn weight(&self, node: NodeId) -> Option<&BigRational> {
        self.weights.get(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &BigRational)> {
        self.weights.iter().map(|(&n, w)| (n, w))
    }

    /// Population size implied by knowing the absolute anonymity of one
    /// member: total = known / weight(node).
    pub fn implied_total(&self, node: NodeId, known: u64) -> Option<BigRational> {
        let w = self.weights.get(&node)?;
        Some(BigRational::from_integer(BigInt::from(known)) / w)
    }
}

/// Exact input frequencies: label -> rational in [0, 1], totalling 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyMap {
    entries: BTreeMap<InputLabel, BigRational>,
}

impl FrequencyMap {
    /// The degenerate census `{label: 1}`.
    pub fn singleton(label: InputLabel) -> FrequencyMap {
        let mut entries = BTreeMap::new();
        entries.insert(label, BigRational::one());
        FrequencyMap { entries }
    }

    /// Exact census of a population of labels.
    pub fn census<'a>(labels: impl IntoIterator<Item = &'a InputLabel>) -> FrequencyMap {
        let mut counts: BTreeMap<InputLabel, u64> = BTreeMap::new();
        let mut n = 0u64;
        for lab in labels {
            *counts.entry(lab.clone()).or_insert(0) += 1;
            n += 1;
        }
        let entries = counts
            .into_iter()
            .map(|(lab, c)| (lab, BigRational::new(BigInt::from(c), BigInt::from(n))))
            .collect();
        FrequencyMap { entries }
    }

    pub fn get(&self, label: &InputLabel) -> Option<&BigRational> {
        self.entries.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&InputLabel, &BigRational)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> BigRational {
        self.entries.values().fold(BigRational::zero(), |a, b| a + b)
    }
}

impl Serialize for FrequencyMap {
    /// Sorted `[label, numerator, denominator]` triples; numerals as
    /// decimal strings so arbitrary precision survives JSON.
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.entries.len()))?;
        for (lab, q) in &self.entries {
            seq.serialize_element(&(lab.as_str(), q.numer().to_string(), q.denom().to_string()))?;
        }
        seq.end()
    }
}

fn unique_child(view: &View, v: NodeId) -> Option<NodeId> {
    match view.children(v) {
        [c] => Some(*c),
        _ => None,
    }
}

/// Ascending depths t >= 0 at which every node has exactly one child.
/// The deepest level is excluded: its children are not observable yet.
/// Root level -1 is likewise not a level index.
pub fn counting_levels(view: &View) -> Vec<i32> {
    (0..view.height() as i32)
        .filter(|&t| t + 1 < view.height() as i32)
        .filter(|&t| {
            view.nodes_at_depth(t)
                .iter()
                .all(|&v| view.children(v).len() == 1)
        })
        .collect()
}

/// All unordered pairs {v, u}, v != u, where each has a unique child and a
/// red edge into the other's unique child. Sorted, each pair as (min, max).
pub fn exposed_pairs(view: &View) -> Vec<(NodeId, NodeId)> {
    let n = view.node_count();
    let uc: Vec<Option<NodeId>> = (0..n).map(|v| unique_child(view, v)).collect();
    // (v, u) recorded when v has a red edge into u's unique child
    let mut into_child: HashSet<(NodeId, NodeId)> = HashSet::new();
    for u in 0..n {
        if let Some(cu) = uc[u] {
            for (src, _) in view.red_in(cu) {
                into_child.insert((*src, u));
            }
        }
    }
    let mut out: Vec<(NodeId, NodeId)> = into_child
        .iter()
        .filter(|&&(v, u)| v < u && into_child.contains(&(u, v)))
        .copied()
        .collect();
    out.sort_unstable();
    out
}

struct ExposureGraph {
    uc: Vec<Option<NodeId>>,
    adj: Vec<Vec<NodeId>>,
    /// Connected component of each node with a unique child; usize::MAX
    /// elsewhere.
    comp: Vec<usize>,
}

impl ExposureGraph {
    fn build(view: &View) -> ExposureGraph {
        let n = view.node_count();
        let uc: Vec<Option<NodeId>> = (0..n).map(|v| unique_child(view, v)).collect();
        let mut adj = vec![Vec::new(); n];
        for (a, b) in exposed_pairs(view) {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if uc[s].is_none() || comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            let mut queue = VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        ExposureGraph { uc, adj, comp }
    }

    /// Does the member set induce a connected subgraph? Vacuous for
    /// singletons.
    fn induces_connected(&self, members: &[NodeId]) -> bool {
        let Some(&start) = members.first() else {
            return false;
        };
        let set: HashSet<NodeId> = members.iter().copied().collect();
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.adj[v] {
                if set.contains(&w) && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        seen.len() == members.len()
    }
}

/// Every counting cut of the view, sorted by member list.
///
/// Enumeration walks the black tree with a frontier of pending branch
/// nodes: a pending node is either selected (possible only if it has a
/// unique child and sits in the same exposure component as the members so
/// far) or replaced by its children. A childless pending node that cannot
/// be selected kills the branch. Exponential in the worst case, hence the
/// step budget.
pub fn counting_cuts(view: &View) -> Result<Vec<Cut>, CountingError> {
    counting_cuts_budgeted(view, CUT_SEARCH_BUDGET)
}

fn counting_cuts_budgeted(view: &View, budget: u64) -> Result<Vec<Cut>, CountingError> {
    struct Search<'a> {
        view: &'a View,
        g: &'a ExposureGraph,
        steps: u64,
        budget: u64,
        out: Vec<Cut>,
    }

    fn walk(
        s: &mut Search,
        pending: &mut Vec<NodeId>,
        selected: &mut Vec<NodeId>,
    ) -> Result<(), CountingError> {
        s.steps += 1;
        if s.steps > s.budget {
            return Err(CountingError::SearchBudget(s.budget));
        }
        let Some(v) = pending.pop() else {
            // same-component pruning already holds; the induced subgraph
            // may still be disconnected, so check it here
            if s.g.induces_connected(selected) {
                let mut members = selected.clone();
                members.sort_unstable();
                s.out.push(Cut { members });
            }
            return Ok(());
        };
        let compatible = selected
            .first()
            .map_or(true, |&m| s.g.comp[m] == s.g.comp[v]);
        if s.g.uc[v].is_some() && compatible {
            selected.push(v);
            walk(s, pending, selected)?;
            selected.pop();
        }
        let kids = s.view.children(v);
        if !kids.is_empty() {
            let keep = pending.len();
            pending.extend_from_slice(kids);
            walk(s, pending, selected)?;
            pending.truncate(keep);
        }
        pending.push(v);
        Ok(())
    }

    let g = ExposureGraph::build(view);
    let mut s = Search { view, g: &g, steps: 0, budget, out: Vec::new() };
    walk(&mut s, &mut vec![ROOT], &mut Vec::new())?;
    s.out.sort_unstable();
    Ok(s.out)
}

/// True iff every member of `b` has a strict black-tree ancestor in `a`.
pub fn dominates(a: &Cut, b: &Cut, view: &View) -> Result<bool, CountingError> {
    let a = Cut::new(view, a.members().iter().copied())?;
    let b = Cut::new(view, b.members().iter().copied())?;
    Ok(dominates_unchecked(&a, &b, view))
}

fn dominates_unchecked(a: &Cut, b: &Cut, view: &View) -> bool {
    let mut in_a = vec![false; view.node_count()];
    for &m in a.members() {
        in_a[m] = true;
    }
    b.members().iter().all(|&u| {
        let mut cur = view.parent(u);
        while let Some(p) = cur {
            if in_a[p] {
                return true;
            }
            cur = view.parent(p);
        }
        false
    })
}

/// The unique counting cut dominating every other one, if it exists.
///
/// At most one candidate can qualify: if two cuts dominated each other,
/// the minimum-depth node across both would need a strictly shallower
/// ancestor inside the other cut. No result either when there is no
/// counting cut or when the cuts are incomparable.
pub fn dominant_counting_cut(view: &View) -> Result<Option<Cut>, CountingError> {
    let mut cuts = counting_cuts(view)?;
    match cuts.len() {
        0 => Ok(None),
        1 => Ok(cuts.pop()),
        _ => {
            for i in 0..cuts.len() {
                let beats_all = (0..cuts.len())
                    .all(|j| j == i || dominates_unchecked(&cuts[i], &cuts[j], view));
                if beats_all {
                    return Ok(Some(cuts.swap_remove(i)));
                }
            }
            Ok(None)
        }
    }
}

/// Sorted canonical codes of the members' unique children.
pub fn cut_signature(view: &View, cut: &Cut) -> Result<CutSignature, CountingError> {
    let mut codes = Vec::with_capacity(cut.len());
    for &m in cut.members() {
        if m >= view.node_count() {
            return Err(CountingError::UnknownNode(m));
        }
        let c = unique_child(view, m).ok_or(CountingError::NoUniqueChild(m))?;
        codes.push(canonical_code(view, c));
    }
    codes.sort_unstable();
    Ok(CutSignature(codes))
}

/// Cut isomorphism via signature equality.
pub fn cuts_isomorphic(a: &Cut, va: &View, b: &Cut, vb: &View) -> Result<bool, CountingError> {
    Ok(cut_signature(va, a)? == cut_signature(vb, b)?)
}

/// Solves the relative anonymities of a counting cut.
///
/// For an exposed pair {v, u} inside the cut, with v', u' the unique
/// children, counting the messages across the v/u boundary in one round
/// gives
///
///   a(u) * mult(v -> u') = a(v) * mult(u -> v')
///
/// (each agent of u' received mult(v -> u') messages from class v, and
/// there are a(u') = a(u) of them; symmetrically for the other side; both
/// totals count the same undirected links). The member with the smallest
/// canonical code gets weight 1, a breadth-first pass propagates the
/// ratios, every equation is re-checked against the final assignment, and
/// the weights are normalized to total 1.
pub fn solve_anonymities(view: &View, cut: &Cut) -> Result<AnonymityAssignment, CountingError> {
    solve_anonymities_from(view, cut, None)
}

/// `start` overrides the free-variable choice (member index); the
/// normalized result does not depend on it.
fn solve_anonymities_from(
    view: &View,
    cut: &Cut,
    start: Option<usize>,
) -> Result<AnonymityAssignment, CountingError> {
    let cut = Cut::new(view, cut.members().iter().copied())?;
    let ms = cut.members();
    let mut uc = Vec::with_capacity(ms.len());
    for &m in ms {
        uc.push(unique_child(view, m).ok_or(CountingError::NoUniqueChild(m))?);
    }
    let index: HashMap<NodeId, usize> = ms.iter().enumerate().map(|(i, &m)| (m, i)).collect();

    // adjacency over member indices: j neighbors i iff mutually exposed
    let mut adj = vec![Vec::new(); ms.len()];
    for i in 0..ms.len() {
        for (src, _) in view.red_in(uc[i]) {
            if let Some(&j) = index.get(src) {
                if j != i && view.red_mult(ms[i], uc[j]).is_some() {
                    adj[i].push(j);
                }
            }
        }
    }

    let start = start.unwrap_or_else(|| {
        (0..ms.len())
            .min_by_key(|&i| canonical_code(view, ms[i]))
            .expect("cuts are nonempty")
    });
    let ratio = |m: &crate::view::Mult| BigRational::from_integer(BigInt::from(m.clone()));

    let mut a: Vec<Option<BigRational>> = vec![None; ms.len()];
    a[start] = Some(BigRational::one());
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        let ai = a[i].clone().expect("queued members are assigned");
        for &j in &adj[i] {
            if a[j].is_none() {
                let m_j_in = ratio(view.red_mult(ms[j], uc[i]).expect("adjacency checked"));
                let m_i_in = ratio(view.red_mult(ms[i], uc[j]).expect("adjacency checked"));
                a[j] = Some(&ai * m_j_in / m_i_in);
                queue.push_back(j);
            }
        }
    }
    if a.iter().any(Option::is_none) {
        return Err(CountingError::Disconnected);
    }
    let a: Vec<BigRational> = a.into_iter().map(Option::unwrap).collect();

    // a cycle of exposed pairs can encode contradictory ratios; the
    // propagation above silently picks a spanning tree, so verify all
    // equations against the result
    for i in 0..ms.len() {
        for &j in &adj[i] {
            let m_j_in = ratio(view.red_mult(ms[j], uc[i]).expect("adjacency checked"));
            let m_i_in = ratio(view.red_mult(ms[i], uc[j]).expect("adjacency checked"));
            if &a[j] * m_i_in != &a[i] * m_j_in {
                return Err(CountingError::Inconsistent);
            }
        }
    }

    let total: BigRational = a.iter().fold(BigRational::zero(), |acc, w| acc + w);
    let weights = ms
        .iter()
        .zip(&a)
        .map(|(&m, w)| (m, w / &total))
        .collect();
    Ok(AnonymityAssignment { weights })
}

/// Input frequencies over a counting cut: solved weights aggregated by
/// member label. The root can only ever be a singleton cut member (any
/// second member would share its paths) and is counted under its unique
/// child's label, the input every covered agent shares.
pub fn compute_frequencies(view: &View, cut: &Cut) -> Result<FrequencyMap, CountingError> {
    let solved = solve_anonymities(view, cut)?;
    let mut entries: BTreeMap<InputLabel, BigRational> = BTreeMap::new();
    for (m, w) in solved.iter() {
        let node = if m == ROOT {
            unique_child(view, m).expect("solved members have unique children")
        } else {
            m
        };
        let label = view.label(node).expect("non-root nodes are labeled").clone();
        let slot = entries.entry(label).or_insert_with(BigRational::zero);
        *slot += w;
    }
    Ok(FrequencyMap { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::view::{RawNode, ViewKind};
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn lab(s: &str) -> InputLabel {
        InputLabel::new(s).unwrap()
    }

    fn raw(parent: usize, label: &str, red: &[(usize, u64)]) -> RawNode {
        RawNode {
            parent: Some(parent),
            label: Some(lab(label)),
            red_in: red.iter().map(|&(s, m)| (s, BigUint::from(m))).collect(),
        }
    }

    fn root() -> RawNode {
        RawNode { parent: None, label: None, red_in: vec![] }
    }

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Two input classes, seven agents worth of structure. Level 2 is the
    /// only counting level; its four classes c1..c4 expose pairwise as
    /// (c1,c2), (c2,c3), (c3,c4) with one doubled multiplicity, forcing
    /// a(c1) = a(c2) = a(c3) = 2 a(c4).
    fn four_class_view() -> (View, [NodeId; 4]) {
        let nodes = vec![
            root(),
            raw(0, "cyan", &[]),            // 1: P
            raw(0, "yellow", &[]),          // 2: Q
            raw(1, "cyan", &[(2, 1)]),      // 3: p1
            raw(2, "yellow", &[(1, 1)]),    // 4: q1, heard P once
            raw(2, "yellow", &[(1, 2)]),    // 5: q2, heard P twice
            raw(3, "cyan", &[(4, 1)]),      // 6: c1
            raw(3, "cyan", &[(5, 1)]),      // 7: c2
            raw(4, "yellow", &[]),          // 8: c3
            raw(5, "yellow", &[]),          // 9: c4
            raw(6, "cyan", &[(7, 1)]),      // 10: c1'
            raw(7, "cyan", &[(6, 1), (8, 1)]), // 11: c2'
            raw(8, "yellow", &[(7, 1), (9, 1)]), // 12: c3'
            raw(9, "yellow", &[(8, 2)]),    // 13: c4'
        ];
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        (v, [6, 7, 8, 9])
    }

    #[test]
    fn counting_levels_skip_root_and_deepest() {
        let leaf = View::new_leaf(&lab("a"));
        assert_eq!(counting_levels(&leaf), Vec::<i32>::new());
        let (v, _) = four_class_view();
        assert_eq!(counting_levels(&v), vec![2]);
    }

    #[test]
    fn exposed_pairs_need_mutual_reds() {
        let (v, [c1, c2, c3, c4]) = four_class_view();
        // q1 sends into c2' but c2 does not send into q1's child, so no
        // pair crosses the levels
        assert_eq!(exposed_pairs(&v), vec![(c1, c2), (c2, c3), (c3, c4)]);
    }

    #[test]
    fn cut_must_meet_every_path_once() {
        let (v, [c1, c2, c3, _]) = four_class_view();
        assert!(Cut::new(&v, [c1, c2, c3]).is_err()); // c4 branch uncovered
        assert!(Cut::new(&v, [1, 3]).is_err()); // two on one path
        assert_eq!(Cut::new(&v, [99]), Err(CountingError::UnknownNode(99)));
        assert!(Cut::new(&v, [1, 4, 5]).is_ok()); // P, q1, q2: a cut, not counting
    }

    #[test]
    fn four_class_frequencies_and_population() {
        let (v, [c1, c2, c3, c4]) = four_class_view();
        let cuts = counting_cuts(&v).unwrap();
        let level2 = Cut::new(&v, [c1, c2, c3, c4]).unwrap();
        assert_eq!(cuts, vec![level2.clone()]);
        assert_eq!(dominant_counting_cut(&v).unwrap(), Some(level2.clone()));

        let solved = solve_anonymities(&v, &level2).unwrap();
        assert_eq!(solved.weight(c1), Some(&rational(2, 7)));
        assert_eq!(solved.weight(c2), Some(&rational(2, 7)));
        assert_eq!(solved.weight(c3), Some(&rational(2, 7)));
        assert_eq!(solved.weight(c4), Some(&rational(1, 7)));

        let freq = compute_frequencies(&v, &level2).unwrap();
        assert_eq!(freq.get(&lab("cyan")), Some(&rational(4, 7)));
        assert_eq!(freq.get(&lab("yellow")), Some(&rational(3, 7)));
        assert_eq!(freq.total(), BigRational::one());

        // two agents known to sit in c1 pin the population at 7
        assert_eq!(solved.implied_total(c1, 2), Some(rational(7, 1)));
    }

    #[test]
    fn singleton_root_cut_counts_uniform_inputs() {
        let v = View::new_leaf(&lab("a"));
        let cuts = counting_cuts(&v).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].members(), &[ROOT]);
        let dom = dominant_counting_cut(&v).unwrap().unwrap();
        let freq = compute_frequencies(&v, &dom).unwrap();
        assert_eq!(freq.get(&lab("a")), Some(&BigRational::one()));
        assert_eq!(freq.len(), 1);
    }

    /// Two stacked counting levels: the shallower set strictly dominates.
    fn two_level_view() -> (View, Cut, Cut) {
        let nodes = vec![
            root(),
            raw(0, "a", &[]),          // 1: x
            raw(0, "b", &[]),          // 2: y
            raw(1, "a", &[(2, 1)]),    // 3: x1
            raw(2, "b", &[(1, 1)]),    // 4: y1
            raw(3, "a", &[(4, 1)]),    // 5: x2
            raw(4, "b", &[(3, 1)]),    // 6: y2
        ];
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        let a = Cut::new(&v, [1, 2]).unwrap();
        let b = Cut::new(&v, [3, 4]).unwrap();
        (v, a, b)
    }

    #[test]
    fn shallower_cut_dominates_deeper() {
        let (v, a, b) = two_level_view();
        assert_eq!(counting_cuts(&v).unwrap(), vec![a.clone(), b.clone()]);
        assert!(dominates(&a, &b, &v).unwrap());
        assert!(!dominates(&b, &a, &v).unwrap());
        assert!(!dominates(&a, &a, &v).unwrap(), "dominance is strict");
        assert_eq!(dominant_counting_cut(&v).unwrap(), Some(a));
    }

    #[test]
    fn incomparable_cuts_have_no_dominant() {
        // generalized view with two counting cuts sharing two members:
        // {s, v, w} and {v, w, s'}; a shared member never has a strict
        // ancestor in the other cut, so neither dominates
        let nodes = vec![
            root(),
            raw(0, "a", &[]),          // 1: u
            raw(0, "d", &[]),          // 2: s
            raw(1, "b", &[]),          // 3: v
            raw(1, "c", &[]),          // 4: w
            raw(2, "e", &[(4, 1)]),    // 5: s'
            raw(3, "f", &[(4, 1)]),    // 6: v'
            raw(4, "g", &[(3, 1), (2, 1), (5, 1)]), // 7: w'
            raw(5, "h", &[(4, 1)]),    // 8: s''
        ];
        let v = View::from_parts(ViewKind::Generalized, nodes, None).unwrap();
        let cuts = counting_cuts(&v).unwrap();
        let first = Cut::new(&v, [2, 3, 4]).unwrap();
        let second = Cut::new(&v, [3, 4, 5]).unwrap();
        assert_eq!(cuts, vec![first.clone(), second.clone()]);
        assert!(!dominates(&first, &second, &v).unwrap());
        assert!(!dominates(&second, &first, &v).unwrap());
        assert_eq!(dominant_counting_cut(&v).unwrap(), None);
    }

    #[test]
    fn contradictory_ratio_cycle_is_rejected() {
        // triangle of exposed pairs, each edge claiming "twice the
        // neighbor": going around multiplies a weight by 8
        let nodes = vec![
            root(),
            raw(0, "a", &[]),                // 1: x
            raw(0, "b", &[]),                // 2: y
            raw(0, "c", &[]),                // 3: z
            raw(1, "d", &[(2, 2), (3, 1)]),  // 4: x'
            raw(2, "e", &[(1, 1), (3, 2)]),  // 5: y'
            raw(3, "f", &[(2, 1), (1, 2)]),  // 6: z'
        ];
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        let cut = Cut::new(&v, [1, 2, 3]).unwrap();
        assert_eq!(solve_anonymities(&v, &cut), Err(CountingError::Inconsistent));
    }

    #[test]
    fn unexposed_members_are_disconnected() {
        let nodes = vec![
            root(),
            raw(0, "a", &[]),   // 1: x
            raw(0, "b", &[]),   // 2: y
            raw(1, "a", &[]),   // 3: x'
            raw(2, "b", &[]),   // 4: y'
        ];
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        let cut = Cut::new(&v, [1, 2]).unwrap();
        assert_eq!(solve_anonymities(&v, &cut), Err(CountingError::Disconnected));
        assert_eq!(counting_cuts(&v).unwrap(), vec![]);
        assert_eq!(dominant_counting_cut(&v).unwrap(), None);
    }

    #[test]
    fn three_singleton_census() {
        // three classes of one agent each, inputs a, a, b; all mutual
        // multiplicities 1, so the census is the plain average
        let nodes = vec![
            root(),
            raw(0, "a", &[]),          // 1: u
            raw(0, "b", &[]),          // 2: w
            raw(1, "a", &[(1, 1)]),    // 3: x
            raw(1, "a", &[(1, 2)]),    // 4: y
            raw(2, "b", &[(2, 1)]),    // 5: z
            raw(3, "a", &[(4, 1)]),    // 6: x'
            raw(4, "a", &[(3, 1), (5, 1)]), // 7: y'
            raw(5, "b", &[(4, 1)]),    // 8: z'
        ];
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        assert_eq!(counting_levels(&v), vec![1]);
        let cut = Cut::new(&v, v.nodes_at_depth(1)).unwrap();
        let freq = compute_frequencies(&v, &cut).unwrap();
        assert_eq!(freq, FrequencyMap::census([lab("a"), lab("a"), lab("b")].iter()));
        assert_eq!(freq.get(&lab("a")), Some(&rational(2, 3)));
        assert_eq!(freq.get(&lab("b")), Some(&rational(1, 3)));
    }

    #[test]
    fn signatures_track_child_structure() {
        let (v, a, b) = two_level_view();
        assert!(cuts_isomorphic(&a, &v, &a, &v).unwrap());
        assert!(!cuts_isomorphic(&a, &v, &b, &v).unwrap());

        // doubling one mutual multiplicity changes the child codes
        let nodes = vec![
            root(),
            raw(0, "a", &[]),
            raw(0, "b", &[]),
            raw(1, "a", &[(2, 2)]),
            raw(2, "b", &[(1, 1)]),
            raw(3, "a", &[(4, 1)]),
            raw(4, "b", &[(3, 1)]),
        ];
        let w = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        let aw = Cut::new(&w, [1, 2]).unwrap();
        assert!(!cuts_isomorphic(&a, &v, &aw, &w).unwrap());

        // leaves have no unique child
        let leaf_cut = Cut::new(&v, [5, 6]).unwrap();
        assert_eq!(
            cut_signature(&v, &leaf_cut),
            Err(CountingError::NoUniqueChild(5))
        );
    }

    #[test]
    fn enumeration_budget_is_enforced() {
        let (v, _) = four_class_view();
        assert_eq!(
            counting_cuts_budgeted(&v, 3),
            Err(CountingError::SearchBudget(3))
        );
    }

    #[test]
    fn census_and_singleton_helpers() {
        let inputs = [lab("b"), lab("a"), lab("b")];
        let census = FrequencyMap::census(inputs.iter());
        assert_eq!(census.get(&lab("a")), Some(&rational(1, 3)));
        assert_eq!(census.get(&lab("b")), Some(&rational(2, 3)));
        assert_eq!(census.total(), BigRational::one());
        let single = FrequencyMap::singleton(lab("a"));
        assert_eq!(single.get(&lab("a")), Some(&BigRational::one()));
        assert_eq!(serde_json::to_string(&single).unwrap(), r#"[["a","1","1"]]"#);
    }

    /// One level of five classes in a path of exposed pairs, with known
    /// ground-truth anonymities g and per-edge scale factors k: the edge
    /// between members i and i+1 carries mult(i -> child(i+1)) = k_i g_i
    /// and mult(i+1 -> child(i)) = k_i g_{i+1}, so g itself satisfies
    /// every equation.
    fn path_fixture(g: &[u64; 5], k: &[u64; 4], labels: &[bool; 5]) -> (View, Cut) {
        let mut nodes = vec![root()];
        for i in 0..5 {
            // distinct red multiplicities from the root keep sibling
            // codes unique even under equal labels
            nodes.push(raw(0, if labels[i] { "a" } else { "b" }, &[(0, i as u64 + 1)]));
        }
        for i in 0..5usize {
            let mut red = Vec::new();
            if i > 0 {
                red.push((i, k[i - 1] * g[i - 1])); // member i-1 is node i
            }
            if i < 4 {
                red.push((i + 2, k[i] * g[i + 1])); // member i+1 is node i+2
            }
            nodes.push(raw(i + 1, if labels[i] { "a" } else { "b" }, &red));
        }
        let v = View::from_parts(ViewKind::Standard, nodes, None).unwrap();
        let cut = Cut::new(&v, 1..=5).unwrap();
        (v, cut)
    }

    proptest! {
        #[test]
        fn solved_weights_match_ground_truth(
            g in proptest::array::uniform5(1u64..=9),
            k in proptest::array::uniform4(1u64..=5),
            labels in proptest::array::uniform5(proptest::bool::ANY),
        ) {
            let (v, cut) = path_fixture(&g, &k, &labels);
            let total: u64 = g.iter().sum();
            let solved = solve_anonymities(&v, &cut).unwrap();
            for i in 0..5 {
                prop_assert_eq!(
                    solved.weight(i + 1).unwrap(),
                    &rational(g[i] as i64, total as i64)
                );
            }
            let freq = compute_frequencies(&v, &cut).unwrap();
            prop_assert_eq!(freq.total(), BigRational::one());
            let a_mass: u64 = (0..5).filter(|&i| labels[i]).map(|i| g[i]).sum();
            if a_mass > 0 {
                prop_assert_eq!(
                    freq.get(&lab("a")).unwrap(),
                    &rational(a_mass as i64, total as i64)
                );
            }
        }

        #[test]
        fn free_variable_choice_is_irrelevant(
            g in proptest::array::uniform5(1u64..=9),
            k in proptest::array::uniform4(1u64..=5),
        ) {
            let (v, cut) = path_fixture(&g, &k, &[true, false, true, false, true]);
            let reference = solve_anonymities_from(&v, &cut, Some(0)).unwrap();
            for s in 1..5 {
                prop_assert_eq!(
                    &solve_anonymities_from(&v, &cut, Some(s)).unwrap(),
                    &reference
                );
            }
        }
    }
}
