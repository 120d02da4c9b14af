//! Per-round structural checks over a run's view and collective-tree
//! evolution.
//!
//! The checker codes every round's trees into one persistent interning
//! context, so a node keeps its identity across rounds (isomorphic
//! sub-views get the same code id). That identity is what makes "this cut
//! disappeared", "this node was born at round t", and "this tree branched"
//! meaningful between rounds. The engine feeds it each round's agent
//! views, collective tree, and branch-event counts; violations accumulate
//! as human-readable strings in the run summary.
//!
//! Checked invariants (meaningful for runs that never forget levels, i.e.
//! the finite-state algorithm; other algorithms may chop, which voids the
//! premises):
//! - dominance totally orders the collective tree's counting cuts;
//! - the unique children of an exposed pair in the collective tree share
//!   a birth round;
//! - a counting cut can only disappear from a tree in a round where that
//!   tree also branches;
//! - in a round that begins with no counting cut in any agent's view and
//!   in which the collective tree does not branch, the collective tree
//!   gains exactly one counting cut;
//! - branch totals stay at or below n - 1, per view and collectively.

use std::collections::{BTreeSet, HashMap};

use crate::counting::{counting_cuts, dominant_counting_cut, dominates, exposed_pairs};
use crate::netsim::engine::BranchEvents;
use crate::view::{CodeCtx, CodeId, View};

type CutKey = Vec<CodeId>;

pub(crate) struct CutTheoryChecker {
    n: usize,
    ctx: CodeCtx,
    birth: HashMap<CodeId, u64>,
    prev_collective_cuts: BTreeSet<CutKey>,
    prev_view_cuts: Vec<BTreeSet<CutKey>>,
    prev_view_bytes: Vec<Vec<u8>>,
    prev_collective_bytes: Vec<u8>,
    prev_incomparable: bool,
    view_branch_total: Vec<u64>,
    collective_branch_total: u64,
    budget_reported: Vec<bool>,
    collective_budget_reported: bool,
    incomparable_rounds: u64,
    violations: Vec<String>,
    seen_any: bool,
}

impl CutTheoryChecker {
    pub(crate) fn new(n: usize) -> CutTheoryChecker {
        CutTheoryChecker {
            n,
            ctx: CodeCtx::new(),
            birth: HashMap::new(),
            prev_collective_cuts: BTreeSet::new(),
            prev_view_cuts: vec![BTreeSet::new(); n],
            prev_view_bytes: vec![Vec::new(); n],
            prev_collective_bytes: Vec::new(),
            prev_incomparable: false,
            view_branch_total: vec![0; n],
            collective_branch_total: 0,
            budget_reported: vec![false; n],
            collective_budget_reported: false,
            incomparable_rounds: 0,
            violations: Vec::new(),
            seen_any: false,
        }
    }

    pub(crate) fn observe(
        &mut self,
        round: u64,
        views: &[&View],
        collective: &View,
        branch: &BranchEvents,
    ) {
        debug_assert_eq!(views.len(), self.n);

        // Frozen rounds change nothing the checks look at; carry the
        // incomparability count forward and skip the recomputation.
        let unchanged = self.seen_any
            && collective.canonical_bytes() == &self.prev_collective_bytes[..]
            && views
                .iter()
                .zip(&self.prev_view_bytes)
                .all(|(v, prev)| v.canonical_bytes() == &prev[..]);
        if unchanged {
            if self.prev_incomparable {
                self.incomparable_rounds += 1;
            }
            return;
        }

        self.track_budgets(round, branch);

        let collective_codes = self.ctx.code_view(collective);
        for &c in &collective_codes {
            self.birth.entry(c).or_insert(round);
        }

        let mut incomparable_here = false;

        // Collective counting cuts: enumerate once, then run the dominance
        // total-order check and build the identity set for loss tracking.
        let (cur_collective_cuts, collective_enumerated) = match counting_cuts(collective) {
            Ok(cuts) => {
                for i in 0..cuts.len() {
                    for j in i + 1..cuts.len() {
                        let ab = dominates(&cuts[i], &cuts[j], collective).unwrap_or(false);
                        let ba = dominates(&cuts[j], &cuts[i], collective).unwrap_or(false);
                        if !ab && !ba {
                            incomparable_here = true;
                            self.violations.push(format!(
                                "round {round}: collective counting cuts are not totally \
                                 ordered by dominance ({:?} vs {:?})",
                                cuts[i].members(),
                                cuts[j].members()
                            ));
                        }
                    }
                }
                let keys: BTreeSet<CutKey> = cuts
                    .iter()
                    .map(|c| {
                        let mut key: CutKey =
                            c.members().iter().map(|&m| collective_codes[m]).collect();
                        key.sort_unstable();
                        key
                    })
                    .collect();
                (keys, true)
            }
            Err(e) => {
                self.violations
                    .push(format!("round {round}: collective cut enumeration failed: {e}"));
                (self.prev_collective_cuts.clone(), false)
            }
        };

        // Birth-round simultaneity for exposed pairs in the collective tree.
        for (v, u) in exposed_pairs(collective) {
            let cv = collective_codes[collective.children(v)[0]];
            let cu = collective_codes[collective.children(u)[0]];
            let (bv, bu) = (self.birth[&cv], self.birth[&cu]);
            if bv != bu {
                self.violations.push(format!(
                    "round {round}: exposed pair ({v}, {u}) has children born at \
                     rounds {bv} and {bu}"
                ));
            }
        }

        // Per-view counting cuts, loss tracking, and incomparability.
        let mut cur_view_cuts: Vec<BTreeSet<CutKey>> = Vec::with_capacity(self.n);
        for (p, view) in views.iter().enumerate() {
            let codes = self.ctx.code_view(view);
            match counting_cuts(view) {
                Ok(cuts) => {
                    if cuts.len() >= 2 && matches!(dominant_counting_cut(view), Ok(None)) {
                        incomparable_here = true;
                    }
                    let keys: BTreeSet<CutKey> = cuts
                        .iter()
                        .map(|c| {
                            let mut key: CutKey =
                                c.members().iter().map(|&m| codes[m]).collect();
                            key.sort_unstable();
                            key
                        })
                        .collect();
                    if self.seen_any {
                        for lost in self.prev_view_cuts[p].difference(&keys) {
                            if branch.views[p] == 0 {
                                self.violations.push(format!(
                                    "round {round}: agent {p} lost counting cut {lost:?} \
                                     without a branching in its view"
                                ));
                            }
                        }
                    }
                    cur_view_cuts.push(keys);
                }
                Err(e) => {
                    self.violations
                        .push(format!("round {round}: agent {p} cut enumeration failed: {e}"));
                    cur_view_cuts.push(self.prev_view_cuts[p].clone());
                }
            }
        }

        if self.seen_any && collective_enumerated {
            for lost in self.prev_collective_cuts.difference(&cur_collective_cuts) {
                if branch.collective == 0 {
                    self.violations.push(format!(
                        "round {round}: collective tree lost counting cut {lost:?} \
                         without branching"
                    ));
                }
            }
            // Cut-acquisition rule: cutless views plus a branchless
            // collective tree force exactly one new collective cut. The
            // premise holds at the beginning of the round, so it reads the
            // previous round's view cuts: an agent that already owns a cut
            // may discard messages and stall the leaves.
            let none_at_start = self.prev_view_cuts.iter().all(BTreeSet::is_empty);
            if none_at_start && branch.collective == 0 {
                let gained = cur_collective_cuts.difference(&self.prev_collective_cuts).count();
                if gained != 1 {
                    self.violations.push(format!(
                        "round {round}: no view has a counting cut and the collective \
                         tree did not branch, yet it gained {gained} cuts instead of 1"
                    ));
                }
            }
        }

        if incomparable_here {
            self.incomparable_rounds += 1;
        }
        self.prev_incomparable = incomparable_here;
        self.prev_collective_cuts = cur_collective_cuts;
        self.prev_view_cuts = cur_view_cuts;
        self.prev_collective_bytes = collective.canonical_bytes().to_vec();
        self.prev_view_bytes = views.iter().map(|v| v.canonical_bytes().to_vec()).collect();
        self.seen_any = true;
    }

    fn track_budgets(&mut self, round: u64, branch: &BranchEvents) {
        let budget = (self.n as u64).saturating_sub(1);
        self.collective_branch_total += branch.collective;
        if self.collective_branch_total > budget && !self.collective_budget_reported {
            self.collective_budget_reported = true;
            self.violations.push(format!(
                "round {round}: collective tree exceeded its branch budget \
                 ({} > {budget})",
                self.collective_branch_total
            ));
        }
        for (p, &e) in branch.views.iter().enumerate() {
            self.view_branch_total[p] += e;
            if self.view_branch_total[p] > budget && !self.budget_reported[p] {
                self.budget_reported[p] = true;
                self.violations.push(format!(
                    "round {round}: agent {p} exceeded its branch budget \
                     ({} > {budget})",
                    self.view_branch_total[p]
                ));
            }
        }
    }

    pub(crate) fn finish(self) -> (Vec<String>, u64) {
        (self.violations, self.incomparable_rounds)
    }
}
