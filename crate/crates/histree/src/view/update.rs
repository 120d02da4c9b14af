//! Match-and-merge: growing a view by one round, and folding many views
//! into one compound.
//!
//! Merging identifies nodes with isomorphic sub-views. Since a node's
//! canonical code *is* its sub-view up to isomorphism, and a code fully
//! determines label, parent code and inbound red edges, the merged structure
//! is simply the set of distinct codes occurring in any participant: no
//! arithmetic is needed for old nodes. Summation of red multiplicities
//! happens exactly where the operations introduce genuinely new edges (the
//! fold of isomorphic incoming views onto the new bottom child) or where
//! chop collapses sources (see `chop`).

use super::code::{normalize_red, CodeCtx, CodeId, NodeKey};
use super::{Mult, RawNode, View, ViewError, ViewKind};
use crate::label::InputLabel;
use num_traits::Zero;
use std::collections::HashMap;

/// Rebuilds a view from a set of interned codes. Requires the set to be
/// closed under parent and red-source references, which every caller
/// guarantees by including whole coded views.
pub(super) fn build_from_codes(
    ctx: &CodeCtx,
    ids: &[CodeId],
    kind: ViewKind,
    bottom: Option<CodeId>,
) -> Result<View, ViewError> {
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let index: HashMap<CodeId, usize> =
        sorted.iter().copied().enumerate().map(|(i, c)| (c, i)).collect();
    let at = |c: CodeId| *index.get(&c).expect("code set closed under references");
    let raw: Vec<RawNode> = sorted
        .iter()
        .map(|&c| {
            let key = ctx.key(c);
            RawNode {
                parent: key.parent.map(&at),
                label: key.label.clone(),
                red_in: key.red_in.iter().map(|(s, m)| (at(*s), m.clone())).collect(),
            }
        })
        .collect();
    View::from_parts(kind, raw, bottom.map(&at))
}

impl View {
    /// One communication round: merges each incoming view into this one by
    /// canonical code, then attaches a new bottom child labeled `input`,
    /// with a red edge from the image of every incoming view's bottom whose
    /// multiplicity is that view's fold count (the number of identical
    /// messages it represents).
    ///
    /// `kind` selects the mode: [`ViewKind::Standard`] requires every
    /// participant to be standard and of equal height (the lock-step case);
    /// [`ViewKind::Generalized`] accepts arbitrary heights and kinds.
    pub fn update(
        &self,
        incoming: &[(View, Mult)],
        input: &InputLabel,
        kind: ViewKind,
    ) -> Result<View, ViewError> {
        self.update_in(incoming, input, kind, &mut CodeCtx::new())
    }

    /// [`View::update`] against a caller-owned code context, so repeated
    /// updates over overlapping views skip re-interning shared structure.
    /// The context only memoizes; the result never depends on what else it
    /// has coded.
    pub(crate) fn update_in(
        &self,
        incoming: &[(View, Mult)],
        input: &InputLabel,
        kind: ViewKind,
        ctx: &mut CodeCtx,
    ) -> Result<View, ViewError> {
        let own_bottom = self.bottom().ok_or(ViewError::BottomRequired)?;
        if kind == ViewKind::Standard {
            if self.kind() != ViewKind::Standard {
                return Err(ViewError::StandardRequired);
            }
            for (w, _) in incoming {
                if w.kind() != ViewKind::Standard {
                    return Err(ViewError::StandardRequired);
                }
                if w.height() != self.height() {
                    return Err(ViewError::HeightMismatch(self.height(), w.height()));
                }
            }
        }

        let own_codes = ctx.code_view(self);
        let mut union: Vec<CodeId> = own_codes.clone();
        let mut bottom_folds: Vec<(CodeId, Mult)> = Vec::new();
        for (w, fold) in incoming {
            let wb = w.bottom().ok_or(ViewError::BottomRequired)?;
            let codes = ctx.code_view(w);
            union.extend_from_slice(&codes);
            if fold.is_zero() {
                return Err(ViewError::ZeroMultiplicity(union.len()));
            }
            bottom_folds.push((codes[wb], fold.clone()));
        }

        let new_key = NodeKey {
            label: Some(input.clone()),
            parent: Some(own_codes[own_bottom]),
            red_in: normalize_red(bottom_folds.into_iter()),
        };
        // The new bottom must be a genuinely new node; an existing node with
        // this exact code would stop being mergeable with it (the bottom is
        // a sink, the interior node is not). Lock-step modes cannot hit this
        // because the new child sits one level below everything else. The
        // key may be interned already from an unrelated earlier view in a
        // shared context; it only collides if a *participant* carries it.
        if let Some(existing) = ctx.lookup(&new_key) {
            if union.contains(&existing) {
                return Err(ViewError::BottomCollision);
            }
        }
        let new_cid = ctx.intern(new_key);
        union.push(new_cid);
        build_from_codes(ctx, &union, kind, Some(new_cid))
    }
}

/// Match-and-merges whole views into one compound with no bottom: the
/// collective structure of everything the participants know. `kind`
/// restricts inputs when standard (compounds of lock-step views stay
/// standard); heights may differ in either mode.
pub fn merge_views(views: &[&View], kind: ViewKind) -> Result<View, ViewError> {
    merge_views_in(views, kind, &mut CodeCtx::new())
}

/// [`merge_views`] against a caller-owned code context (see
/// [`View::update_in`]).
pub(crate) fn merge_views_in(
    views: &[&View],
    kind: ViewKind,
    ctx: &mut CodeCtx,
) -> Result<View, ViewError> {
    assert!(!views.is_empty(), "merge of zero views");
    if kind == ViewKind::Standard {
        for v in views {
            if v.kind() != ViewKind::Standard {
                return Err(ViewError::StandardRequired);
            }
        }
    }
    let mut union: Vec<CodeId> = Vec::new();
    for v in views {
        union.extend(ctx.code_view(v));
    }
    build_from_codes(ctx, &union, kind, None)
}
