//! Chop: forgetting the oldest observed round.
//!
//! Deletes every depth-0 node (with its incident edges), reattaches the
//! former depth-1 nodes to the root, and merges nodes whose sub-views have
//! become isomorphic, working upward one level at a time. When two merged
//! nodes had red edges onto a common target, the multiplicities add; red
//! edges *into* a merged pair were already identical (equal codes imply
//! equal inbound structure), so they are kept once rather than summed.
//!
//! Chopping a freshly updated view yields exactly the view the agent would
//! have built had the first communication round never happened, which is
//! what lets bounded-memory algorithms slide their window over time.

use super::code::{normalize_red, CodeCtx, CodeId, NodeKey};
use super::update::build_from_codes;
use super::{View, ViewError, ViewKind, ROOT};

impl View {
    /// Removes level 0 and re-merges; height decreases by exactly one.
    /// Chopping the root-only view is an error, as is chopping a
    /// generalized view (levels interleave there).
    pub fn chop(&self) -> Result<View, ViewError> {
        self.chop_in(&mut CodeCtx::new())
    }

    /// [`View::chop`] against a caller-owned code context (see
    /// [`View::update_in`]).
    pub(crate) fn chop_in(&self, ctx: &mut CodeCtx) -> Result<View, ViewError> {
        if self.kind() != ViewKind::Standard {
            return Err(ViewError::StandardRequired);
        }
        if self.height() == 0 {
            return Err(ViewError::ChopRootOnly);
        }
        let n = self.node_count();
        let root_cid = ctx.intern(NodeKey { label: None, parent: None, red_in: vec![] });
        let mut image: Vec<Option<CodeId>> = vec![None; n];
        image[ROOT] = Some(root_cid);

        // Nodes grouped by depth, ascending; depth-0 nodes get no image.
        let maxd = self.max_depth();
        for d in 1..=maxd {
            for u in self.nodes_at_depth(d) {
                let parent_img = if d == 1 {
                    root_cid
                } else {
                    image[self.parent(u).expect("non-root")].expect("parent one level up")
                };
                // Red sources sit one level up; at d == 1 they were deleted.
                let red = if d == 1 {
                    vec![]
                } else {
                    normalize_red(self.red_in(u).iter().map(|(s, m)| {
                        (image[*s].expect("source one level up"), m.clone())
                    }))
                };
                let key = NodeKey {
                    label: self.label(u).cloned(),
                    parent: Some(parent_img),
                    red_in: red,
                };
                image[u] = Some(ctx.intern(key));
            }
        }

        let bottom = self.bottom().map(|b| image[b].unwrap_or(root_cid));
        // The context may hold codes from other views; keep only the images
        // (which include the root, set above).
        let all: Vec<CodeId> = image.into_iter().flatten().collect();
        build_from_codes(ctx, &all, ViewKind::Standard, bottom)
    }
}
