//! Canonical binary serialization of views.
//!
//! Layout: one kind byte, the node count, then the nodes in a canonical
//! depth-first order (children visited in canonical-code order), then the
//! bottom marker. Per node: parent position + 1 (0 marks the root), the
//! length-prefixed label for non-root nodes, and the inbound red edges as
//! (source position, multiplicity) pairs sorted by position. All integers
//! are unsigned LEB128 varints; multiplicities use the same varint form with
//! no size limit beyond a defensive cap.
//!
//! Because node order is derived from canonical codes, two views serialize
//! to the same bytes exactly when they are isomorphic. Decoding accepts any
//! node order (re-validating everything), so foreign or adversarial bytes
//! round-trip into validated views or fail cleanly.

use super::{CodeCtx, CodeId, Mult, NodeId, RawNode, View, ViewError, ViewKind, ROOT};
use crate::label::InputLabel;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("input ends mid-field")]
    Truncated,
    #[error("unconsumed trailing bytes")]
    TrailingBytes,
    #[error("unknown view kind byte {0}")]
    BadKind(u8),
    #[error("varint exceeds the size cap")]
    Oversized,
    #[error("invalid label bytes")]
    BadLabel,
    #[error("node reference out of range")]
    BadIndex,
    #[error("structure invalid: {0}")]
    Invalid(#[from] ViewError),
}

/// Defensive cap on varint length: multiplicities in honest runs fit a few
/// bytes; adversarial payloads must not allocate unboundedly.
const MAX_VARINT_BYTES: usize = 256;

pub(crate) fn write_varint(out: &mut Vec<u8>, mut x: u64) {
    loop {
        let b = (x & 0x7f) as u8;
        x >>= 7;
        if x == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

pub(crate) fn write_big(out: &mut Vec<u8>, x: &Mult) {
    let mut x = x.clone();
    let mask = Mult::from(0x7fu32);
    loop {
        let b = (&x & &mask).to_u8().expect("7-bit chunk");
        x >>= 7;
        if x.is_zero() {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, DecodeError> {
        let b = *self.bytes.get(self.at).ok_or(DecodeError::Truncated)?;
        self.at += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64, DecodeError> {
        let mut x: u64 = 0;
        for i in 0.. {
            if i >= 10 {
                return Err(DecodeError::Oversized);
            }
            let b = self.u8()?;
            let low = (b & 0x7f) as u64;
            x = low.checked_shl(7 * i as u32).and_then(|v| x.checked_add(v)).ok_or(DecodeError::Oversized)?;
            if b & 0x80 == 0 {
                return Ok(x);
            }
        }
        unreachable!()
    }

    fn big(&mut self) -> Result<Mult, DecodeError> {
        let mut x = Mult::zero();
        for i in 0..MAX_VARINT_BYTES {
            let b = self.u8()?;
            x |= Mult::from((b & 0x7f) as u32) << (7 * i);
            if b & 0x80 == 0 {
                return Ok(x);
            }
        }
        Err(DecodeError::Oversized)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.bytes.len() - self.at < n {
            return Err(DecodeError::Truncated);
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
}

/// Canonical bytes of `view`. Equal output iff isomorphic input.
pub fn encode_view(view: &View) -> Vec<u8> {
    let mut ctx = CodeCtx::new();
    let codes = ctx.code_view(view);
    encode_with(view, &mut ctx, &codes)
}

/// Serialization body shared with `from_parts`, which already holds a
/// coding of the view. The output depends only on code *content* (the
/// comparison order is isomorphism-invariant), never on the context's
/// interning history, so any context that coded this view produces the
/// same bytes.
pub(super) fn encode_with(view: &View, ctx: &mut CodeCtx, codes: &[CodeId]) -> Vec<u8> {
    let n = view.node_count();

    // Canonical pre-order: children sorted by code.
    let mut order: Vec<NodeId> = Vec::with_capacity(n);
    let mut pos = vec![usize::MAX; n];
    let mut stack = vec![ROOT];
    while let Some(u) = stack.pop() {
        pos[u] = order.len();
        order.push(u);
        let mut kids = view.children(u).to_vec();
        kids.sort_by(|&x, &y| ctx.cmp(codes[x], codes[y]));
        for &k in kids.iter().rev() {
            stack.push(k);
        }
    }
    debug_assert_eq!(order.len(), n, "black tree spans every node");

    let mut out = Vec::new();
    out.push(match view.kind() {
        ViewKind::Standard => 0u8,
        ViewKind::Generalized => 1u8,
    });
    write_varint(&mut out, n as u64);
    for &u in &order {
        match view.parent(u) {
            None => write_varint(&mut out, 0),
            Some(p) => write_varint(&mut out, pos[p] as u64 + 1),
        }
        if u != ROOT {
            let label = view.label(u).expect("non-root nodes are labeled");
            write_varint(&mut out, label.as_bytes().len() as u64);
            out.extend_from_slice(label.as_bytes());
        }
        let mut red: Vec<(usize, &Mult)> =
            view.red_in(u).iter().map(|(s, m)| (pos[*s], m)).collect();
        red.sort_by_key(|&(p, _)| p);
        write_varint(&mut out, red.len() as u64);
        for (p, m) in red {
            write_varint(&mut out, p as u64);
            write_big(&mut out, m);
        }
    }
    match view.bottom() {
        None => write_varint(&mut out, 0),
        Some(b) => write_varint(&mut out, pos[b] as u64 + 1),
    }
    out
}

/// Decodes a view, consuming the whole slice.
pub fn decode_view(bytes: &[u8]) -> Result<View, DecodeError> {
    let (view, used) = decode_view_prefix(bytes)?;
    if used != bytes.len() {
        return Err(DecodeError::TrailingBytes);
    }
    Ok(view)
}

/// Decodes a view from the front of `bytes`, returning it with the number of
/// bytes consumed (the encoding is self-delimiting).
pub(crate) fn decode_view_prefix(bytes: &[u8]) -> Result<(View, usize), DecodeError> {
    let mut cur = Cursor { bytes, at: 0 };
    let kind = match cur.u8()? {
        0 => ViewKind::Standard,
        1 => ViewKind::Generalized,
        k => return Err(DecodeError::BadKind(k)),
    };
    let n = cur.varint()? as usize;
    if n == 0 || n > bytes.len() {
        // Every node costs at least one byte; absurd counts fail fast.
        return Err(if n == 0 { DecodeError::Invalid(ViewError::Empty) } else { DecodeError::Oversized });
    }
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let pmark = cur.varint()? as usize;
        let parent = match pmark {
            0 => None,
            p if p <= n => Some(p - 1),
            _ => return Err(DecodeError::BadIndex),
        };
        let label = match parent {
            None => None,
            Some(_) => {
                let len = cur.varint()? as usize;
                if len == 0 || len > bytes.len() {
                    return Err(DecodeError::BadLabel);
                }
                Some(InputLabel::from_bytes(cur.take(len)?).ok_or(DecodeError::BadLabel)?)
            }
        };
        let red_count = cur.varint()? as usize;
        if red_count > n {
            return Err(DecodeError::BadIndex);
        }
        let mut red_in = Vec::with_capacity(red_count);
        for _ in 0..red_count {
            let src = cur.varint()? as usize;
            if src >= n {
                return Err(DecodeError::BadIndex);
            }
            red_in.push((src, cur.big()?));
        }
        raw.push(RawNode { parent, label, red_in });
    }
    let bmark = cur.varint()? as usize;
    let bottom = match bmark {
        0 => None,
        b if b <= n => Some(b - 1),
        _ => return Err(DecodeError::BadIndex),
    };
    let view = View::from_parts(kind, raw, bottom)?;
    Ok((view, cur.at))
}
