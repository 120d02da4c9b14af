//! Input labels carried by the leaves of level 0.

use serde::{Deserialize, Serialize};
use std::fmt;

/// An agent's observable input: an arbitrary non-empty byte string.
///
/// Labels are the only payload agents start with; everything else an agent
/// knows is derived from message exchanges. Two agents with equal labels are
/// indistinguishable at round 0.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputLabel(String);

impl InputLabel {
    /// Creates a label. Returns `None` for the empty string, which is
    /// reserved so that serialized views can distinguish "no label" cheaply.
    pub fn new(s: impl Into<String>) -> Option<Self> {
        let s = s.into();
        if s.is_empty() {
            None
        } else {
            Some(InputLabel(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }

    /// Decodes a label from raw bytes, rejecting empty or non-UTF-8 input.
    pub fn from_bytes(b: &[u8]) -> Option<Self> {
        let s = std::str::from_utf8(b).ok()?;
        Self::new(s)
    }
}

impl fmt::Display for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for InputLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "label({:?})", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty() {
        assert!(InputLabel::new("").is_none());
        assert!(InputLabel::from_bytes(b"").is_none());
    }

    #[test]
    fn roundtrips_bytes() {
        let l = InputLabel::new("cyan").unwrap();
        assert_eq!(InputLabel::from_bytes(l.as_bytes()).unwrap(), l);
    }

    #[test]
    fn rejects_invalid_utf8() {
        assert!(InputLabel::from_bytes(&[0xff, 0xfe]).is_none());
    }
}
