//! Deterministic DOT export for debugging and snapshots.

use super::{canonical_code, NodeId, View, ROOT};
use std::fmt::Write;

impl View {
    /// Graphviz text: black edges solid, red edges dashed and labeled with
    /// their multiplicity, the bottom node double-circled. Node order is
    /// fixed by canonical codes, so equal views print identically.
    pub fn to_dot(&self, graph_name: &str) -> String {
        let mut ids: Vec<NodeId> = self.node_ids().collect();
        let mut codes: Vec<(Vec<u8>, NodeId)> =
            ids.iter().map(|&v| (canonical_code(self, v), v)).collect();
        codes.sort();
        ids = codes.into_iter().map(|(_, v)| v).collect();
        let rank: std::collections::HashMap<NodeId, usize> =
            ids.iter().copied().enumerate().map(|(i, v)| (v, i)).collect();

        let mut out = String::new();
        let _ = writeln!(out, "digraph {} {{", sanitize(graph_name));
        let _ = writeln!(out, "  rankdir=TB;");
        for (i, &v) in ids.iter().enumerate() {
            let label = match self.label(v) {
                None => "r".to_string(),
                Some(l) => escape(l.as_str()),
            };
            let shape = if self.bottom() == Some(v) {
                "doublecircle"
            } else if v == ROOT {
                "square"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  n{} [label=\"{}\" shape={}];", i, label, shape);
        }
        // Black edges in source order, red edges after, both by rank.
        let mut black: Vec<(usize, usize)> = Vec::new();
        let mut red: Vec<(usize, usize, String)> = Vec::new();
        for &v in &ids {
            for &c in self.children(v) {
                black.push((rank[&v], rank[&c]));
            }
            for (s, m) in self.red_in(v) {
                red.push((rank[s], rank[&v], m.to_string()));
            }
        }
        black.sort();
        red.sort();
        for (a, b) in black {
            let _ = writeln!(out, "  n{} -> n{};", a, b);
        }
        for (a, b, m) in red {
            let _ = writeln!(
                out,
                "  n{} -> n{} [style=dashed color=red label=\"\u{00d7}{}\" constraint=false];",
                a, b, m
            );
        }
        out.push_str("}\n");
        out
    }
}

fn sanitize(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if cleaned.is_empty() || cleaned.chars().next().unwrap().is_ascii_digit() {
        format!("g_{cleaned}")
    } else {
        cleaned
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
