//! Network traces: per-round connected multigraphs plus the agents'
//! inputs, with adversarial generators and a line-oriented file format.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::derived_rng;
use crate::counting::FrequencyMap;
use crate::label::InputLabel;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("agent count must be at least 1")]
    NoAgents,
    #[error("link {0}-{1} is out of range")]
    LinkOutOfRange(usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("round graph is not connected")]
    Disconnected,
    #[error("round {0} has a mismatched agent count")]
    MismatchedRound(usize),
    #[error("trace needs at least one round graph")]
    NoRounds,
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("label {0:?} cannot be written to a trace file")]
    UnportableLabel(String),
}

/// One round's communication topology: an undirected multigraph that is
/// connected on all `n` agents. Parallel links are kept as repeated pairs;
/// self-loops are rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundGraph {
    n: usize,
    links: Vec<(usize, usize)>,
}

impl RoundGraph {
    pub fn new(n: usize, links: impl IntoIterator<Item = (usize, usize)>) -> Result<RoundGraph, TraceError> {
        if n == 0 {
            return Err(TraceError::NoAgents);
        }
        let mut norm = Vec::new();
        for (a, b) in links {
            if a >= n || b >= n {
                return Err(TraceError::LinkOutOfRange(a, b));
            }
            if a == b {
                return Err(TraceError::SelfLoop(a));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        let g = RoundGraph { n, links: norm };
        if !g.is_connected() {
            return Err(TraceError::Disconnected);
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Normalized (min, max) pairs, sorted; parallel links repeat.
    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    /// Neighbors of `p` with link multiplicities, ascending by agent.
    pub fn neighbor_counts(&self, p: usize) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &(a, b) in &self.links {
            let q = match (a == p, b == p) {
                (true, _) => b,
                (_, true) => a,
                _ => continue,
            };
            match out.iter_mut().find(|(o, _)| *o == q) {
                Some((_, c)) => *c += 1,
                None => out.push((q, 1)),
            }
        }
        out.sort_unstable();
        out
    }

    fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut parts = self.n;
        for &(a, b) in &self.links {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                parts -= 1;
            }
        }
        parts == 1
    }
}

/// A finite realization of an adversary: inputs plus round graphs
/// `G_1 .. G_horizon`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkTrace {
    inputs: Vec<InputLabel>,
    graphs: Vec<RoundGraph>,
    seed: u64,
}

impl NetworkTrace {
    pub fn new(
        inputs: Vec<InputLabel>,
        graphs: Vec<RoundGraph>,
        seed: u64,
    ) -> Result<NetworkTrace, TraceError> {
        if inputs.is_empty() {
            return Err(TraceError::NoAgents);
        }
        if graphs.is_empty() {
            return Err(TraceError::NoRounds);
        }
        for (i, g) in graphs.iter().enumerate() {
            if g.n() != inputs.len() {
                return Err(TraceError::MismatchedRound(i + 1));
            }
        }
        Ok(NetworkTrace { inputs, graphs, seed })
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    pub fn horizon(&self) -> usize {
        self.graphs.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inputs(&self) -> &[InputLabel] {
        &self.inputs
    }

    pub fn input(&self, p: usize) -> &InputLabel {
        &self.inputs[p]
    }

    /// The graph of round `t`, 1-based.
    pub fn graph(&self, t: usize) -> &RoundGraph {
        assert!((1..=self.graphs.len()).contains(&t), "round {t} beyond horizon");
        &self.graphs[t - 1]
    }

    /// Exact input census: the function the algorithms must converge to.
    pub fn census(&self) -> FrequencyMap {
        FrequencyMap::census(self.inputs.iter())
    }

    /// The trace with round 1 dropped: same inputs, graphs `G_2 ..`.
    /// The history tree of the shifted trace is what remains after every
    /// agent forgets the first round of observations.
    pub fn shift(&self) -> Result<NetworkTrace, TraceError> {
        NetworkTrace::new(self.inputs.clone(), self.graphs[1..].to_vec(), self.seed)
    }

    /// Line-oriented text form: `n=.. seed=..`, an `inputs=` line, then
    /// one `t: a-b a-b` line per round with 1-based agents.
    pub fn to_text(&self) -> Result<String, TraceError> {
        let mut out = String::new();
        let _ = writeln!(out, "n={} seed={}", self.n(), self.seed);
        let mut labels = Vec::new();
        for lab in &self.inputs {
            let s = lab.as_str();
            if s.contains([',', ' ', '\t', '\n']) {
                return Err(TraceError::UnportableLabel(s.to_owned()));
            }
            labels.push(s);
        }
        let _ = writeln!(out, "inputs={}", labels.join(","));
        for (i, g) in self.graphs.iter().enumerate() {
            let _ = write!(out, "{}:", i + 1);
            for &(a, b) in g.links() {
                let _ = write!(out, " {}-{}", a + 1, b + 1);
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<NetworkTrace, TraceError> {
        let err = |no: usize, msg: &str| TraceError::Parse(no, msg.to_owned());
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let (no, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let mut n = None;
        let mut seed = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => return Err(err(no, "header fields are n=<int> seed=<int>")),
            }
        }
        let n = n.ok_or_else(|| err(no, "missing or invalid n"))?;
        let seed = seed.ok_or_else(|| err(no, "missing or invalid seed"))?;

        let (no, inputs_line) = lines.next().ok_or_else(|| err(no, "missing inputs line"))?;
        let body = inputs_line
            .strip_prefix("inputs=")
            .ok_or_else(|| err(no, "expected inputs=.."))?;
        let mut inputs = Vec::new();
        for part in body.split(',') {
            inputs.push(InputLabel::new(part).ok_or_else(|| err(no, "empty label"))?);
        }
        if inputs.len() != n {
            return Err(err(no, "inputs length differs from n"));
        }

        let mut graphs = Vec::new();
        for (no, line) in lines {
            let (round, rest) = line
                .split_once(':')
                .ok_or_else(|| err(no, "expected `<round>: links`"))?;
            let round: usize = round
                .trim()
                .parse()
                .map_err(|_| err(no, "bad round number"))?;
            if round != graphs.len() + 1 {
                return Err(err(no, "rounds must be consecutive from 1"));
            }
            let mut links = Vec::new();
            for pair in rest.split_whitespace() {
                let (a, b) = pair
                    .split_once('-')
                    .ok_or_else(|| err(no, "links look like a-b"))?;
                let a: usize = a.parse().map_err(|_| err(no, "bad agent index"))?;
                let b: usize = b.parse().map_err(|_| err(no, "bad agent index"))?;
                if a == 0 || b == 0 {
                    return Err(err(no, "agents are 1-based"));
                }
                links.push((a - 1, b - 1));
            }
            graphs.push(RoundGraph::new(n, links)?);
        }
        NetworkTrace::new(inputs, graphs, seed)
    }
}

/// The built-in adversaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    RandomConnected,
    PathRotating,
    Ring,
    StarRotating,
    StaticPath,
    TwoCliqueBridge,
}

/// Deterministic function of (kind, n, horizon, seed); every round graph
/// is connected by construction.
pub fn generate_trace(
    kind: TraceKind,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<NetworkTrace, TraceError> {
    if n == 0 {
        return Err(TraceError::NoAgents);
    }
    if horizon == 0 {
        return Err(TraceError::NoRounds);
    }
    let mut graphs = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let links = round_links(kind, n, t as u64, seed);
        graphs.push(RoundGraph::new(n, links).expect("generators emit connected graphs"));
    }
    let inputs = (0..n)
        .map(|_| InputLabel::new("a").unwrap())
        .collect();
    // inputs are placeholders here; experiment configs overwrite them
    NetworkTrace::new(inputs, graphs, seed)
}

fn round_links(kind: TraceKind, n: usize, t: u64, seed: u64) -> Vec<(usize, usize)> {
    if n == 1 {
        return Vec::new();
    }
    match kind {
        TraceKind::StaticPath => (0..n - 1).map(|i| (i, i + 1)).collect(),
        TraceKind::PathRotating => {
            // same path shape, new agent order every round
            let at = |i: usize| (i + t as usize) % n;
            (0..n - 1).map(|i| (at(i), at(i + 1))).collect()
        }
        TraceKind::Ring => {
            if n == 2 {
                vec![(0, 1)]
            } else {
                (0..n).map(|i| (i, (i + 1) % n)).collect()
            }
        }
        TraceKind::StarRotating => {
            let c = t as usize % n;
            (0..n).filter(|&i| i != c).map(|i| (c, i)).collect()
        }
        TraceKind::TwoCliqueBridge => {
            let k = n / 2;
            let mut links = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    links.push((i, j));
                }
            }
            for i in k..n {
                for j in i + 1..n {
                    links.push((i, j));
                }
            }
            links.push((t as usize % k, k + t as usize % (n - k)));
            links
        }
        TraceKind::RandomConnected => {
            let mut rng = derived_rng(seed, "trace.random_connected", t);
            let mut links = uniform_spanning_tree(n, &mut rng);
            let extra = rng.gen_range(0..=n);
            for _ in 0..extra {
                let a = rng.gen_range(0..n);
                let mut b = rng.gen_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                links.push((a, b));
            }
            links
        }
    }
}

/// Aldous-Broder walk on the complete graph: first-entry edges form a
/// uniformly random spanning tree.
fn uniform_spanning_tree(n: usize, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let mut visited = vec![false; n];
    let mut cur = rng.gen_range(0..n);
    visited[cur] = true;
    let mut left = n - 1;
    let mut edges = Vec::with_capacity(left);
    while left > 0 {
        let mut next = rng.gen_range(0..n - 1);
        if next >= cur {
            next += 1;
        }
        if !visited[next] {
            visited[next] = true;
            left -= 1;
            edges.push((cur, next));
        }
        cur = next;
    }
    edges
}

/// Builds a trace from an adversary plus explicit inputs.
pub fn adversary_trace(
    kind: TraceKind,
    inputs: Vec<InputLabel>,
    horizon: usize,
    seed: u64,
) -> Result<NetworkTrace, TraceError> {
    let skeleton = generate_trace(kind, inputs.len(), horizon, seed)?;
    NetworkTrace::new(inputs, skeleton.graphs, seed)
}
