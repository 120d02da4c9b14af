//! Per-agent algorithm state machines.
//!
//! Four algorithms share one lifecycle: [`AgentState::init`] installs the
//! input and an optional injected state (kept verbatim, malformed or not),
//! [`AgentState::sanitize`] repairs or resets it, [`AgentState::make_message`]
//! serializes the view for broadcast, and [`AgentState::step`] consumes the
//! round's received messages and produces the next state plus a frequency
//! output. `step` sanitizes internally, so callers may drive it directly;
//! the network engine sanitizes once up front to build messages from the
//! same repaired state the step will use.
//!
//! Wire format: a 4-byte magic header, the canonical view serialization,
//! and, for the self-stabilizing algorithm only, one trailing flag byte.
//! The state payload is the same minus the magic; state size is measured in
//! bits of that payload. Malformed messages are never an error: they are
//! dropped and counted, and malformed states reset to the canonical start.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::counting::{
    compute_frequencies, counting_levels, cut_signature, dominant_counting_cut, Cut, CutSignature,
    FrequencyMap,
};
use crate::view::{decode_view_prefix, CodeCtx, Mult, View, ViewKind};
use crate::InputLabel;

/// Leading bytes of every wire message.
pub const MESSAGE_MAGIC: [u8; 4] = *b"HTV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Stateless-start reference: merge everything every round. Assumes a
    /// clean start; the engine refuses to pair it with fault injection.
    Baseline,
    /// Knows the exact agent count and uses it to bound view height, which
    /// makes it self-stabilizing with per-agent memory polynomial in n.
    KnownN,
    /// Knows nothing; a one-bit parity flag coordinates when to forget the
    /// oldest level. Self-stabilizing but with unbounded memory.
    #[serde(rename = "selfstab")]
    SelfStab,
    /// Knows nothing and eventually stops changing state: updates only on
    /// messages that disagree with its own dominant counting cut.
    FiniteState,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algorithm::Baseline => "baseline",
            Algorithm::KnownN => "known_n",
            Algorithm::SelfStab => "selfstab",
            Algorithm::FiniteState => "finite_state",
        };
        f.write_str(s)
    }
}

/// Rounds after which outputs are guaranteed correct, as a function of the
/// agent count and (for the flag-based algorithm) the minimum garbage
/// coefficient across agents at start.
pub fn stabilization_bound(algorithm: Algorithm, n: usize, min_garbage: u64) -> u64 {
    let n = n as u64;
    match algorithm {
        Algorithm::Baseline | Algorithm::KnownN => (2 * n).saturating_sub(2),
        Algorithm::SelfStab => {
            let fresh = (4 * n as i128) - 2 * min_garbage as i128;
            let stale = 2 * min_garbage as i128;
            fresh.max(stale).max(0) as u64
        }
        Algorithm::FiniteState => 3 * n * n,
    }
}

/// State-size ceiling enforced by the count-aware algorithm's sanitizer:
/// 64 * n^3 * ceil(log2(n + 1)) bits. A well-formed view over the cap is
/// chopped until it fits (or becomes the bare root).
pub fn known_n_bit_cap(n: usize) -> u64 {
    64 * (n as u64).pow(3) * ceil_log2(n as u64 + 1)
}

fn ceil_log2(m: u64) -> u64 {
    debug_assert!(m >= 1);
    (0..=63).find(|&k| (1u128 << k) >= m as u128).unwrap()
}

#[derive(Debug, Clone)]
enum Payload {
    /// Decoded, algorithm-acceptable state. `flag` is Some exactly for the
    /// self-stabilizing algorithm.
    Healthy { view: View, flag: Option<u8> },
    /// Injected bytes not yet inspected; resolved by the next sanitize.
    Raw(Vec<u8>),
}

/// One agent's complete algorithm state.
#[derive(Debug, Clone)]
pub struct AgentState {
    algorithm: Algorithm,
    input: InputLabel,
    known_n: Option<usize>,
    payload: Payload,
}

/// Result of one step: the successor state, the round's frequency output,
/// and how many received message copies were dropped (undecodable, wrong
/// shape for the algorithm, or judged redundant by the finite-state rule).
#[derive(Debug)]
pub struct StepOutcome {
    pub state: AgentState,
    pub output: FrequencyMap,
    pub discarded: u64,
}

impl AgentState {
    /// `known_n` is required by [`Algorithm::KnownN`] and ignored otherwise.
    /// `injected` bytes are installed verbatim; validation happens inside
    /// the first sanitize.
    pub fn init(
        algorithm: Algorithm,
        input: &InputLabel,
        known_n: Option<usize>,
        injected: Option<&[u8]>,
    ) -> AgentState {
        assert!(
            algorithm != Algorithm::KnownN || matches!(known_n, Some(k) if k >= 1),
            "the count-aware algorithm needs the agent count"
        );
        let payload = match injected {
            Some(bytes) => Payload::Raw(bytes.to_vec()),
            None => match algorithm {
                Algorithm::FiniteState => Payload::Healthy {
                    view: View::root_only(ViewKind::Generalized),
                    flag: None,
                },
                Algorithm::SelfStab => Payload::Healthy {
                    view: View::new_leaf(input),
                    flag: Some(0),
                },
                _ => Payload::Healthy { view: View::new_leaf(input), flag: None },
            },
        };
        AgentState { algorithm, input: input.clone(), known_n, payload }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn input(&self) -> &InputLabel {
        &self.input
    }

    /// The current view, if the payload has been decoded. Raw injected
    /// states return None until sanitized.
    pub fn view(&self) -> Option<&View> {
        match &self.payload {
            Payload::Healthy { view, .. } => Some(view),
            Payload::Raw(_) => None,
        }
    }

    pub fn flag(&self) -> Option<u8> {
        match &self.payload {
            Payload::Healthy { flag, .. } => *flag,
            Payload::Raw(_) => None,
        }
    }

    /// Canonical state serialization: view bytes plus the flag byte where
    /// the algorithm carries one. Raw payloads count as-is.
    pub fn payload_bytes(&self) -> Vec<u8> {
        match &self.payload {
            Payload::Healthy { view, flag } => {
                let mut out = view.canonical_bytes().to_vec();
                if let Some(f) = flag {
                    out.push(*f);
                }
                out
            }
            Payload::Raw(bytes) => bytes.clone(),
        }
    }

    pub fn state_size_bits(&self) -> u64 {
        8 * self.payload_bytes().len() as u64
    }

    /// Height of the state's view when the payload is well formed for this
    /// algorithm, 0 otherwise. The canonical leaf start scores 1; the
    /// finite-state bare-root start scores 0.
    pub fn garbage_coefficient(&self) -> u64 {
        match &self.payload {
            Payload::Healthy { view, .. } => view.height() as u64,
            Payload::Raw(bytes) => match decode_state(self.algorithm, bytes) {
                Some((view, _)) => view.height() as u64,
                None => 0,
            },
        }
    }

    /// Repairs the state: undecodable or wrong-shape payloads reset to the
    /// canonical start, and the count-aware algorithm additionally resets
    /// over-tall views and chops views over its bit cap. Idempotent.
    pub fn sanitize(self) -> AgentState {
        let AgentState { algorithm, input, known_n, payload } = self;
        let decoded = match payload {
            Payload::Healthy { view, flag } => Some((view, flag)),
            Payload::Raw(bytes) => decode_state(algorithm, &bytes),
        };
        let payload = match algorithm {
            Algorithm::Baseline => match decoded {
                Some((view, _)) => Payload::Healthy { view, flag: None },
                None => Payload::Healthy { view: View::new_leaf(&input), flag: None },
            },
            Algorithm::KnownN => {
                let n = known_n.expect("count-aware state always carries n");
                match decoded {
                    Some((view, _)) if view.height() <= 2 * n - 1 => Payload::Healthy {
                        view: enforce_bit_cap(view, n),
                        flag: None,
                    },
                    _ => Payload::Healthy { view: View::new_leaf(&input), flag: None },
                }
            }
            Algorithm::SelfStab => match decoded {
                Some((view, Some(flag))) => Payload::Healthy { view, flag: Some(flag) },
                _ => Payload::Healthy { view: View::new_leaf(&input), flag: Some(0) },
            },
            Algorithm::FiniteState => match decoded {
                Some((view, _)) => Payload::Healthy { view, flag: None },
                None => Payload::Healthy {
                    view: View::root_only(ViewKind::Generalized),
                    flag: None,
                },
            },
        };
        AgentState { algorithm, input, known_n, payload }
    }

    /// Full wire bytes for this round's broadcast. Expects a sanitized
    /// state; a raw payload is serialized as its sanitized equivalent so
    /// the message always matches what the step will compute from.
    pub fn make_message(&self) -> Vec<u8> {
        let clean;
        let (view, flag) = match &self.payload {
            Payload::Healthy { view, flag } => (view, *flag),
            Payload::Raw(_) => {
                clean = self.clone().sanitize();
                match &clean.payload {
                    Payload::Healthy { view, flag } => (view, *flag),
                    Payload::Raw(_) => unreachable!("sanitize always decodes"),
                }
            }
        };
        let body = view.canonical_bytes();
        let mut out = Vec::with_capacity(4 + body.len() + 1);
        out.extend_from_slice(&MESSAGE_MAGIC);
        out.extend_from_slice(body);
        if let Some(f) = flag {
            out.push(f);
        }
        out
    }

    /// The frequency estimate the current (sanitized) state would report,
    /// without stepping. Used for the round-zero record.
    pub fn output(&self) -> FrequencyMap {
        let clean;
        let state = match &self.payload {
            Payload::Healthy { .. } => self,
            Payload::Raw(_) => {
                clean = self.clone().sanitize();
                &clean
            }
        };
        let view = state.view().expect("sanitized state is healthy");
        let freq = match state.algorithm {
            Algorithm::FiniteState => dominant_cut_frequencies(view),
            _ => level_frequencies(view),
        };
        freq.unwrap_or_else(|| FrequencyMap::singleton(state.input.clone()))
    }

    /// One round: sanitize, decode and fold in the received messages per
    /// the algorithm, and report the new output. `received` pairs message
    /// bytes with the number of identical copies delivered.
    pub fn step(self, received: &[(&[u8], u64)]) -> StepOutcome {
        self.step_cached(received, &mut DomCutCache::new())
    }

    /// Like [`AgentState::step`] but reuses dominant-cut work across calls.
    /// The cache only affects speed, never results, so sharing one across
    /// agents or rounds is always sound.
    pub fn step_cached(self, received: &[(&[u8], u64)], cache: &mut DomCutCache) -> StepOutcome {
        let clean = self.sanitize();
        let AgentState { algorithm, input, known_n, payload } = clean;
        let (view, flag) = match payload {
            Payload::Healthy { view, flag } => (view, flag),
            Payload::Raw(_) => unreachable!("sanitize always decodes"),
        };

        let mut discarded = 0u64;
        let mut incoming: Vec<(View, Option<u8>, u64)> = Vec::new();
        for (bytes, copies) in received {
            match cache.decode(algorithm, bytes) {
                Some((v, f)) => incoming.push((v, f, *copies)),
                None => discarded += copies,
            }
        }

        let stepped = match algorithm {
            Algorithm::Baseline => step_baseline(view, &input, incoming, &mut cache.ctx),
            Algorithm::KnownN => {
                let n = known_n.expect("count-aware carries n");
                step_known_n(view, &input, n, incoming, &mut cache.ctx)
            }
            Algorithm::SelfStab => {
                step_self_stab(view, flag.unwrap_or(0), &input, incoming, &mut cache.ctx)
            }
            Algorithm::FiniteState => step_finite_state(view, &input, incoming, cache),
        };
        discarded += stepped.discarded;
        let output = stepped
            .output
            .unwrap_or_else(|| FrequencyMap::singleton(input.clone()));
        StepOutcome {
            state: AgentState {
                algorithm,
                input,
                known_n,
                payload: Payload::Healthy { view: stepped.view, flag: stepped.flag },
            },
            output,
            discarded,
        }
    }
}

struct Stepped {
    view: View,
    flag: Option<u8>,
    discarded: u64,
    output: Option<FrequencyMap>,
}

fn step_baseline(
    view: View,
    input: &InputLabel,
    incoming: Vec<(View, Option<u8>, u64)>,
    ctx: &mut CodeCtx,
) -> Stepped {
    let mut discarded = 0u64;
    let mut merged: Vec<(View, Mult)> = Vec::new();
    let h = view.height();
    for (v, _, copies) in incoming {
        if v.height() == h {
            merged.push((v, Mult::from(copies)));
        } else {
            discarded += copies;
        }
    }
    let next = view
        .update_in(&merged, input, ViewKind::Standard, ctx)
        .unwrap_or_else(|_| View::new_leaf(input));
    let output = level_frequencies(&next);
    Stepped { view: next, flag: None, discarded, output }
}

fn step_known_n(
    view: View,
    input: &InputLabel,
    n: usize,
    incoming: Vec<(View, Option<u8>, u64)>,
    ctx: &mut CodeCtx,
) -> Stepped {
    let mut h_min = view.height();
    for (v, _, _) in &incoming {
        h_min = h_min.min(v.height());
    }
    let own = chop_to(view, h_min, ctx);
    let merged: Vec<(View, Mult)> = incoming
        .into_iter()
        .map(|(v, _, copies)| (chop_to(v, h_min, ctx), Mult::from(copies)))
        .collect();
    let mut next = own
        .update_in(&merged, input, ViewKind::Standard, ctx)
        .unwrap_or_else(|_| View::new_leaf(input));
    // Forget the oldest round whenever remembering it would exceed the
    // retention window; heights stay at most 2n - 1 after every step.
    while next.height() >= 2 * n {
        match next.chop_in(ctx) {
            Ok(v) => next = v,
            Err(_) => break,
        }
    }
    let output = level_frequencies(&next);
    Stepped { view: next, flag: None, discarded: 0, output }
}

fn eval(height: usize, flag: u8) -> u64 {
    2 * height as u64 + flag as u64
}

fn step_self_stab(
    view: View,
    flag: u8,
    input: &InputLabel,
    incoming: Vec<(View, Option<u8>, u64)>,
    ctx: &mut CodeCtx,
) -> Stepped {
    // Everyone chops to the round's minimizer of 2*height + flag, so all
    // merge participants share one height; the inverted minimizer flag
    // decides whether the merged view sheds a level immediately.
    let (mut best_h, mut best_f) = (view.height(), flag);
    for (v, f, _) in &incoming {
        let f = f.unwrap_or(0);
        if eval(v.height(), f) < eval(best_h, best_f) {
            best_h = v.height();
            best_f = f;
        }
    }
    let own = chop_to(view, best_h, ctx);
    let merged: Vec<(View, Mult)> = incoming
        .into_iter()
        .map(|(v, _, copies)| (chop_to(v, best_h, ctx), Mult::from(copies)))
        .collect();
    let mut next = own
        .update_in(&merged, input, ViewKind::Standard, ctx)
        .unwrap_or_else(|_| View::new_leaf(input));
    let new_flag = 1 - best_f;
    if new_flag == 0 {
        if let Ok(v) = next.chop_in(ctx) {
            next = v;
        }
    }
    let output = level_frequencies(&next);
    Stepped { view: next, flag: Some(new_flag), discarded: 0, output }
}

fn step_finite_state(
    view: View,
    input: &InputLabel,
    incoming: Vec<(View, Option<u8>, u64)>,
    cache: &mut DomCutCache,
) -> Stepped {
    let own_sig = cache.signature(&view);
    let mut discarded = 0u64;
    let mut relevant: Vec<(View, Mult)> = Vec::new();
    for (v, _, copies) in incoming {
        // A message is redundant only when both sides have a dominant
        // counting cut and the cuts are isomorphic; missing or unsolvable
        // cuts keep the message.
        let redundant = match (&own_sig, cache.signature(&v)) {
            (Some(a), Some(b)) => *a == b,
            _ => false,
        };
        if redundant {
            discarded += copies;
        } else {
            relevant.push((v, Mult::from(copies)));
        }
    }
    let next = if !relevant.is_empty() || view.height() == 0 {
        match view.update_in(&relevant, input, ViewKind::Generalized, &mut cache.ctx) {
            Ok(v) => v,
            Err(_) => view,
        }
    } else {
        // Nothing disagrees: the state (and hence its bytes) is frozen.
        view
    };
    let output = cache.frequencies(&next);
    Stepped { view: next, flag: None, discarded, output }
}

fn chop_to(mut view: View, target: usize, ctx: &mut CodeCtx) -> View {
    while view.height() > target {
        match view.chop_in(ctx) {
            Ok(v) => view = v,
            Err(_) => break,
        }
    }
    view
}

fn enforce_bit_cap(mut view: View, n: usize) -> View {
    let cap = known_n_bit_cap(n);
    loop {
        if 8 * view.canonical_bytes().len() as u64 <= cap {
            return view;
        }
        match view.chop() {
            Ok(v) => view = v,
            Err(_) => return view,
        }
    }
}

/// Decodes a state payload (no magic): the view, followed by exactly one
/// flag byte in {0, 1} for the flag-carrying algorithm and nothing for the
/// others. Standard-view algorithms reject generalized payloads; every
/// algorithm requires a bottom, since an agent state is always rooted at
/// the agent's own class.
fn decode_state(algorithm: Algorithm, bytes: &[u8]) -> Option<(View, Option<u8>)> {
    let (view, used) = decode_view_prefix(bytes).ok()?;
    let rest = &bytes[used..];
    let flag = match algorithm {
        Algorithm::SelfStab => {
            if rest.len() != 1 || rest[0] > 1 {
                return None;
            }
            Some(rest[0])
        }
        _ => {
            if !rest.is_empty() {
                return None;
            }
            None
        }
    };
    if algorithm != Algorithm::FiniteState && view.kind() != ViewKind::Standard {
        return None;
    }
    view.bottom()?;
    Some((view, flag))
}

fn decode_message(algorithm: Algorithm, bytes: &[u8]) -> Option<(View, Option<u8>)> {
    let rest = bytes.strip_prefix(&MESSAGE_MAGIC)?;
    decode_state(algorithm, rest)
}

/// Frequencies from the shallowest counting level whose cut solves,
/// scanning deeper on failure. None when no level works.
fn level_frequencies(view: &View) -> Option<FrequencyMap> {
    for t in counting_levels(view) {
        let cut = match Cut::new(view, view.nodes_at_depth(t)) {
            Ok(c) => c,
            Err(_) => continue,
        };
        if let Ok(f) = compute_frequencies(view, &cut) {
            return Some(f);
        }
    }
    None
}

fn dominant_cut_frequencies(view: &View) -> Option<FrequencyMap> {
    let cut = dominant_counting_cut(view).ok().flatten()?;
    compute_frequencies(view, &cut).ok()
}

/// Memo for decode, dominant-cut, and view-coding work. Signatures and
/// frequency maps are keyed by canonical view bytes; they are id-independent
/// and safe to share across isomorphic views (node-id cuts are not, so the
/// solved frequency map is cached instead of the cut). Decoded payloads are
/// keyed by raw message bytes, and the code context remembers interned
/// sub-view codes across rounds. Every entry is a pure function of its key,
/// so the cache only affects speed, never results.
#[derive(Debug, Default)]
pub struct DomCutCache {
    sig: HashMap<Vec<u8>, Option<CutSignature>>,
    freq: HashMap<Vec<u8>, Option<FrequencyMap>>,
    decoded: HashMap<Vec<u8>, Option<(View, Option<u8>)>>,
    decoded_for: Option<Algorithm>,
    ctx: CodeCtx,
}

impl DomCutCache {
    pub fn new() -> DomCutCache {
        DomCutCache::default()
    }

    /// Decode rules differ per algorithm, so the memo resets if it is
    /// shared across algorithms (correct either way, fast for the common
    /// single-algorithm case).
    fn decode(&mut self, algorithm: Algorithm, bytes: &[u8]) -> Option<(View, Option<u8>)> {
        if self.decoded_for != Some(algorithm) {
            self.decoded.clear();
            self.decoded_for = Some(algorithm);
        }
        if let Some(hit) = self.decoded.get(bytes) {
            return hit.clone();
        }
        let parsed = decode_message(algorithm, bytes);
        self.decoded.insert(bytes.to_vec(), parsed.clone());
        parsed
    }

    fn signature(&mut self, view: &View) -> Option<CutSignature> {
        let key = view.canonical_bytes().to_vec();
        if let Some(s) = self.sig.get(&key) {
            return s.clone();
        }
        let s = dominant_counting_cut(view)
            .ok()
            .flatten()
            .and_then(|cut| cut_signature(view, &cut).ok());
        self.sig.insert(key, s.clone());
        s
    }

    fn frequencies(&mut self, view: &View) -> Option<FrequencyMap> {
        let key = view.canonical_bytes().to_vec();
        if let Some(f) = self.freq.get(&key) {
            return f.clone();
        }
        let f = dominant_cut_frequencies(view);
        self.freq.insert(key, f.clone());
        f
    }
}
