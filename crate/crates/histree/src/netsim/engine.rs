//! Experiment configuration and the round-synchronous run loop.
//!
//! A run realizes its trace, faults, and horizon deterministically from the
//! config, then repeats: sanitize every state, serialize every message,
//! deliver along the round's links (one copy per parallel link, identical
//! payloads folded with counts), and step all agents simultaneously into a
//! double buffer. Each round yields one [`RoundRecord`]; the run ends with
//! a [`Summary`]. Identical configs produce byte-identical record streams
//! regardless of worker count: all randomness is drawn before the loop,
//! and worker partitioning only changes who computes a step, not what it
//! computes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::agent::{stabilization_bound, AgentState, Algorithm, DomCutCache, StepOutcome};
use crate::counting::FrequencyMap;
use crate::netsim::checks::CutTheoryChecker;
use crate::netsim::faults::{realize_faults, FaultSpec};
use crate::netsim::oracle::collective_tree_with;
use crate::netsim::trace::{adversary_trace, NetworkTrace, TraceKind};
use crate::view::{CodeCtx, View};
use crate::InputLabel;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("n must be at least 1")]
    BadN,
    #[error("inputs describe {got} agents but n = {want}")]
    InputsMismatch { want: usize, got: usize },
    #[error("input labels must be non-empty")]
    EmptyLabel,
    #[error("unknown adversary kind `{0}`")]
    UnknownAdversary(String),
    #[error("adversary `{kind}` requires `{param}`")]
    MissingAdversaryParam { kind: String, param: &'static str },
    #[error("adversary `{kind}` does not take `{param}`")]
    StrayAdversaryParam { kind: String, param: &'static str },
    #[error("unknown fault kind `{0}`")]
    UnknownFault(String),
    #[error("fault `{kind}` requires `{param}`")]
    MissingFaultParam { kind: String, param: &'static str },
    #[error("fault `{kind}` does not take `{param}`")]
    StrayFaultParam { kind: String, param: &'static str },
    #[error("probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("mid-run corruption cannot nest inside itself")]
    NestedMidRun,
    #[error("mid-run trigger round must be at least 1")]
    BadMidRunRound,
    #[error("the baseline algorithm assumes a clean start; use faults = none")]
    BaselineWithFaults,
    #[error("mid-run corruption voids the premises of the theory checks; disable one")]
    MidRunWithCheck,
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("trace file {path}: {err}")]
    TraceFile { path: String, err: String },
    #[error("trace file disagrees with the config: {0}")]
    TraceMismatch(String),
    #[error("trace generation failed: {0}")]
    Trace(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Agent inputs, either spelled out per agent or as a census of counts
/// (expanded in label order).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputsSpec {
    List(Vec<InputLabel>),
    Census(BTreeMap<InputLabel, usize>),
}

impl InputsSpec {
    fn realize(&self, n: usize) -> Result<Vec<InputLabel>, ConfigError> {
        let inputs: Vec<InputLabel> = match self {
            InputsSpec::List(v) => v.clone(),
            InputsSpec::Census(m) => m
                .iter()
                .flat_map(|(l, &c)| std::iter::repeat(l.clone()).take(c))
                .collect(),
        };
        if inputs.len() != n {
            return Err(ConfigError::InputsMismatch { want: n, got: inputs.len() });
        }
        if inputs.iter().any(|l| l.as_str().is_empty()) {
            return Err(ConfigError::EmptyLabel);
        }
        Ok(inputs)
    }
}

/// Number of rounds to simulate; `auto` means twice the algorithm's
/// stabilization bound (at least 2), so "stays correct" is observed over a
/// window as long as the bound itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HorizonSpec {
    #[default]
    Auto,
    Rounds(u64),
}

impl Serialize for HorizonSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            HorizonSpec::Auto => s.serialize_str("auto"),
            HorizonSpec::Rounds(r) => s.serialize_u64(*r),
        }
    }
}

impl<'de> Deserialize<'de> for HorizonSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = HorizonSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a round count or the string \"auto\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<HorizonSpec, E> {
                Ok(HorizonSpec::Rounds(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<HorizonSpec, E> {
                u64::try_from(v).map(HorizonSpec::Rounds).map_err(|_| {
                    E::invalid_value(de::Unexpected::Signed(v), &"a non-negative round count")
                })
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<HorizonSpec, E> {
                if v == "auto" {
                    Ok(HorizonSpec::Auto)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &"\"auto\""))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Network adversary selection. `kind` is one of the generator names or
/// `file`; only `file` takes `path`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl AdversaryConfig {
    pub fn generator(kind: &str) -> AdversaryConfig {
        AdversaryConfig { kind: kind.to_string(), path: None }
    }
}

/// Fault selection: `kind` plus the parameters that kind takes (`p` for
/// random_bytes, `h` for bogus_view, `round` and `inner` for mid_run).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<FaultConfig>>,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig { kind: "none".into(), p: None, h: None, round: None, inner: None }
    }
}

impl FaultConfig {
    fn to_spec(&self) -> Result<FaultSpec, ConfigError> {
        let kind = self.kind.as_str();
        let stray = |param| ConfigError::StrayFaultParam { kind: kind.into(), param };
        let missing = |param| ConfigError::MissingFaultParam { kind: kind.into(), param };
        let no_params = || -> Result<(), ConfigError> {
            if self.p.is_some() {
                return Err(stray("p"));
            }
            if self.h.is_some() {
                return Err(stray("h"));
            }
            if self.round.is_some() {
                return Err(stray("round"));
            }
            if self.inner.is_some() {
                return Err(stray("inner"));
            }
            Ok(())
        };
        match kind {
            "none" => {
                no_params()?;
                Ok(FaultSpec::None)
            }
            "random_bytes" => {
                if self.h.is_some() {
                    return Err(stray("h"));
                }
                if self.round.is_some() {
                    return Err(stray("round"));
                }
                if self.inner.is_some() {
                    return Err(stray("inner"));
                }
                let p = self.p.ok_or_else(|| missing("p"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(ConfigError::BadProbability(p));
                }
                Ok(FaultSpec::RandomBytes { p })
            }
            "bogus_view" => {
                if self.p.is_some() {
                    return Err(stray("p"));
                }
                if self.round.is_some() {
                    return Err(stray("round"));
                }
                if self.inner.is_some() {
                    return Err(stray("inner"));
                }
                let h = self.h.ok_or_else(|| missing("h"))?;
                Ok(FaultSpec::BogusView { h })
            }
            "stale_view" => {
                no_params()?;
                Ok(FaultSpec::StaleView)
            }
            "mid_run" => {
                if self.p.is_some() {
                    return Err(stray("p"));
                }
                if self.h.is_some() {
                    return Err(stray("h"));
                }
                let round = self.round.ok_or_else(|| missing("round"))?;
                let inner = self.inner.as_ref().ok_or_else(|| missing("inner"))?;
                if inner.kind == "mid_run" {
                    return Err(ConfigError::NestedMidRun);
                }
                if round == 0 {
                    return Err(ConfigError::BadMidRunRound);
                }
                Ok(FaultSpec::MidRun { round, inner: Box::new(inner.to_spec()?) })
            }
            other => Err(ConfigError::UnknownFault(other.to_string())),
        }
    }
}

/// Complete experiment description. Unknown keys are rejected so a typo
/// cannot silently change what ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub inputs: InputsSpec,
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon: HorizonSpec,
    #[serde(default)]
    pub faults: FaultConfig,
    #[serde(default)]
    pub check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<ExperimentConfig, ConfigError> {
        serde_json::from_str(json).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// Branchings observed this round, measured as the growth of
/// sum over nodes of max(children - 1, 0), per tree. Exact for runs that
/// never chop (trees only grow); clamped at zero otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchEvents {
    pub collective: u64,
    pub views: Vec<u64>,
}

/// End-of-round observation of every agent.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RoundRecord {
    pub round: u64,
    pub agent_outputs: Vec<FrequencyMap>,
    pub state_bits: Vec<u64>,
    /// Whether each agent's state bytes are unchanged from last round.
    pub frozen_flags: Vec<bool>,
    /// Message copies dropped this round (undecodable, wrong shape, or
    /// judged redundant by the finite-state relevance rule).
    pub discard_count: u64,
    pub branch_events: BranchEvents,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Summary {
    /// Smallest round from which every output equals the census through
    /// the horizon; null if the window never closes.
    pub stabilization_round: Option<u64>,
    pub bound: u64,
    pub bound_satisfied: bool,
    /// Largest per-agent state, in bits, over rounds >= 1. Round 0 is
    /// excluded because its states are the adversary's verbatim injection,
    /// not something the algorithm maintained.
    pub max_state_bits: u64,
    pub truth_census: FrequencyMap,
    pub min_garbage_coefficient: u64,
    /// Rounds in which some view or the collective tree held counting
    /// cuts with no dominance order between them (check mode only).
    pub incomparable_cut_rounds: u64,
    pub check_violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DotTarget {
    Agent(usize),
    Collective,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DotRequest {
    pub round: u64,
    pub target: DotTarget,
}

#[derive(Debug, Clone)]
pub struct DotSnapshot {
    pub round: u64,
    pub target: DotTarget,
    pub dot: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for the step fan-out; 0 and 1 both mean sequential.
    pub workers: usize,
    pub dot_at: Vec<DotRequest>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub records: Vec<RoundRecord>,
    pub summary: Summary,
    pub trace: NetworkTrace,
    pub dots: Vec<DotSnapshot>,
}

pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts, ConfigError> {
    run_with_options(config, &RunOptions::default())
}

pub fn run_with_options(
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<RunArtifacts, ConfigError> {
    let algorithm = config.algorithm;
    if config.n == 0 {
        return Err(ConfigError::BadN);
    }
    let inputs = config.inputs.realize(config.n)?;
    let fault_spec = config.faults.to_spec()?;
    if algorithm == Algorithm::Baseline && fault_spec != FaultSpec::None {
        return Err(ConfigError::BaselineWithFaults);
    }
    let (initial_faults, mid_run) = match fault_spec {
        FaultSpec::MidRun { round, inner } => {
            if config.check {
                return Err(ConfigError::MidRunWithCheck);
            }
            (FaultSpec::None, Some((round, *inner)))
        }
        spec => (spec, None),
    };

    let known_n = (algorithm == Algorithm::KnownN).then_some(config.n);
    let injected = realize_faults(&initial_faults, algorithm, &inputs, config.seed, 0);
    let mut states: Vec<AgentState> = inputs
        .iter()
        .zip(&injected)
        .map(|(input, bytes)| AgentState::init(algorithm, input, known_n, bytes.as_deref()))
        .collect();
    let min_garbage = states
        .iter()
        .map(AgentState::garbage_coefficient)
        .min()
        .expect("n >= 1");
    let bound = stabilization_bound(algorithm, config.n, min_garbage);
    let horizon = match config.horizon {
        HorizonSpec::Auto => (2 * bound).max(2),
        HorizonSpec::Rounds(r) if r >= 1 => r,
        HorizonSpec::Rounds(_) => return Err(ConfigError::BadHorizon),
    };
    if let Some((round, _)) = mid_run {
        if round > horizon {
            return Err(ConfigError::BadMidRunRound);
        }
    }
    let trace = realize_trace(&config.adversary, &inputs, horizon, config.seed)?;
    let truth = trace.census();
    let workers = opts.workers.max(1);
    let n = config.n;

    let mut checker = config.check.then(|| CutTheoryChecker::new(n));
    let mut records: Vec<RoundRecord> = Vec::with_capacity(horizon as usize + 1);
    let mut dots: Vec<DotSnapshot> = Vec::new();

    // Round 0. The finite-state algorithm folds its input in with one
    // empty step; everyone else reports what the sanitized initial state
    // would answer, leaving the injected bytes in place.
    let outputs: Vec<FrequencyMap> = if algorithm == Algorithm::FiniteState {
        let mut cache = DomCutCache::new();
        let mut outs = Vec::with_capacity(n);
        states = states
            .into_iter()
            .map(|s| {
                let r = s.step_cached(&[], &mut cache);
                outs.push(r.output);
                r.state
            })
            .collect();
        outs
    } else {
        states.iter().map(AgentState::output).collect()
    };
    let mut prev_bytes: Vec<Vec<u8>> = states.iter().map(AgentState::payload_bytes).collect();
    let sanitized: Vec<View> = states
        .iter()
        .map(|s| match s.view() {
            Some(v) => v.clone(),
            None => s.clone().sanitize().view().expect("sanitized").clone(),
        })
        .collect();
    let mut prev_view_sums: Vec<u64> = sanitized.iter().map(branch_sum).collect();
    let view_refs: Vec<&View> = sanitized.iter().collect();
    let mut merge_ctx = CodeCtx::new();
    let mut collective =
        collective_tree_with(&view_refs, &mut merge_ctx).expect("merge of valid views");
    let mut prev_collective_sum = branch_sum(&collective);

    records.push(RoundRecord {
        round: 0,
        agent_outputs: outputs,
        state_bits: prev_bytes.iter().map(|b| 8 * b.len() as u64).collect(),
        frozen_flags: vec![false; n],
        discard_count: 0,
        branch_events: BranchEvents { collective: 0, views: vec![0; n] },
    });
    if let Some(c) = &mut checker {
        c.observe(0, &view_refs, &collective, &records[0].branch_events);
    }
    snapshot_dots(&mut dots, opts, 0, &view_refs, &collective);
    drop(view_refs);
    drop(sanitized);

    let mut caches: Vec<DomCutCache> = (0..workers).map(|_| DomCutCache::new()).collect();
    for t in 1..=horizon {
        if let Some((round, spec)) = &mid_run {
            if *round == t {
                let inj = realize_faults(spec, algorithm, &inputs, config.seed, t << 20);
                states = states
                    .into_iter()
                    .zip(inj)
                    .map(|(s, bytes)| match bytes {
                        Some(b) => AgentState::init(algorithm, s.input(), known_n, Some(&b)),
                        None => s,
                    })
                    .collect();
            }
        }

        states = states.into_iter().map(AgentState::sanitize).collect();
        let msgs: Vec<Vec<u8>> = states.iter().map(AgentState::make_message).collect();
        let graph = trace.graph(t as usize);
        let recvs: Vec<Vec<(&[u8], u64)>> = (0..n)
            .map(|p| {
                let mut fold: BTreeMap<&[u8], u64> = BTreeMap::new();
                for (q, copies) in graph.neighbor_counts(p) {
                    *fold.entry(msgs[q].as_slice()).or_default() += copies as u64;
                }
                fold.into_iter().collect()
            })
            .collect();

        let outcomes = run_steps(std::mem::take(&mut states), &recvs, &mut caches);
        let mut outputs = Vec::with_capacity(n);
        let mut discard_count = 0u64;
        states = outcomes
            .into_iter()
            .map(|o| {
                outputs.push(o.output);
                discard_count += o.discarded;
                o.state
            })
            .collect();

        let bytes: Vec<Vec<u8>> = states.iter().map(AgentState::payload_bytes).collect();
        let frozen: Vec<bool> =
            bytes.iter().zip(&prev_bytes).map(|(cur, prev)| cur == prev).collect();
        let views: Vec<&View> =
            states.iter().map(|s| s.view().expect("post-step state is healthy")).collect();
        // Byte-identical states mean identical trees, so an all-frozen
        // round reuses last round's merge instead of recomputing it.
        let all_frozen = frozen.iter().all(|&f| f);
        let (view_sums, collective_sum) = if all_frozen {
            (prev_view_sums.clone(), prev_collective_sum)
        } else {
            let sums: Vec<u64> = views.iter().map(|v| branch_sum(v)).collect();
            collective =
                collective_tree_with(&views, &mut merge_ctx).expect("merge of valid views");
            (sums, branch_sum(&collective))
        };
        let branch_events = BranchEvents {
            collective: collective_sum.saturating_sub(prev_collective_sum),
            views: view_sums
                .iter()
                .zip(&prev_view_sums)
                .map(|(cur, prev)| cur.saturating_sub(*prev))
                .collect(),
        };

        records.push(RoundRecord {
            round: t,
            agent_outputs: outputs,
            state_bits: bytes.iter().map(|b| 8 * b.len() as u64).collect(),
            frozen_flags: frozen,
            discard_count,
            branch_events: branch_events.clone(),
        });
        if let Some(c) = &mut checker {
            c.observe(t, &views, &collective, &branch_events);
        }
        snapshot_dots(&mut dots, opts, t, &views, &collective);

        prev_bytes = bytes;
        prev_view_sums = view_sums;
        prev_collective_sum = collective_sum;
    }

    let stabilization = stabilization_round(&records, &truth);
    let max_state_bits = records
        .iter()
        .skip(1)
        .flat_map(|r| r.state_bits.iter().copied())
        .max()
        .unwrap_or(0);
    let (check_violations, incomparable_cut_rounds) =
        checker.map(CutTheoryChecker::finish).unwrap_or_default();
    let summary = Summary {
        stabilization_round: stabilization,
        bound,
        bound_satisfied: stabilization.is_some_and(|r| r <= bound),
        max_state_bits,
        truth_census: truth,
        min_garbage_coefficient: min_garbage,
        incomparable_cut_rounds,
        check_violations,
    };
    Ok(RunArtifacts { records, summary, trace, dots })
}

/// Smallest round from which every agent's output equals `truth` in every
/// record through the horizon.
pub fn stabilization_round(records: &[RoundRecord], truth: &FrequencyMap) -> Option<u64> {
    let mut stab = None;
    for rec in records.iter().rev() {
        if rec.agent_outputs.iter().all(|o| o == truth) {
            stab = Some(rec.round);
        } else {
            break;
        }
    }
    stab
}

fn realize_trace(
    adv: &AdversaryConfig,
    inputs: &[InputLabel],
    horizon: u64,
    seed: u64,
) -> Result<NetworkTrace, ConfigError> {
    let kind = adv.kind.as_str();
    if kind == "file" {
        let path = adv.path.clone().ok_or(ConfigError::MissingAdversaryParam {
            kind: kind.into(),
            param: "path",
        })?;
        let text = fs::read_to_string(&path)
            .map_err(|e| ConfigError::TraceFile { path: path.clone(), err: e.to_string() })?;
        let trace = NetworkTrace::from_text(&text)
            .map_err(|e| ConfigError::TraceFile { path: path.clone(), err: e.to_string() })?;
        if trace.n() != inputs.len() {
            return Err(ConfigError::TraceMismatch(format!(
                "file has n = {}, config has n = {}",
                trace.n(),
                inputs.len()
            )));
        }
        if trace.inputs() != inputs {
            return Err(ConfigError::TraceMismatch("input labels differ".into()));
        }
        if (trace.horizon() as u64) < horizon {
            return Err(ConfigError::TraceMismatch(format!(
                "file covers {} rounds but the run needs {horizon}",
                trace.horizon()
            )));
        }
        return Ok(trace);
    }
    if adv.path.is_some() {
        return Err(ConfigError::StrayAdversaryParam { kind: kind.into(), param: "path" });
    }
    let k = match kind {
        "random_connected" => TraceKind::RandomConnected,
        "path_rotating" => TraceKind::PathRotating,
        "ring" => TraceKind::Ring,
        "star_rotating" => TraceKind::StarRotating,
        "static_path" => TraceKind::StaticPath,
        "two_clique_bridge" => TraceKind::TwoCliqueBridge,
        other => return Err(ConfigError::UnknownAdversary(other.to_string())),
    };
    adversary_trace(k, inputs.to_vec(), horizon as usize, seed)
        .map_err(|e| ConfigError::Trace(e.to_string()))
}

/// Sum over nodes of max(children - 1, 0): how many extra branches the
/// black tree carries beyond a single chain per leaf.
fn branch_sum(view: &View) -> u64 {
    view.node_ids().map(|v| view.children(v).len().saturating_sub(1) as u64).sum()
}

fn snapshot_dots(
    dots: &mut Vec<DotSnapshot>,
    opts: &RunOptions,
    round: u64,
    views: &[&View],
    collective: &View,
) {
    for req in &opts.dot_at {
        if req.round != round {
            continue;
        }
        let dot = match req.target {
            DotTarget::Agent(p) => match views.get(p) {
                Some(v) => v.to_dot(&format!("agent{p}_round{round}")),
                None => continue,
            },
            DotTarget::Collective => collective.to_dot(&format!("collective_round{round}")),
        };
        dots.push(DotSnapshot { round, target: req.target, dot });
    }
}

/// Double-buffered simultaneous step: consumes this round's states, returns
/// outcomes in agent order. Workers partition the agents into contiguous
/// chunks; chunk i reuses caches[i] across rounds (caches only affect
/// speed, so the partition cannot change results).
fn run_steps(
    states: Vec<AgentState>,
    recvs: &[Vec<(&[u8], u64)>],
    caches: &mut [DomCutCache],
) -> Vec<StepOutcome> {
    let n = states.len();
    if caches.len() <= 1 || n <= 1 {
        let cache = &mut caches[0];
        return states
            .into_iter()
            .zip(recvs)
            .map(|(s, r)| s.step_cached(r, cache))
            .collect();
    }
    let workers = caches.len().min(n);
    let chunk = (n + workers - 1) / workers;
    let mut chunks: Vec<(usize, Vec<AgentState>)> = Vec::with_capacity(workers);
    let mut it = states.into_iter();
    let mut off = 0;
    loop {
        let c: Vec<AgentState> = it.by_ref().take(chunk).collect();
        if c.is_empty() {
            break;
        }
        let len = c.len();
        chunks.push((off, c));
        off += len;
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .zip(caches.iter_mut())
            .map(|((off, c), cache)| {
                let recvs = &recvs[off..off + c.len()];
                scope.spawn(move || {
                    c.into_iter()
                        .zip(recvs)
                        .map(|(s, r)| s.step_cached(r, cache))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("agent step panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t3_config(algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            n: 3,
            inputs: InputsSpec::List(
                ["a", "a", "b"].iter().map(|s| InputLabel::new(*s).unwrap()).collect(),
            ),
            adversary: AdversaryConfig::generator("static_path"),
            seed: 0,
            horizon: HorizonSpec::Auto,
            faults: FaultConfig::default(),
            check: false,
            out: None,
        }
    }

    #[test]
    fn baseline_on_the_static_path_stabilizes_by_four() {
        let art = run(&t3_config(Algorithm::Baseline)).unwrap();
        assert_eq!(art.records.len(), 9, "horizon auto = 2 * (2n - 2)");
        assert_eq!(art.summary.bound, 4);
        let stab = art.summary.stabilization_round.expect("stabilizes");
        assert!(stab <= 4, "stabilized only at {stab}");
        assert!(art.summary.bound_satisfied);
        // Round 0 has no messages, so every output is the own-input default.
        for (p, out) in art.records[0].agent_outputs.iter().enumerate() {
            assert_eq!(out.iter().count(), 1, "agent {p} round 0");
        }
        assert_eq!(art.summary.min_garbage_coefficient, 1);
        assert!(art.summary.check_violations.is_empty());
    }

    #[test]
    fn single_agent_stabilizes_at_round_zero() {
        let cfg = ExperimentConfig {
            algorithm: Algorithm::SelfStab,
            n: 1,
            inputs: InputsSpec::List(vec![InputLabel::new("x").unwrap()]),
            adversary: AdversaryConfig::generator("ring"),
            seed: 5,
            horizon: HorizonSpec::Auto,
            faults: FaultConfig::default(),
            check: false,
            out: None,
        };
        let art = run(&cfg).unwrap();
        assert_eq!(art.summary.stabilization_round, Some(0));
        assert!(art.summary.bound_satisfied);
    }

    #[test]
    fn worker_count_never_changes_the_records() {
        let mut cfg = t3_config(Algorithm::KnownN);
        cfg.n = 4;
        cfg.inputs = InputsSpec::List(
            ["a", "b", "b", "c"].iter().map(|s| InputLabel::new(*s).unwrap()).collect(),
        );
        cfg.adversary = AdversaryConfig::generator("random_connected");
        cfg.faults = FaultConfig { kind: "bogus_view".into(), h: Some(2), ..Default::default() };
        cfg.seed = 42;
        let render = |workers| {
            let art = run_with_options(&cfg, &RunOptions { workers, dot_at: vec![] }).unwrap();
            art.records.iter().map(|r| serde_json::to_string(r).unwrap()).collect::<Vec<_>>()
        };
        let one = render(1);
        assert_eq!(one, render(2));
        assert_eq!(one, render(4));
    }

    #[test]
    fn config_validation_rejects_contradictions() {
        let mut cfg = t3_config(Algorithm::Baseline);
        cfg.faults = FaultConfig { kind: "random_bytes".into(), p: Some(1.0), ..Default::default() };
        assert!(matches!(run(&cfg), Err(ConfigError::BaselineWithFaults)));

        let mut cfg = t3_config(Algorithm::FiniteState);
        cfg.check = true;
        cfg.faults = FaultConfig {
            kind: "mid_run".into(),
            round: Some(2),
            inner: Some(Box::new(FaultConfig {
                kind: "bogus_view".into(),
                h: Some(1),
                ..Default::default()
            })),
            ..Default::default()
        };
        assert!(matches!(run(&cfg), Err(ConfigError::MidRunWithCheck)));

        let mut cfg = t3_config(Algorithm::Baseline);
        cfg.adversary = AdversaryConfig::generator("gossip");
        assert!(matches!(run(&cfg), Err(ConfigError::UnknownAdversary(_))));

        let mut cfg = t3_config(Algorithm::Baseline);
        cfg.inputs = InputsSpec::Census(
            [(InputLabel::new("a").unwrap(), 5usize)].into_iter().collect(),
        );
        assert!(matches!(run(&cfg), Err(ConfigError::InputsMismatch { want: 3, got: 5 })));

        let json = r#"{"algorithm":"baseline","n":2,"inputs":["a","b"],
                       "adversary":{"kind":"ring"},"tpyo":1}"#;
        assert!(matches!(ExperimentConfig::from_json(json), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn census_inputs_expand_in_label_order() {
        let mut cfg = t3_config(Algorithm::Baseline);
        cfg.inputs = InputsSpec::Census(
            [
                (InputLabel::new("b").unwrap(), 1usize),
                (InputLabel::new("a").unwrap(), 2usize),
            ]
            .into_iter()
            .collect(),
        );
        let art = run(&cfg).unwrap();
        assert_eq!(
            art.trace.inputs().iter().map(|l| l.as_str()).collect::<Vec<_>>(),
            ["a", "a", "b"]
        );
        assert!(art.summary.stabilization_round.is_some_and(|r| r <= 4));
    }

    #[test]
    fn mid_run_corruption_disrupts_and_recovers() {
        let mut cfg = t3_config(Algorithm::KnownN);
        cfg.horizon = HorizonSpec::Rounds(14);
        cfg.faults = FaultConfig {
            kind: "mid_run".into(),
            round: Some(6),
            inner: Some(Box::new(FaultConfig {
                kind: "bogus_view".into(),
                h: Some(3),
                ..Default::default()
            })),
            ..Default::default()
        };
        let art = run(&cfg).unwrap();
        let stab = art.summary.stabilization_round.expect("recovers after corruption");
        assert!(stab >= 6, "corruption at round 6 must disturb outputs, got {stab}");
        // The clean prefix was correct before the corruption hit.
        let truth = &art.summary.truth_census;
        assert!(art.records[5].agent_outputs.iter().all(|o| o == truth));
    }

    #[test]
    fn trace_files_replay_identically() {
        let direct = run(&t3_config(Algorithm::Baseline)).unwrap();
        let path = std::env::temp_dir().join("histree_engine_t3_trace.txt");
        fs::write(&path, direct.trace.to_text().unwrap()).unwrap();
        let mut cfg = t3_config(Algorithm::Baseline);
        cfg.adversary = AdversaryConfig {
            kind: "file".into(),
            path: Some(path.to_str().unwrap().to_string()),
        };
        let replayed = run(&cfg).unwrap();
        fs::remove_file(&path).ok();
        let render = |art: &RunArtifacts| {
            art.records.iter().map(|r| serde_json::to_string(r).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(render(&direct), render(&replayed));
    }

    #[test]
    fn finite_state_run_passes_the_theory_checks() {
        let mut cfg = t3_config(Algorithm::FiniteState);
        cfg.check = true;
        let art = run(&cfg).unwrap();
        assert_eq!(art.summary.check_violations, Vec::<String>::new());
        let stab = art.summary.stabilization_round.expect("stabilizes");
        assert!(stab <= art.summary.bound);
        // After the first all-frozen round, every state stays frozen.
        let first_frozen = art
            .records
            .iter()
            .position(|r| r.frozen_flags.iter().all(|&f| f))
            .expect("freezes");
        for rec in &art.records[first_frozen..] {
            assert!(rec.frozen_flags.iter().all(|&f| f), "thawed at round {}", rec.round);
        }
    }
}
