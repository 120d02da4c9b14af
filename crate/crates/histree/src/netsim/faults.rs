//! Adversarial initial states.
//!
//! Fault specs replace agents' canonical starting states with garbage:
//! undecodable byte strings, structurally valid but fabricated views, or
//! views salvaged from an unrelated execution. All draws derive from the
//! experiment seed and the agent index, so a fault realization is a pure
//! function of the config. The flag-carrying algorithm gets a random (but
//! in-range) flag byte appended, keeping the payload well formed whenever
//! the view is.

use rand::Rng;

use crate::agent::Algorithm;
use crate::netsim::derived_rng;
use crate::netsim::oracle::oracle_history_tree;
use crate::netsim::trace::{adversary_trace, TraceKind};
use crate::view::{encode_view, Mult, RawNode, View, ViewKind, ROOT};
use crate::InputLabel;

/// Initial-state corruption, realized once before round 1.
#[derive(Debug, Clone, PartialEq)]
pub enum FaultSpec {
    /// Canonical starts everywhere.
    None,
    /// Each agent independently gets 1..48 uniformly random bytes with
    /// probability `p` (garbage coefficient 0: never a well-formed view).
    RandomBytes { p: f64 },
    /// Every agent gets a fabricated view of height `h`: a labeled chain
    /// with random red multiplicities (occasionally astronomically large)
    /// and, for h >= 2, sometimes a side branch. h = 0 is the bare root.
    BogusView { h: usize },
    /// Every agent gets a genuine view of some agent from an unrelated
    /// execution, at a random round in [1, max(1, 2n-2)].
    StaleView,
    /// Canonical starts, then `inner` is re-applied to every agent's state
    /// at the start of round `round`. This models corruption during the
    /// run, which the stabilization guarantees do not cover; the engine
    /// therefore refuses to combine it with theory checks.
    MidRun { round: u64, inner: Box<FaultSpec> },
}

impl Default for FaultSpec {
    fn default() -> Self {
        FaultSpec::None
    }
}

/// Bytes to install verbatim as each agent's state; None keeps the
/// canonical start. `purpose_salt` separates the initial realization from
/// mid-run re-realizations of the same spec.
pub(crate) fn realize_faults(
    spec: &FaultSpec,
    algorithm: Algorithm,
    inputs: &[InputLabel],
    seed: u64,
    purpose_salt: u64,
) -> Vec<Option<Vec<u8>>> {
    let n = inputs.len();
    match spec {
        FaultSpec::None => vec![None; n],
        FaultSpec::RandomBytes { p } => (0..n)
            .map(|agent| {
                let mut rng = derived_rng(seed, "fault-bytes", purpose_salt + agent as u64);
                if rng.gen_bool(*p) {
                    let len = rng.gen_range(1..48);
                    let mut bytes = vec![0u8; len];
                    rng.fill(&mut bytes[..]);
                    Some(bytes)
                } else {
                    None
                }
            })
            .collect(),
        FaultSpec::BogusView { h } => (0..n)
            .map(|agent| {
                let mut rng = derived_rng(seed, "fault-bogus", purpose_salt + agent as u64);
                let view = bogus_view(*h, &mut rng);
                Some(finish_payload(view, algorithm, &mut rng))
            })
            .collect(),
        FaultSpec::StaleView => {
            // A baseline history from a shifted world: same sizes, rotated
            // inputs, unrelated seed, random-connected topology.
            let mut rotated = inputs.to_vec();
            rotated.rotate_left(1.min(n.saturating_sub(1)));
            let depth = (2 * n).saturating_sub(2).max(1);
            let stale = adversary_trace(TraceKind::RandomConnected, rotated, depth, seed + 1000)
                .expect("stale trace parameters are valid by construction");
            let oracle = oracle_history_tree(&stale, depth);
            (0..n)
                .map(|agent| {
                    let mut rng = derived_rng(seed, "fault-stale", purpose_salt + agent as u64);
                    let r = rng.gen_range(1..=depth);
                    let view = oracle.agent_view(agent, r);
                    Some(finish_payload(view, algorithm, &mut rng))
                })
                .collect()
        }
        // Initial states are canonical; the round loop re-realizes `inner`
        // when the trigger round arrives.
        FaultSpec::MidRun { .. } => vec![None; n],
    }
}

fn finish_payload(view: View, algorithm: Algorithm, rng: &mut impl Rng) -> Vec<u8> {
    let mut bytes = encode_view(&view);
    if algorithm == Algorithm::SelfStab {
        bytes.push(rng.gen_range(0..=1));
    }
    bytes
}

/// A structurally valid standard view of exactly height `h` that no real
/// execution would produce: chain labels cycle through a garbage alphabet,
/// red multiplicities are drawn from {1, 2, 3} with a rare huge outlier,
/// and an optional differently-labeled sibling hangs off the root.
fn bogus_view(h: usize, rng: &mut impl Rng) -> View {
    if h == 0 {
        return View::root_only(ViewKind::Standard);
    }
    let garbage: Vec<InputLabel> =
        (0..6).map(|i| InputLabel::new(format!("g{i}")).unwrap()).collect();
    let mut raw = vec![RawNode { parent: None, label: None, red_in: vec![] }];
    for d in 0..h {
        let parent = if d == 0 { ROOT } else { d };
        let red_in = if rng.gen_bool(0.5) {
            vec![(parent, random_mult(rng))]
        } else {
            vec![]
        };
        raw.push(RawNode {
            parent: Some(parent),
            label: Some(garbage[rng.gen_range(0..3)].clone()),
            red_in,
        });
    }
    let bottom = h;
    if h >= 2 && rng.gen_bool(0.5) {
        // Sibling of the chain head, reaching the bottom through a red
        // edge into depth 1; a distinct label keeps codes unique.
        let side = raw.len();
        raw.push(RawNode {
            parent: Some(ROOT),
            label: Some(garbage[3 + rng.gen_range(0..3)].clone()),
            red_in: vec![],
        });
        raw[2].red_in.push((side, random_mult(rng)));
        raw[2].red_in.sort_by(|a, b| a.0.cmp(&b.0));
    }
    View::from_parts(ViewKind::Standard, raw, Some(bottom))
        .expect("fabricated chain satisfies every view invariant")
}

fn random_mult(rng: &mut impl Rng) -> Mult {
    if rng.gen_bool(0.05) {
        Mult::from(10u8).pow(20)
    } else {
        Mult::from(rng.gen_range(1u8..=3))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentState;

    fn labels(s: &[&str]) -> Vec<InputLabel> {
        s.iter().map(|x| InputLabel::new(*x).unwrap()).collect()
    }

    #[test]
    fn none_keeps_canonical_starts() {
        let inputs = labels(&["a", "b", "b"]);
        let r = realize_faults(&FaultSpec::None, Algorithm::KnownN, &inputs, 7, 0);
        assert!(r.iter().all(Option::is_none));
    }

    #[test]
    fn random_bytes_never_decode() {
        let inputs = labels(&["a"; 6]);
        let spec = FaultSpec::RandomBytes { p: 1.0 };
        for seed in 0..5 {
            let r = realize_faults(&spec, Algorithm::SelfStab, &inputs, seed, 0);
            for (p, bytes) in r.iter().enumerate() {
                let s = AgentState::init(
                    Algorithm::SelfStab,
                    &inputs[p],
                    None,
                    Some(bytes.as_ref().unwrap()),
                );
                assert_eq!(s.garbage_coefficient(), 0, "seed {seed} agent {p}");
            }
        }
    }

    #[test]
    fn bogus_views_have_the_requested_height() {
        let inputs = labels(&["a", "b", "a", "b"]);
        for h in [0usize, 1, 3, 6] {
            for seed in 0..4 {
                let r = realize_faults(
                    &FaultSpec::BogusView { h },
                    Algorithm::SelfStab,
                    &inputs,
                    seed,
                    0,
                );
                for (p, bytes) in r.iter().enumerate() {
                    let s = AgentState::init(
                        Algorithm::SelfStab,
                        &inputs[p],
                        None,
                        Some(bytes.as_ref().unwrap()),
                    );
                    assert_eq!(s.garbage_coefficient(), h as u64, "h {h} seed {seed} agent {p}");
                }
            }
        }
    }

    #[test]
    fn stale_views_are_well_formed_and_bounded() {
        let inputs = labels(&["a", "a", "b", "c", "c"]);
        let r = realize_faults(&FaultSpec::StaleView, Algorithm::KnownN, &inputs, 3, 0);
        for (p, bytes) in r.iter().enumerate() {
            let s = AgentState::init(Algorithm::KnownN, &inputs[p], Some(5), Some(bytes.as_ref().unwrap()));
            let coef = s.garbage_coefficient();
            assert!((2..=9).contains(&coef), "agent {p}: coefficient {coef}");
        }
    }

    #[test]
    fn realizations_are_deterministic() {
        let inputs = labels(&["a", "b", "b"]);
        let spec = FaultSpec::BogusView { h: 4 };
        let one = realize_faults(&spec, Algorithm::SelfStab, &inputs, 11, 0);
        let two = realize_faults(&spec, Algorithm::SelfStab, &inputs, 11, 0);
        assert_eq!(one, two);
        let other_salt = realize_faults(&spec, Algorithm::SelfStab, &inputs, 11, 1 << 32);
        assert_ne!(one, other_salt);
    }
}
