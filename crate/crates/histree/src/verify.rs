//! Named property suites over seeded simulation grids.
//!
//! Each suite sweeps agent counts, adversaries, and seeds, checks one
//! family of invariants, and reports every violation together with a
//! config that reproduces the failing instance. Grids are iterated from
//! the smallest parameters upward, so the first violation in a report is
//! also the smallest reproduction found.

use std::collections::BTreeSet;
use std::fmt;

use crate::agent::{known_n_bit_cap, stabilization_bound, AgentState, Algorithm, DomCutCache};
use crate::netsim::oracle::oracle_history_tree;
use crate::netsim::trace::{adversary_trace, TraceKind};
use crate::netsim::{
    run, AdversaryConfig, ExperimentConfig, FaultConfig, HorizonSpec, InputsSpec,
};
use crate::InputLabel;

/// Adversaries used by the sweep grids: the unconstrained random one plus
/// the three rotating structured families.
const GRID_ADVERSARIES: [&str; 4] = ["random_connected", "path_rotating", "ring", "star_rotating"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    /// Chopping a view equals the view one round later in the trace with
    /// its first graph dropped, for every agent and round.
    ChopLemma,
    /// Counting cuts of the collective tree are totally ordered by
    /// dominance on every simulated round.
    DominanceOrder,
    /// The children of an exposed pair are always born in the same round.
    ExposedSimultaneity,
    /// The count-aware algorithm stabilizes within 2n-2 rounds under every
    /// fault spec, and its state never exceeds the bit cap.
    BoundsThm1,
    /// The flag-protocol algorithm stabilizes within max{4n-2h, 2h} rounds
    /// when every agent starts with injected garbage of height h.
    BoundsThm2,
    /// The finite-state algorithm stabilizes within 3n^2 rounds and its
    /// state stays within a constant factor of n^4 log n bits.
    BoundsThm3,
    /// The baseline algorithm's views match the brute-force oracle and its
    /// outputs reach the census by round 2n-2.
    BaselineViews,
    /// Finite-state agents freeze byte-for-byte once they all agree, and
    /// never thaw afterwards.
    FrozenStates,
}

pub const ALL_SUITES: [Suite; 8] = [
    Suite::ChopLemma,
    Suite::DominanceOrder,
    Suite::ExposedSimultaneity,
    Suite::BoundsThm1,
    Suite::BoundsThm2,
    Suite::BoundsThm3,
    Suite::BaselineViews,
    Suite::FrozenStates,
];

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::ChopLemma => "chop_lemma",
            Suite::DominanceOrder => "dominance_order",
            Suite::ExposedSimultaneity => "exposed_simultaneity",
            Suite::BoundsThm1 => "bounds_thm1",
            Suite::BoundsThm2 => "bounds_thm2",
            Suite::BoundsThm3 => "bounds_thm3",
            Suite::BaselineViews => "baseline_views",
            Suite::FrozenStates => "frozen_states",
        }
    }

    pub fn from_name(name: &str) -> Option<Suite> {
        ALL_SUITES.iter().copied().find(|s| s.name() == name)
    }

    /// Grid each suite sweeps when the caller does not override it.
    pub fn default_params(self) -> SuiteParams {
        match self {
            Suite::ChopLemma => SuiteParams { n_lo: 2, n_hi: 6, seeds: 50 },
            Suite::DominanceOrder => SuiteParams { n_lo: 2, n_hi: 6, seeds: 10 },
            Suite::ExposedSimultaneity => SuiteParams { n_lo: 2, n_hi: 6, seeds: 10 },
            Suite::BoundsThm1 => SuiteParams { n_lo: 2, n_hi: 8, seeds: 25 },
            Suite::BoundsThm2 => SuiteParams { n_lo: 2, n_hi: 7, seeds: 5 },
            Suite::BoundsThm3 => SuiteParams { n_lo: 2, n_hi: 6, seeds: 25 },
            Suite::BaselineViews => SuiteParams { n_lo: 2, n_hi: 8, seeds: 25 },
            Suite::FrozenStates => SuiteParams { n_lo: 2, n_hi: 6, seeds: 10 },
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteParams {
    /// Inclusive range of agent counts.
    pub n_lo: usize,
    pub n_hi: usize,
    /// Seeds per grid cell.
    pub seeds: u64,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub description: String,
    /// A config that reproduces the failing instance, when one exists.
    pub repro: Option<ExperimentConfig>,
    /// The round the property first failed at, for round-indexed checks;
    /// bound suites store the observed stabilization round here.
    pub round: Option<u64>,
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub suite: Suite,
    /// Instances checked (runs or per-round comparisons, per suite).
    pub cases: u64,
    /// Measurements worth reporting even on success.
    pub notes: Vec<String>,
    pub violations: Vec<Violation>,
}

impl SuiteOutcome {
    fn new(suite: Suite) -> SuiteOutcome {
        SuiteOutcome { suite, cases: 0, notes: Vec::new(), violations: Vec::new() }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, description: String, repro: Option<ExperimentConfig>, round: Option<u64>) {
        self.violations.push(Violation { description, repro, round });
    }
}

pub fn run_suite(suite: Suite, params: SuiteParams) -> SuiteOutcome {
    match suite {
        Suite::ChopLemma => chop_lemma(params),
        Suite::DominanceOrder => {
            check_mode_suite(Suite::DominanceOrder, params, "totally ordered")
        }
        Suite::ExposedSimultaneity => {
            check_mode_suite(Suite::ExposedSimultaneity, params, "exposed pair")
        }
        Suite::BoundsThm1 => bounds_thm1(params),
        Suite::BoundsThm2 => bounds_thm2(params),
        Suite::BoundsThm3 => bounds_thm3(params),
        Suite::BaselineViews => baseline_views(params),
        Suite::FrozenStates => frozen_states(params),
    }
}

/// Deterministic input assignment: the seed picks how many distinct labels
/// the population uses (1 to 3), covering the uniform-input edge case as
/// well as mixed censuses.
fn grid_labels(n: usize, seed: u64) -> Vec<InputLabel> {
    const ALPHABET: [&str; 3] = ["a", "b", "c"];
    let k = 1 + (seed as usize % 3).min(n - 1);
    (0..n).map(|i| InputLabel::new(ALPHABET[i % k]).unwrap()).collect()
}

fn grid_config(
    algorithm: Algorithm,
    n: usize,
    adversary: &str,
    seed: u64,
    faults: FaultConfig,
    horizon: HorizonSpec,
) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        n,
        inputs: InputsSpec::List(grid_labels(n, seed)),
        adversary: AdversaryConfig::generator(adversary),
        seed,
        horizon,
        faults,
        check: false,
        out: None,
    }
}

fn chop_lemma(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::ChopLemma);
    for n in params.n_lo..=params.n_hi {
        let horizon = 2 * n;
        for seed in 0..params.seeds {
            let trace =
                adversary_trace(TraceKind::RandomConnected, grid_labels(n, seed), horizon, seed)
                    .expect("grid traces are valid");
            let shifted = trace.shift().expect("horizon is at least 2");
            let oracle = oracle_history_tree(&trace, horizon);
            let shifted_oracle = oracle_history_tree(&shifted, horizon - 1);
            for t in 1..=horizon {
                for p in 0..n {
                    out.cases += 1;
                    let repro = || {
                        Some(grid_config(
                            Algorithm::Baseline,
                            n,
                            "random_connected",
                            seed,
                            FaultConfig::default(),
                            HorizonSpec::Rounds(horizon as u64),
                        ))
                    };
                    let chopped = match oracle.agent_view(p, t).chop() {
                        Ok(v) => v,
                        Err(e) => {
                            out.push(
                                format!("n={n} seed={seed} agent={p} round={t}: chop failed: {e}"),
                                repro(),
                                Some(t as u64),
                            );
                            continue;
                        }
                    };
                    if !chopped.isomorphic(&shifted_oracle.agent_view(p, t - 1)) {
                        out.push(
                            format!(
                                "n={n} seed={seed} agent={p} round={t}: chopped view differs \
                                 from the view one round into the shifted trace"
                            ),
                            repro(),
                            Some(t as u64),
                        );
                    }
                }
            }
        }
    }
    out
}

/// Shared driver for the collective-tree theory suites: runs the
/// finite-state algorithm with per-round checks enabled and keeps the
/// violations whose message matches the suite's topic (enumeration
/// failures block either check, so both suites surface them).
fn check_mode_suite(suite: Suite, params: SuiteParams, topic: &str) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(suite);
    for n in params.n_lo..=params.n_hi {
        for adversary in GRID_ADVERSARIES {
            for seed in 0..params.seeds {
                let mut cfg = grid_config(
                    Algorithm::FiniteState,
                    n,
                    adversary,
                    seed,
                    FaultConfig::default(),
                    HorizonSpec::Auto,
                );
                cfg.check = true;
                let art = run(&cfg).expect("grid configs are valid");
                out.cases += 1;
                for v in &art.summary.check_violations {
                    if v.contains(topic) || v.contains("cut enumeration failed") {
                        out.push(v.clone(), Some(cfg.clone()), None);
                    }
                }
                if art.summary.incomparable_cut_rounds > 0 {
                    out.notes.push(format!(
                        "n={n} adversary={adversary} seed={seed}: {} round(s) with \
                         incomparable cuts inside a single view",
                        art.summary.incomparable_cut_rounds
                    ));
                }
            }
        }
    }
    out
}

fn bounds_thm1(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::BoundsThm1);
    for n in params.n_lo..=params.n_hi {
        let mut faults = vec![
            FaultConfig::default(),
            FaultConfig { kind: "random_bytes".into(), p: Some(1.0), ..Default::default() },
        ];
        let heights: BTreeSet<usize> = [1, n, 2 * n - 2].into_iter().collect();
        for h in heights {
            faults.push(FaultConfig { kind: "bogus_view".into(), h: Some(h), ..Default::default() });
        }
        faults.push(FaultConfig { kind: "stale_view".into(), ..Default::default() });

        let bound = 2 * n as u64 - 2;
        let cap = known_n_bit_cap(n);
        for fault in &faults {
            for adversary in GRID_ADVERSARIES {
                for seed in 0..params.seeds {
                    let cfg = grid_config(
                        Algorithm::KnownN,
                        n,
                        adversary,
                        seed,
                        fault.clone(),
                        HorizonSpec::Rounds(4 * n as u64),
                    );
                    let art = run(&cfg).expect("grid configs are valid");
                    out.cases += 1;
                    let stab = art.summary.stabilization_round;
                    if !stab.is_some_and(|r| r <= bound) {
                        out.push(
                            format!(
                                "n={n} adversary={adversary} seed={seed} fault={}: \
                                 stabilized at {stab:?}, bound is {bound}",
                                fault.kind
                            ),
                            Some(cfg.clone()),
                            stab,
                        );
                    }
                    if art.summary.max_state_bits > cap {
                        out.push(
                            format!(
                                "n={n} adversary={adversary} seed={seed} fault={}: state \
                                 reached {} bits, cap is {cap}",
                                fault.kind, art.summary.max_state_bits
                            ),
                            Some(cfg.clone()),
                            None,
                        );
                    }
                }
            }
        }
    }
    out
}

fn bounds_thm2(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::BoundsThm2);
    for n in params.n_lo..=params.n_hi {
        let heights: BTreeSet<usize> = [0, 1, n, 2 * n, 3 * n].into_iter().collect();
        for h in heights {
            let bound = stabilization_bound(Algorithm::SelfStab, n, h as u64);
            for adversary in GRID_ADVERSARIES {
                for seed in 0..params.seeds {
                    let fault =
                        FaultConfig { kind: "bogus_view".into(), h: Some(h), ..Default::default() };
                    let cfg = grid_config(
                        Algorithm::SelfStab,
                        n,
                        adversary,
                        seed,
                        fault,
                        HorizonSpec::Auto,
                    );
                    let art = run(&cfg).expect("grid configs are valid");
                    out.cases += 1;
                    if art.summary.min_garbage_coefficient != h as u64 {
                        out.push(
                            format!(
                                "n={n} h={h} adversary={adversary} seed={seed}: injected \
                                 garbage measured coefficient {}, expected {h}",
                                art.summary.min_garbage_coefficient
                            ),
                            Some(cfg.clone()),
                            None,
                        );
                    }
                    let stab = art.summary.stabilization_round;
                    if !stab.is_some_and(|r| r <= bound) {
                        out.push(
                            format!(
                                "n={n} h={h} adversary={adversary} seed={seed}: stabilized \
                                 at {stab:?}, bound is {bound}"
                            ),
                            Some(cfg),
                            stab,
                        );
                    }
                }
            }
        }
    }
    out
}

fn bounds_thm3(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::BoundsThm3);
    for n in params.n_lo..=params.n_hi {
        let bound = 3 * (n as u64) * (n as u64);
        // Same spirit as the count-aware bit cap: a concrete constant on
        // the quartic form so the claim is checkable rather than asymptotic.
        let bit_budget = 64 * (n as u64).pow(4) * ((n + 1) as u64).next_power_of_two().ilog2() as u64;
        let mut max_bits = 0u64;
        for adversary in GRID_ADVERSARIES {
            for seed in 0..params.seeds {
                let cfg = grid_config(
                    Algorithm::FiniteState,
                    n,
                    adversary,
                    seed,
                    FaultConfig::default(),
                    HorizonSpec::Auto,
                );
                let art = run(&cfg).expect("grid configs are valid");
                out.cases += 1;
                let stab = art.summary.stabilization_round;
                if !stab.is_some_and(|r| r <= bound) {
                    out.push(
                        format!(
                            "n={n} adversary={adversary} seed={seed}: stabilized at \
                             {stab:?}, bound is {bound}"
                        ),
                        Some(cfg.clone()),
                        stab,
                    );
                }
                if art.summary.max_state_bits > bit_budget {
                    out.push(
                        format!(
                            "n={n} adversary={adversary} seed={seed}: state reached {} \
                             bits, budget is {bit_budget}",
                            art.summary.max_state_bits
                        ),
                        Some(cfg),
                        None,
                    );
                }
                max_bits = max_bits.max(art.summary.max_state_bits);
            }
        }
        out.notes.push(format!(
            "n={n}: max state bits {max_bits} of budget {bit_budget} \
             (measured constant {:.3})",
            max_bits as f64 / (bit_budget / 64) as f64
        ));
    }
    out
}

fn baseline_views(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::BaselineViews);

    // Stabilization over the full grid: census correct from round 2n-2 to
    // twice that.
    for n in params.n_lo..=params.n_hi {
        let bound = 2 * n as u64 - 2;
        for adversary in GRID_ADVERSARIES {
            for seed in 0..params.seeds {
                let cfg = grid_config(
                    Algorithm::Baseline,
                    n,
                    adversary,
                    seed,
                    FaultConfig::default(),
                    HorizonSpec::Rounds(4 * n as u64),
                );
                let art = run(&cfg).expect("grid configs are valid");
                out.cases += 1;
                let stab = art.summary.stabilization_round;
                if !stab.is_some_and(|r| r <= bound) {
                    out.push(
                        format!(
                            "n={n} adversary={adversary} seed={seed}: stabilized at \
                             {stab:?}, bound is {bound}"
                        ),
                        Some(cfg),
                        stab,
                    );
                }
            }
        }
    }

    // View-level agreement with the brute-force oracle, on a smaller slice
    // of the grid: the state the algorithm maintains is exactly the view
    // the partition refinement predicts, every round.
    for n in params.n_lo..=params.n_hi.min(6) {
        let horizon = 2 * n;
        for seed in 0..params.seeds.min(10) {
            let inputs = grid_labels(n, seed);
            let trace = adversary_trace(TraceKind::RandomConnected, inputs.clone(), horizon, seed)
                .expect("grid traces are valid");
            let oracle = oracle_history_tree(&trace, horizon);
            let mut states: Vec<AgentState> = inputs
                .iter()
                .map(|input| AgentState::init(Algorithm::Baseline, input, None, None))
                .collect();
            let mut cache = DomCutCache::new();
            for t in 1..=horizon {
                let msgs: Vec<Vec<u8>> = states.iter().map(AgentState::make_message).collect();
                let graph = trace.graph(t);
                states = states
                    .into_iter()
                    .enumerate()
                    .map(|(p, s)| {
                        let recv: Vec<(&[u8], u64)> = graph
                            .neighbor_counts(p)
                            .into_iter()
                            .map(|(q, copies)| (msgs[q].as_slice(), copies as u64))
                            .collect();
                        s.step_cached(&recv, &mut cache).state
                    })
                    .collect();
                for (p, s) in states.iter().enumerate() {
                    out.cases += 1;
                    let view = s.view().expect("baseline states stay healthy");
                    if !view.isomorphic(&oracle.agent_view(p, t)) {
                        out.push(
                            format!(
                                "n={n} seed={seed} agent={p} round={t}: maintained view \
                                 differs from the oracle view"
                            ),
                            Some(grid_config(
                                Algorithm::Baseline,
                                n,
                                "random_connected",
                                seed,
                                FaultConfig::default(),
                                HorizonSpec::Rounds(horizon as u64),
                            )),
                            Some(t as u64),
                        );
                    }
                }
            }
        }
    }
    out
}

fn frozen_states(params: SuiteParams) -> SuiteOutcome {
    let mut out = SuiteOutcome::new(Suite::FrozenStates);
    for n in params.n_lo..=params.n_hi {
        for adversary in GRID_ADVERSARIES {
            for seed in 0..params.seeds {
                let cfg = grid_config(
                    Algorithm::FiniteState,
                    n,
                    adversary,
                    seed,
                    FaultConfig::default(),
                    HorizonSpec::Auto,
                );
                let art = run(&cfg).expect("grid configs are valid");
                out.cases += 1;
                let first = art
                    .records
                    .iter()
                    .position(|r| r.round > 0 && r.frozen_flags.iter().all(|&f| f));
                let Some(first) = first else {
                    out.push(
                        format!(
                            "n={n} adversary={adversary} seed={seed}: no round froze all \
                             agents within the horizon"
                        ),
                        Some(cfg),
                        None,
                    );
                    continue;
                };
                let base = &art.records[first].agent_outputs;
                for rec in &art.records[first..] {
                    if !rec.frozen_flags.iter().all(|&f| f) {
                        out.push(
                            format!(
                                "n={n} adversary={adversary} seed={seed}: agents thawed at \
                                 round {} after freezing at {}",
                                rec.round, art.records[first].round
                            ),
                            Some(cfg.clone()),
                            Some(rec.round),
                        );
                        break;
                    }
                    if rec.agent_outputs != *base {
                        out.push(
                            format!(
                                "n={n} adversary={adversary} seed={seed}: outputs moved at \
                                 round {} despite frozen states",
                                rec.round
                            ),
                            Some(cfg.clone()),
                            Some(rec.round),
                        );
                        break;
                    }
                }
            }
        }
    }
    out
}
