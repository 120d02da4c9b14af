//! Golden run: three agents on a fixed path, checked against a committed
//! trace file so the wire format and the baseline behavior stay stable.

use histree::counting::FrequencyMap;
use histree::netsim::trace::NetworkTrace;
use histree::netsim::{run, AdversaryConfig, ExperimentConfig, HorizonSpec, InputsSpec};
use histree::InputLabel;

fn lbl(s: &str) -> InputLabel {
    InputLabel::new(s).unwrap()
}

#[test]
fn committed_t3_trace_parses_and_round_trips() {
    let text = include_str!("fixtures/t3.trace");
    let trace = NetworkTrace::from_text(text).unwrap();
    assert_eq!(trace.n(), 3);
    assert_eq!(trace.horizon(), 12);
    assert_eq!(trace.inputs(), [lbl("a"), lbl("a"), lbl("b")]);
    for t in 1..=12 {
        assert_eq!(trace.graph(t).links(), [(0, 1), (1, 2)]);
    }
    assert_eq!(trace.to_text().unwrap(), text);
}

#[test]
fn baseline_on_t3_stabilizes_by_round_four() {
    let dir = std::env::temp_dir().join(format!("t3-golden-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t3.trace");
    std::fs::write(&path, include_str!("fixtures/t3.trace")).unwrap();

    let config = ExperimentConfig {
        algorithm: histree::agent::Algorithm::Baseline,
        n: 3,
        inputs: InputsSpec::List(vec![lbl("a"), lbl("a"), lbl("b")]),
        adversary: AdversaryConfig {
            kind: "file".into(),
            path: Some(path.to_string_lossy().into_owned()),
        },
        seed: 0,
        horizon: HorizonSpec::Rounds(12),
        faults: Default::default(),
        check: false,
        out: None,
    };
    let artifacts = run(&config).unwrap();

    let truth = FrequencyMap::census(&[lbl("a"), lbl("a"), lbl("b")]);
    assert_eq!(artifacts.summary.truth_census, truth);
    assert!(artifacts.summary.bound_satisfied);
    let stab = artifacts.summary.stabilization_round.expect("stabilizes");
    assert!(stab <= 4, "stabilized at {stab}, want <= 2n - 2 = 4");
    // From stabilization on, every agent reports the census every round.
    for rec in &artifacts.records[stab as usize..] {
        for out in &rec.agent_outputs {
            assert_eq!(out, &truth, "round {}", rec.round);
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}
