use std::collections::BTreeSet;
use std::path::PathBuf;

use notebridge_core::UsageKind;
use notebridge_server::Role;
use notebridge_sim::{
    run_durability, run_fuzz, run_scripted, ClientAction, NetConfig, Participant, Partition, Scenario, Simulation,
};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn people(names: &[&str]) -> Vec<Participant> {
    names.iter().map(|n| Participant { name: (*n).into(), user: None, role: Role::Pnt }).collect()
}

#[test]
fn walkthrough_matches_golden_export() {
    let scenario = Scenario::load(&fixtures().join("lecture_walkthrough.json")).unwrap();
    let run = run_scripted(&scenario, None, None).unwrap();
    assert!(run.report.converged, "{}", run.report);
    let golden = std::fs::read(fixtures().join("lecture_walkthrough.txt")).unwrap();
    assert_eq!(String::from_utf8_lossy(&run.export), String::from_utf8_lossy(&golden));
    let anns: Vec<_> = run.document.annotations.values().collect();
    assert_eq!(anns.len(), 1);
    assert!(anns[0].resolved);
    assert!(run.document.highlighted_blocks().is_empty());
    let count = |k: UsageKind| run.usage.iter().filter(|e| e.kind == k).count();
    assert_eq!(count(UsageKind::NtEmojiInserted), 1);
    assert_eq!(count(UsageKind::NtEmojiResolved), 1);
    assert_eq!(count(UsageKind::CcEmojiSent), 2);
}

#[test]
fn single_client_latency_within_bounds() {
    let net = NetConfig { seed: 3, latency_ms: (10, 30), ..NetConfig::default() };
    let mut sim = Simulation::new(net, "Solo", &people(&["a"]), None).unwrap();
    sim.schedule(0, 0, ClientAction::Reconnect);
    sim.schedule(100, 0, ClientAction::InsertBlock { index: 0, kind: Default::default() });
    for i in 0..9 {
        sim.schedule(200 + 50 * i, 0, ClientAction::Type { block: 0, pos: None, text: "x".into() });
    }
    let report = sim.run().unwrap();
    assert!(report.converged);
    assert_eq!(report.ops_total, 10);
    assert!(report.latency_stats.p95_ms <= 30.0, "{}", report);
    assert!(report.latency_stats.min_ms >= 10.0);
}

#[test]
fn partition_then_heal_converges() {
    let net = NetConfig {
        seed: 11,
        partitions: vec![Partition { start_ms: 1_000, end_ms: 3_000, side_a: BTreeSet::from(["a".to_string()]) }],
        ..NetConfig::default()
    };
    let mut sim = Simulation::new(net, "Split", &people(&["a", "b"]), None).unwrap();
    sim.schedule(0, 0, ClientAction::Reconnect);
    sim.schedule(0, 1, ClientAction::Reconnect);
    sim.schedule(200, 0, ClientAction::InsertBlock { index: 0, kind: Default::default() });
    sim.schedule(300, 0, ClientAction::Type { block: 0, pos: None, text: "shared".into() });
    for i in 0..10 {
        sim.schedule(1_200 + 100 * i, 0, ClientAction::Type { block: 0, pos: Some(0), text: "a".into() });
        sim.schedule(1_200 + 100 * i, 1, ClientAction::Type { block: 0, pos: None, text: "b".into() });
    }
    sim.run_until(2_500).unwrap();
    assert_ne!(sim.client_hash(0), sim.client_hash(1));
    let report = sim.run().unwrap();
    assert!(report.converged, "{report}");
    let text = &sim.authority_document().blocks[0].text;
    assert_eq!(text.matches('a').count(), 11);
    assert_eq!(text.matches('b').count(), 10);
}

#[test]
fn fuzz_seed_42_converges() {
    let net = NetConfig { seed: 42, drop_prob: 0.1, reorder_window: 8, ..NetConfig::default() };
    let report = run_fuzz(5, 200, net).unwrap();
    assert!(report.converged, "{report}");
    assert!(report.ops_total > 0);
}

#[test]
fn fuzz_trivial_and_deterministic() {
    let empty = run_fuzz(1, 0, NetConfig::default()).unwrap();
    assert!(empty.converged);
    assert_eq!(empty.ops_total, 0);

    let net = NetConfig { seed: 7, drop_prob: 0.2, duplicate_prob: 0.1, reorder_window: 4, ..NetConfig::default() };
    let a = run_fuzz(3, 60, net.clone()).unwrap();
    let b = run_fuzz(3, 60, net).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn crash_mid_run_recovers() {
    let clean = run_durability(None, 1).unwrap();
    assert_eq!(clean.ops_total, 300);
    assert!(clean.client_hashes.iter().all(|h| *h == clean.authority));
    for k in [1, 57, 150, 300] {
        let run = run_durability(Some(k), 1).unwrap();
        assert_eq!(run.crashes, 1, "crash point {k}");
        assert_eq!(run.authority, clean.authority, "crash point {k}");
        assert_eq!(run.ops_total, 300);
    }
}

#[test]
fn scenario_errors_are_reported() {
    let bad = r#"{"title":"t","sessions":[{"name":"a","role":"pnt"}],
        "actions":[{"at":1,"session":"a","do":"type","block":3,"text":"x"}]}"#;
    let scenario = Scenario::from_json(bad).unwrap();
    assert!(run_scripted(&scenario, None, None).is_err());
    let unknown = r#"{"title":"t","sessions":[{"name":"a","role":"pnt"}],
        "actions":[{"at":1,"session":"zz","do":"disconnect"}]}"#;
    assert!(run_scripted(&Scenario::from_json(unknown).unwrap(), None, None).is_err());
    assert!(Scenario::from_json(r#"{"title":"t","sessions":[],"actions":[{"at":1,"session":"a","do":"fly"}]}"#).is_err());
}
