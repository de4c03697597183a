//! Smoke coverage for the harness: short runs, stable shape, envelope
//! checks wired to the right fields.

use des_bench::{compare_to_envelope, render_table, run_benchmark, BenchConfig, Stage};
use des_core::tokens::EvidenceTier;
use std::time::Duration;

fn quick_cfg() -> BenchConfig {
    BenchConfig {
        tiers: vec![EvidenceTier::Lightweight, EvidenceTier::Full],
        stages: vec![Stage::CanonicalizeHash, Stage::SealAppend],
        duration: Duration::from_millis(150),
        warmup: Duration::from_millis(30),
        seed: 11,
        streams: 1,
        checkpoint_interval: 256,
    }
}

#[test]
fn short_run_produces_complete_report() {
    let report = run_benchmark(&quick_cfg());
    assert_eq!(report.results.len(), 4);
    for r in &report.results {
        assert!(r.samples > 0, "{:?} produced no samples", r.stage);
        assert!(r.events_per_sec > 0.0);
        assert!(r.median_latency_us > 0.0);
        assert!(r.p99_latency_us >= r.median_latency_us);
    }
    assert!(report.tier1_tier3_seal_ratio.is_some());
    assert!(report.rules_evaluated.constant_at_lightweight);

    let assessment = compare_to_envelope(&report);
    assert_eq!(assessment.checks.len(), 4);
    let table = render_table(&report);
    assert!(table.contains("seal+append"));

    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("tier1_tier3_seal_ratio"));
}

#[test]
fn multi_stream_mode_runs_one_writer_per_stream() {
    let cfg = BenchConfig {
        tiers: vec![EvidenceTier::Lightweight],
        stages: vec![Stage::SealAppendCheckpointed],
        duration: Duration::from_millis(120),
        warmup: Duration::from_millis(20),
        streams: 3,
        ..quick_cfg()
    };
    let report = run_benchmark(&cfg);
    assert_eq!(report.results.len(), 1);
    assert_eq!(report.results[0].streams, 3);
    assert!(report.results[0].samples > 0);
}

#[test]
fn envelope_flags_missing_stages() {
    let cfg = BenchConfig {
        tiers: vec![EvidenceTier::Sampled],
        stages: vec![Stage::Validate],
        duration: Duration::from_millis(60),
        warmup: Duration::from_millis(10),
        ..quick_cfg()
    };
    let report = run_benchmark(&cfg);
    let assessment = compare_to_envelope(&report);
    assert!(!assessment.all_pass);
    assert!(assessment
        .checks
        .iter()
        .any(|c| c.name == "tier1-hash-sub-millisecond" && !c.pass));
}
