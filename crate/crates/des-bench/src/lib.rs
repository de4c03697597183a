//! Desk-scale feasibility measurements for the decision-event pipeline.
//!
//! Measures, per evidence tier, the stages that dominate per-event cost:
//! canonicalize+hash alone, validation alone, end-to-end seal+append, and
//! seal+append with periodic Merkle checkpointing. Synthesis happens
//! outside every timed region. Reported payload sizes are the canonical
//! draft bytes (pre-seal), matching the tier band definitions; sealing adds
//! a fixed ~220-byte chain overhead on top.
//!
//! Only relative properties are checked against the feasibility envelope
//! (ratios, bands, rule-count constancy) - published absolute throughput
//! figures for other systems are hardware-specific and not reproducible
//! here.

use des_core::event::DecisionEvent;
use des_core::ledger::{Ledger, LedgerConfig};
use des_core::store::StoreConfig;
use des_core::tiering::{estimate_payload_size, tier_band, BandAssessment};
use des_core::tokens::EvidenceTier;
use des_core::{crypto, synth, validator};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    CanonicalizeHash,
    Validate,
    SealAppend,
    SealAppendCheckpointed,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::CanonicalizeHash,
        Stage::Validate,
        Stage::SealAppend,
        Stage::SealAppendCheckpointed,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Stage::CanonicalizeHash => "canonicalize+hash",
            Stage::Validate => "validate",
            Stage::SealAppend => "seal+append",
            Stage::SealAppendCheckpointed => "seal+append+checkpoint",
        }
    }

    fn backend(&self) -> &'static str {
        match self {
            Stage::CanonicalizeHash => "sha-256",
            Stage::Validate => "rule-engine",
            Stage::SealAppend => "linear-chain",
            Stage::SealAppendCheckpointed => "chain+merkle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub tiers: Vec<EvidenceTier>,
    pub stages: Vec<Stage>,
    /// Timed span per (tier, stage).
    pub duration: Duration,
    pub warmup: Duration,
    pub seed: u64,
    /// Parallel single-writer streams for the seal stages.
    pub streams: usize,
    pub checkpoint_interval: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tiers: EvidenceTier::ALL.to_vec(),
            stages: Stage::ALL.to_vec(),
            duration: Duration::from_secs(2),
            warmup: Duration::from_millis(200),
            seed: 7,
            streams: 1,
            checkpoint_interval: 1024,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineDescriptor {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
}

impl MachineDescriptor {
    fn capture() -> Self {
        MachineDescriptor {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageResult {
    pub tier: EvidenceTier,
    pub stage: Stage,
    pub backend: String,
    pub events_per_sec: f64,
    pub median_latency_us: f64,
    pub p99_latency_us: f64,
    pub median_payload_bytes: u64,
    pub payload_band: BandAssessment,
    pub samples: u64,
    pub streams: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulesEvaluated {
    pub lightweight_small: u32,
    pub lightweight_padded: u32,
    pub sampled: u32,
    pub full: u32,
    pub constant_at_lightweight: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: MachineDescriptor,
    pub seed: u64,
    pub duration_secs: f64,
    pub warmup_secs: f64,
    pub results: Vec<StageResult>,
    pub rules_evaluated: RulesEvaluated,
    /// Tier 1 / Tier 3 end-to-end seal+append throughput.
    pub tier1_tier3_seal_ratio: Option<f64>,
}

struct Samples {
    latencies_us: Vec<f64>,
    busy: Duration,
}

impl Samples {
    fn new() -> Self {
        Samples {
            latencies_us: Vec::with_capacity(1 << 16),
            busy: Duration::ZERO,
        }
    }

    fn merge(&mut self, other: Samples) {
        self.latencies_us.extend(other.latencies_us);
        self.busy += other.busy;
    }

    fn result(
        mut self,
        tier: EvidenceTier,
        stage: Stage,
        payload_bytes: u64,
        streams: usize,
    ) -> StageResult {
        self.latencies_us.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let n = self.latencies_us.len();
        let median = if n == 0 { 0.0 } else { self.latencies_us[n / 2] };
        let p99 = if n == 0 {
            0.0
        } else {
            self.latencies_us[((n - 1) as f64 * 0.99) as usize]
        };
        // Aggregate throughput over per-thread busy time; with W streams
        // the sections run concurrently, so scale by stream count.
        let busy = self.busy.as_secs_f64().max(f64::EPSILON);
        let events_per_sec = n as f64 / busy * streams as f64;
        let (lo, hi) = tier_band(tier);
        let band = if (payload_bytes as usize) < lo {
            BandAssessment::Below
        } else if payload_bytes as usize > hi {
            BandAssessment::Above
        } else {
            BandAssessment::Within
        };
        StageResult {
            tier,
            stage,
            backend: stage.backend().to_string(),
            events_per_sec,
            median_latency_us: median,
            p99_latency_us: p99,
            median_payload_bytes: payload_bytes,
            payload_band: band,
            samples: n as u64,
            streams,
        }
    }
}

const POOL: usize = 384;
const BATCH: usize = 256;

fn stamped_pool(tier: EvidenceTier, seed: u64) -> Vec<DecisionEvent> {
    let mut drafts = synth::generate_synthetic(tier, seed, POOL);
    for (i, draft) in drafts.iter_mut().enumerate() {
        let temporal = draft.temporal_metadata.get_or_insert_with(Default::default);
        temporal.sequence_number = Some(i as u64 + 1);
        temporal.hash_chain = Some(des_core::event::HashChain {
            previous_hash: Some(
                des_core::event::Hex64::parse(des_core::GENESIS_HASH).expect("sentinel"),
            ),
            current_hash: None,
            algorithm: Some(crypto::HASH_ALG_SHA256.to_string()),
            extensions: Default::default(),
        });
    }
    drafts
}

fn median_payload_bytes(tier: EvidenceTier, seed: u64) -> u64 {
    let drafts = synth::generate_synthetic(tier, seed, 64);
    let mut sizes: Vec<usize> = drafts.iter().map(|d| estimate_payload_size(d).bytes).collect();
    sizes.sort_unstable();
    sizes[sizes.len() / 2] as u64
}

fn time_loop<F: FnMut(usize)>(duration: Duration, warmup: Duration, pool_len: usize, mut op: F) -> Samples {
    let mut samples = Samples::new();
    let warm_until = Instant::now() + warmup;
    let mut i = 0usize;
    while Instant::now() < warm_until {
        op(i % pool_len);
        i += 1;
    }
    let mut spent = Duration::ZERO;
    while spent < duration {
        let t0 = Instant::now();
        op(i % pool_len);
        let dt = t0.elapsed();
        samples.latencies_us.push(dt.as_secs_f64() * 1e6);
        samples.busy += dt;
        spent += dt;
        i += 1;
    }
    samples
}

fn run_hash_stage(tier: EvidenceTier, cfg: &BenchConfig) -> Samples {
    let pool = stamped_pool(tier, cfg.seed);
    time_loop(cfg.duration, cfg.warmup, pool.len(), |i| {
        let digest = crypto::compute_event_hash(&pool[i]).expect("stamped drafts hash");
        std::hint::black_box(digest);
    })
}

fn run_validate_stage(tier: EvidenceTier, cfg: &BenchConfig) -> Samples {
    let pool = stamped_pool(tier, cfg.seed);
    time_loop(cfg.duration, cfg.warmup, pool.len(), |i| {
        let report = validator::validate(&pool[i]);
        std::hint::black_box(report.rules_evaluated);
    })
}

/// Seal+append with uniquely re-identified clones of the pool; clone and
/// re-identification happen outside the timed region, batch by batch.
fn run_seal_stage(
    tier: EvidenceTier,
    cfg: &BenchConfig,
    checkpoint_interval: u64,
    thread_salt: u64,
) -> Samples {
    let dir = tempfile::tempdir().expect("tempdir");
    let ledger = Ledger::open(
        dir.path(),
        LedgerConfig {
            checkpoint_interval,
            store: StoreConfig {
                sync_writes: false,
                ..StoreConfig::default()
            },
            ..LedgerConfig::default()
        },
    )
    .expect("ledger opens");
    let pool = synth::generate_synthetic(tier, cfg.seed ^ thread_salt, POOL);
    let stream = format!("bench-{thread_salt}");

    let mut samples = Samples::new();
    let mut counter: u128 = u128::from(thread_salt) << 64;
    let stream_for_env = stream.clone();
    let mut prepare_batch = |counter: &mut u128| -> Vec<DecisionEvent> {
        (0..BATCH)
            .map(|k| {
                let mut draft = pool[(*counter as usize + k) % pool.len()].clone();
                *counter += 1;
                let id = des_core::event::UuidString::from_uuid(uuid::Uuid::from_u128(*counter));
                let context = draft.decision_context.get_or_insert_with(Default::default);
                context.decision_id = Some(id);
                if let Some(env) = context.environment.as_mut() {
                    env.system_id = stream_for_env.clone();
                }
                draft
            })
            .collect()
    };

    let warm_until = Instant::now() + cfg.warmup;
    while Instant::now() < warm_until {
        for draft in prepare_batch(&mut counter) {
            ledger.submit(draft, Some(&stream)).expect("bench submit");
        }
    }
    let mut spent = Duration::ZERO;
    while spent < cfg.duration {
        let batch = prepare_batch(&mut counter);
        for draft in batch {
            let t0 = Instant::now();
            let receipt = ledger.submit(draft, Some(&stream)).expect("bench submit");
            let dt = t0.elapsed();
            std::hint::black_box(receipt.sequence_number);
            samples.latencies_us.push(dt.as_secs_f64() * 1e6);
            samples.busy += dt;
            spent += dt;
        }
    }
    samples
}

fn rules_snapshot(seed: u64) -> RulesEvaluated {
    let small = synth::generate_synthetic(EvidenceTier::Lightweight, seed, 1).pop().expect("one");
    let mut padded = small.clone();
    if let Some(logic) = padded.decision_logic.as_mut() {
        logic.output = Some(serde_json::json!({
            "decision": "approve",
            "detail": "x".repeat(4600)
        }));
    }
    let sampled = synth::generate_synthetic(EvidenceTier::Sampled, seed, 1).pop().expect("one");
    let full = synth::generate_synthetic(EvidenceTier::Full, seed, 1).pop().expect("one");
    let small_count = validator::validate_draft(&small).rules_evaluated;
    let padded_count = validator::validate_draft(&padded).rules_evaluated;
    RulesEvaluated {
        lightweight_small: small_count,
        lightweight_padded: padded_count,
        sampled: validator::validate_draft(&sampled).rules_evaluated,
        full: validator::validate_draft(&full).rules_evaluated,
        constant_at_lightweight: small_count == padded_count,
    }
}

pub fn run_benchmark(cfg: &BenchConfig) -> BenchReport {
    let mut results = Vec::new();
    for &tier in &cfg.tiers {
        let payload = median_payload_bytes(tier, cfg.seed);
        for &stage in &cfg.stages {
            let samples = match stage {
                Stage::CanonicalizeHash => run_hash_stage(tier, cfg),
                Stage::Validate => run_validate_stage(tier, cfg),
                Stage::SealAppend | Stage::SealAppendCheckpointed => {
                    let interval = if stage == Stage::SealAppend {
                        u64::MAX
                    } else {
                        cfg.checkpoint_interval
                    };
                    if cfg.streams <= 1 {
                        run_seal_stage(tier, cfg, interval, 0)
                    } else {
                        let mut merged = Samples::new();
                        std::thread::scope(|scope| {
                            let handles: Vec<_> = (0..cfg.streams)
                                .map(|w| {
                                    scope.spawn(move || run_seal_stage(tier, cfg, interval, w as u64 + 1))
                                })
                                .collect();
                            for handle in handles {
                                merged.merge(handle.join().expect("bench thread"));
                            }
                        });
                        merged
                    }
                }
            };
            let streams = if matches!(stage, Stage::SealAppend | Stage::SealAppendCheckpointed) {
                cfg.streams.max(1)
            } else {
                1
            };
            results.push(samples.result(tier, stage, payload, streams));
        }
    }

    let throughput = |tier, stage| {
        results
            .iter()
            .find(|r| r.tier == tier && r.stage == stage)
            .map(|r| r.events_per_sec)
    };
    let ratio = match (
        throughput(EvidenceTier::Lightweight, Stage::SealAppend),
        throughput(EvidenceTier::Full, Stage::SealAppend),
    ) {
        (Some(t1), Some(t3)) if t3 > 0.0 => Some(t1 / t3),
        _ => None,
    };

    BenchReport {
        machine: MachineDescriptor::capture(),
        seed: cfg.seed,
        duration_secs: cfg.duration.as_secs_f64(),
        warmup_secs: cfg.warmup.as_secs_f64(),
        results,
        rules_evaluated: rules_snapshot(cfg.seed),
        tier1_tier3_seal_ratio: ratio,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvelopeAssessment {
    pub checks: Vec<EnvelopeCheck>,
    pub all_pass: bool,
    pub verdict: String,
}

/// Relative-property checks only: the sub-millisecond hashing claim, the
/// tier throughput ratio, rule-count constancy, and payload bands.
pub fn compare_to_envelope(report: &BenchReport) -> EnvelopeAssessment {
    let mut checks = Vec::new();

    let t1_hash = report
        .results
        .iter()
        .find(|r| r.tier == EvidenceTier::Lightweight && r.stage == Stage::CanonicalizeHash);
    checks.push(match t1_hash {
        Some(r) => EnvelopeCheck {
            name: "tier1-hash-sub-millisecond".into(),
            pass: r.median_latency_us < 1_000.0,
            detail: format!("median canonicalize+hash latency {:.1} us", r.median_latency_us),
        },
        None => EnvelopeCheck {
            name: "tier1-hash-sub-millisecond".into(),
            pass: false,
            detail: "stage not measured".into(),
        },
    });

    checks.push(match report.tier1_tier3_seal_ratio {
        Some(ratio) => EnvelopeCheck {
            name: "tier1-vs-tier3-throughput-ratio".into(),
            pass: ratio >= 2.0,
            detail: format!("tier1/tier3 seal+append throughput ratio {ratio:.1} (>= 2 expected)"),
        },
        None => EnvelopeCheck {
            name: "tier1-vs-tier3-throughput-ratio".into(),
            pass: false,
            detail: "seal+append not measured for both tiers".into(),
        },
    });

    checks.push(EnvelopeCheck {
        name: "lightweight-validation-constant".into(),
        pass: report.rules_evaluated.constant_at_lightweight,
        detail: format!(
            "rules evaluated at lightweight: {} (300 B) vs {} (padded ~5 KB)",
            report.rules_evaluated.lightweight_small, report.rules_evaluated.lightweight_padded
        ),
    });

    let band_failures: Vec<String> = report
        .results
        .iter()
        .filter(|r| r.payload_band != BandAssessment::Within)
        .map(|r| format!("{} {}: {} B", r.tier, r.stage.label(), r.median_payload_bytes))
        .collect();
    checks.push(EnvelopeCheck {
        name: "payload-bands".into(),
        pass: band_failures.is_empty(),
        detail: if band_failures.is_empty() {
            "median draft payloads inside their tier bands".into()
        } else {
            format!("outside band: {}", band_failures.join("; "))
        },
    });

    let all_pass = checks.iter().all(|c| c.pass);
    EnvelopeAssessment {
        verdict: if all_pass {
            "consistent with the estimated feasibility envelope".into()
        } else {
            "outside the estimated feasibility envelope".into()
        },
        checks,
        all_pass,
    }
}

/// Plain-text table for terminal output.
pub fn render_table(report: &BenchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "machine: {} {} ({} cpus), seed {}, {:.1}s per stage\n",
        report.machine.os, report.machine.arch, report.machine.logical_cpus, report.seed, report.duration_secs
    ));
    out.push_str(&format!(
        "{:<12} {:<24} {:>12} {:>12} {:>12} {:>10} {:>8}\n",
        "tier", "stage", "events/s", "median us", "p99 us", "payload B", "band"
    ));
    for r in &report.results {
        out.push_str(&format!(
            "{:<12} {:<24} {:>12.0} {:>12.2} {:>12.2} {:>10} {:>8}\n",
            r.tier.to_string(),
            r.stage.label(),
            r.events_per_sec,
            r.median_latency_us,
            r.p99_latency_us,
            r.median_payload_bytes,
            match r.payload_band {
                BandAssessment::Within => "within",
                BandAssessment::Below => "below",
                BandAssessment::Above => "above",
            }
        ));
    }
    if let Some(ratio) = report.tier1_tier3_seal_ratio {
        out.push_str(&format!("tier1/tier3 seal+append throughput ratio: {ratio:.1}\n"));
    }
    out.push_str(&format!(
        "rules evaluated: lightweight {} / padded {} / sampled {} / full {}\n",
        report.rules_evaluated.lightweight_small,
        report.rules_evaluated.lightweight_padded,
        report.rules_evaluated.sampled,
        report.rules_evaluated.full
    ));
    out
}
