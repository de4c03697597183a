//! Property suite for the schema invariants.

use des_core::event::{self, DecisionEvent};
use des_core::tokens::EvidenceTier;
use des_core::{canonical, merkle, synth, tiering, validator};
use proptest::prelude::*;
use serde_json::{json, Map, Value};

// Arbitrary JSON without nulls, non-finite numbers, or integers beyond the
// I-JSON interoperable range (canonical numbers are IEEE doubles, so larger
// integers are deliberately lossy).
const SAFE_INT: i64 = (1 << 53) - 1;

fn arb_json(depth: u32) -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        any::<bool>().prop_map(Value::Bool),
        (-SAFE_INT..=SAFE_INT).prop_map(|n| json!(n)),
        any::<f64>().prop_filter("finite", |f| f.is_finite()).prop_map(|f| json!(f)),
        "[ -~]{0,24}".prop_map(Value::String),
        "\\PC{0,12}".prop_map(Value::String),
    ];
    leaf.prop_recursive(depth, 48, 6, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(Value::Array),
            prop::collection::btree_map("[a-z:_][a-z0-9:_.-]{0,14}", inner, 0..5).prop_map(|m| {
                Value::Object(m.into_iter().collect::<Map<String, Value>>())
            }),
        ]
    })
}

fn arb_event() -> impl Strategy<Value = DecisionEvent> {
    (
        0u64..u64::MAX,
        0usize..40,
        arb_json(3),
        prop::collection::btree_map("[a-z][a-z0-9_]{0,8}:[a-z][a-z0-9_.-]{0,10}", arb_json(2), 0..3),
    )
        .prop_map(|(seed, index, output, extensions)| {
            let tier = EvidenceTier::ALL[(seed % 3) as usize];
            let mut drafts = synth::generate_synthetic(tier, seed % 1024, (index % 8) + 1);
            let mut event = drafts.swap_remove(index % drafts.len().max(1) % ((index % 8) + 1));
            event.decision_logic.as_mut().unwrap().output = Some(output);
            for (k, v) in extensions {
                event.extensions.insert(k, v);
            }
            event
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// parse(serialize(e)) is structurally identical to e for every event
    /// in wire form. Canonical numbers are doubles, so a constructed event
    /// holding the double 1.0 serializes as `1`; one serialize reaches the
    /// wire fixed point and from there the round trip is exact, extensions
    /// and arbitrary outputs included.
    #[test]
    fn round_trip_identity(event in arb_event()) {
        let wire = event::serialize_event(&event);
        let parsed = event::parse_event(&wire).expect("serialized events parse");
        let wire_again = event::serialize_event(&parsed);
        prop_assert_eq!(&wire, &wire_again);
        let parsed_again = event::parse_event(&wire_again).expect("parses");
        prop_assert_eq!(parsed_again, parsed);
    }

    /// No serialized event contains a JSON null.
    #[test]
    fn null_freedom(event in arb_event()) {
        let value: Value = serde_json::from_slice(&event::serialize_event(&event)).unwrap();
        prop_assert!(event::find_null(&value, &mut String::new()).is_none());
    }

    /// The ECMAScript rendering round-trips every finite double exactly.
    #[test]
    fn number_formatting_round_trips(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let mut out = Vec::new();
        canonical::write_number(x, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let back: f64 = text.parse().unwrap();
        if x == 0.0 {
            prop_assert_eq!(text, "0");
        } else {
            prop_assert_eq!(back, x, "{}", text);
        }
    }

    /// Canonical bytes are invariant under any key-order permutation of the
    /// same document.
    #[test]
    fn canonicalization_ignores_key_order(value in arb_json(3), seed in any::<u64>()) {
        let canonical_a = canonical::canonicalize(&value).unwrap();
        let shuffled = shuffle_value(&value, seed);
        let canonical_b = canonical::canonicalize(&shuffled).unwrap();
        prop_assert_eq!(canonical_a, canonical_b);
    }

    /// Core enum fields reject non-namespaced out-of-set tokens (enum
    /// closure), and namespaced ones whose prefix shadows a core member.
    #[test]
    fn enum_closure(token in "[a-z][a-z0-9_]{0,12}", core_idx in 0usize..5) {
        let mut drafts = synth::generate_synthetic(EvidenceTier::Lightweight, 5, 1);
        let mut event = drafts.pop().unwrap();
        let core = des_core::tokens::CORE_LOGIC_TYPES;
        prop_assume!(!core.contains(&token.as_str()));
        event.decision_logic.as_mut().unwrap().logic_type = Some(token.clone());
        prop_assert!(validator::validate_draft(&event).has_rule("R6"), "bare token {}", token);

        event.decision_logic.as_mut().unwrap().logic_type = Some(format!("{}:{token}", core[core_idx]));
        prop_assert!(validator::validate_draft(&event).has_rule("R6"), "core prefix");

        event.decision_logic.as_mut().unwrap().logic_type = Some(format!("ns{core_idx}:{token}"));
        prop_assert!(!validator::validate_draft(&event).has_rule("R6"), "proper namespace");
    }

    /// Every projection of a valid full draft validates at its target tier
    /// and canonical sizes are monotone across tiers.
    #[test]
    fn projection_validity_and_monotonicity(seed in 0u64..512) {
        let draft = synth::generate_synthetic(EvidenceTier::Full, seed, 1).pop().unwrap();
        let mut sizes = Vec::new();
        for tier in EvidenceTier::ALL {
            let projected = tiering::project_to_tier(&draft, tier);
            let report = validator::validate_draft(&projected);
            prop_assert!(report.valid, "{tier}: {:?}", report.violations);
            sizes.push(event::serialize_event(&projected).len());
        }
        prop_assert!(sizes[0] <= sizes[1] && sizes[1] <= sizes[2], "{:?}", sizes);
    }

    /// Inclusion proofs verify for every leaf and fail once the root moves.
    #[test]
    fn merkle_proofs(n in 1usize..48, tamper in any::<u64>()) {
        let leaves: Vec<String> = (0..n)
            .map(|i| des_core::crypto::sha256_hex(format!("{tamper}:{i}").as_bytes()))
            .collect();
        let root = merkle::merkle_root(&leaves).unwrap();
        for i in 0..n {
            let proof = merkle::inclusion_proof(&leaves, i).unwrap();
            prop_assert!(merkle::verify_inclusion(&proof, &root));
        }
        let other_root = des_core::crypto::sha256_hex(b"elsewhere");
        let proof = merkle::inclusion_proof(&leaves, (tamper as usize) % n).unwrap();
        prop_assert!(!merkle::verify_inclusion(&proof, &other_root));
    }
}

fn shuffle_value(value: &Value, seed: u64) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map
                .iter()
                .map(|(k, v)| (k.clone(), shuffle_value(v, seed.wrapping_add(k.len() as u64))))
                .collect();
            // Deterministic pseudo-shuffle.
            let mut state = seed | 1;
            for i in (1..entries.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                entries.swap(i, j);
            }
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, v);
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(|v| shuffle_value(v, seed)).collect()),
        other => other.clone(),
    }
}
