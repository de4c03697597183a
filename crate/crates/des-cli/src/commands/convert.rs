use anyhow::{Context, Result};
use clap::Args;
use des_core::ledger::{Ledger, LedgerConfig};
use des_core::opa::{self, OpaConversionConfig};
use des_core::store::StoreConfig;
use des_core::tokens::EvidenceTier;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct ConvertOpaArgs {
    /// OPA decision log: NDJSON or a JSON array
    pub input: PathBuf,
    /// Write drafts here as NDJSON (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Evidence tier for converted drafts
    #[arg(long, default_value = "sampled")]
    pub tier: String,
    #[arg(long, default_value = "policy_enforcement")]
    pub decision_type: String,
    #[arg(long, default_value = "low")]
    pub risk_level: String,
    /// Stream identity when entries carry no labels.id
    #[arg(long, default_value = "opa")]
    pub system_id: String,
    /// Record input values as digests
    #[arg(long)]
    pub hash_inputs: bool,
    /// Key the input digests (HMAC-SHA-256)
    #[arg(long, env = "DES_DEPLOYMENT_KEY")]
    pub deployment_key: Option<String>,
    /// Seal the converted drafts directly into this store
    #[arg(long, env = "DES_STORE")]
    pub store: Option<PathBuf>,
}

pub fn run(args: ConvertOpaArgs) -> Result<ExitCode> {
    let tier: EvidenceTier = args.tier.parse().map_err(anyhow::Error::msg)?;
    let cfg = OpaConversionConfig {
        evidence_tier: tier,
        decision_type: args.decision_type.clone(),
        decision_risk_level: args.risk_level.clone(),
        fallback_system_id: args.system_id.clone(),
        hash_inputs: args.hash_inputs,
        deployment_key: args.deployment_key.clone(),
    };

    let bytes = std::fs::read(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let entries = opa::parse_opa_log(&bytes)?;

    let mut drafts = Vec::new();
    let mut failures = 0usize;
    for (i, entry) in entries.iter().enumerate() {
        match opa::convert_opa_decision(entry, &cfg) {
            Ok(draft) => drafts.push(draft),
            Err(e) => {
                failures += 1;
                eprintln!("entry {}: {e}", i + 1);
            }
        }
    }

    match &args.store {
        None => {
            let mut sink: Box<dyn Write> = match &args.out {
                Some(path) => Box::new(std::fs::File::create(path)?),
                None => Box::new(std::io::stdout().lock()),
            };
            for draft in &drafts {
                sink.write_all(&des_core::serialize_event(draft))?;
                sink.write_all(b"\n")?;
            }
        }
        Some(store) => {
            let ledger = Ledger::open(store, LedgerConfig {
                store: StoreConfig::default(),
                ..LedgerConfig::default()
            })?;
            for draft in drafts.drain(..) {
                let receipt = ledger.submit(draft, None)?;
                println!("{}", serde_json::to_string(&receipt)?);
            }
        }
    }

    eprintln!("converted {} entries, {failures} failed", entries.len() - failures);
    Ok(if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
