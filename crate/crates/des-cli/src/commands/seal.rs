use crate::util::{doc_label, expand_inputs, read_documents};
use anyhow::{Context, Result};
use clap::Args;
use des_core::ledger::{Ledger, LedgerConfig};
use des_core::store::StoreConfig;
use des_core::{EventSigner, TierPolicy};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct SealArgs {
    /// Draft documents (.json or .ndjson), sealed in order
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Store root directory
    #[arg(long, env = "DES_STORE")]
    pub store: PathBuf,
    /// Stream for drafts that carry no environment.system_id
    #[arg(long)]
    pub stream: Option<String>,
    /// Tier policy file; when set, drafts are routed and projected
    #[arg(long, env = "DES_TIER_POLICY")]
    pub tier_policy: Option<PathBuf>,
    /// Hex-encoded Ed25519 seed file; sign every event before hashing
    #[arg(long)]
    pub signing_key: Option<PathBuf>,
    #[arg(long, default_value = "des-cli")]
    pub signer_id: String,
    #[arg(long, default_value_t = 1024)]
    pub checkpoint_interval: u64,
    /// Emit receipts as JSON lines
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: SealArgs) -> Result<ExitCode> {
    let tier_policy = match args.tier_policy.as_deref() {
        Some(p) => Some(TierPolicy::load(p).with_context(|| format!("loading {}", p.display()))?),
        None => None,
    };
    let signer = match args.signing_key.as_deref() {
        Some(p) => {
            let seed = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(EventSigner::from_seed_hex(seed.trim(), args.signer_id.clone(), None)?)
        }
        None => None,
    };
    let ledger = Ledger::open(
        &args.store,
        LedgerConfig {
            checkpoint_interval: args.checkpoint_interval,
            tier_policy,
            signer,
            store: StoreConfig::default(),
        },
    )?;

    let mut sealed = 0usize;
    for path in expand_inputs(&args.files)? {
        for (line, bytes) in read_documents(&path)? {
            let label = doc_label(&path, line);
            let draft = des_core::parse_event(&bytes)
                .with_context(|| format!("{label}: draft does not parse"))?;
            match ledger.submit(draft, args.stream.as_deref()) {
                Ok(receipt) => {
                    sealed += 1;
                    if args.json {
                        println!("{}", serde_json::to_string(&receipt)?);
                    } else {
                        println!(
                            "{label}: sealed {} seq {} tier {} hash {}",
                            receipt.decision_id, receipt.sequence_number, receipt.evidence_tier, receipt.current_hash
                        );
                    }
                }
                Err(e) => {
                    eprintln!("{label}: REJECTED: {e}");
                    if let des_core::ledger::SubmitError::Chain(
                        des_core::chain::ChainError::RejectedInvalid { report },
                    ) = &e
                    {
                        for v in &report.violations {
                            eprintln!("  {} at {}: {}", v.rule_id, v.path, v.message);
                        }
                    }
                    eprintln!("sealed {sealed} events before the rejection; store is unchanged past them");
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
    }
    if !args.json {
        println!("sealed {sealed} events into {}", args.store.display());
    }
    Ok(ExitCode::SUCCESS)
}
