use anyhow::{bail, Context, Result};
use clap::Args;
use des_core::enrichment;
use des_core::event::EventTime;
use des_core::store::{EventStore, StoreConfig};
use serde_json::{Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct EnrichArgs {
    /// Store root directory
    #[arg(long, env = "DES_STORE")]
    pub store: PathBuf,
    /// Target decision_id (must already be sealed in the store)
    #[arg(long)]
    pub decision_id: String,
    /// ground_truth, quality_update, or a namespaced token
    #[arg(long)]
    pub kind: String,
    /// Inline JSON object payload
    #[arg(long, conflicts_with = "payload_file")]
    pub payload: Option<String>,
    /// Payload from a JSON file
    #[arg(long)]
    pub payload_file: Option<PathBuf>,
    /// Creation timestamp (defaults to now, millisecond UTC)
    #[arg(long)]
    pub created_at: Option<String>,
}

pub fn run(args: EnrichArgs) -> Result<ExitCode> {
    let payload_text = match (&args.payload, &args.payload_file) {
        (Some(inline), None) => inline.clone(),
        (None, Some(path)) => std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?,
        _ => bail!("exactly one of --payload or --payload-file is required"),
    };
    let payload: Value = serde_json::from_str(&payload_text).context("payload is not JSON")?;
    let Value::Object(payload) = payload else {
        bail!("payload must be a JSON object");
    };
    let payload: Map<String, Value> = payload;
    let created_at = match args.created_at.as_deref() {
        Some(ts) => EventTime::parse(ts).map_err(anyhow::Error::msg)?,
        None => EventTime::now(),
    };

    let store = EventStore::open(&args.store, StoreConfig::default())?;
    let Some(target) = store.lookup(&args.decision_id)? else {
        eprintln!("unknown decision_id {}", args.decision_id);
        return Ok(ExitCode::FAILURE);
    };
    let record = enrichment::create_enrichment(&target, &args.kind, payload, created_at)?;
    store.append_enrichment(&record)?;
    println!("{}", serde_json::to_string_pretty(&record)?);
    Ok(ExitCode::SUCCESS)
}
