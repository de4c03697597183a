use anyhow::Result;
use clap::Args;
use des_core::store::{EventStore, StoreConfig};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct VerifyArgs {
    /// Store root directory
    #[arg(long, env = "DES_STORE")]
    pub store: PathBuf,
    /// Verify a single stream instead of every stream
    #[arg(long)]
    pub stream: Option<String>,
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: VerifyArgs) -> Result<ExitCode> {
    let store = EventStore::open(&args.store, StoreConfig::default())?;
    let streams = match &args.stream {
        Some(s) => vec![s.clone()],
        None => store.streams(),
    };
    let mut findings_total = 0usize;
    let mut outputs = Vec::new();
    for stream in &streams {
        let report = store.verify_stream(stream)?;
        let checkpoint_findings = store.verify_checkpoints(stream)?;
        findings_total += report.findings.len() + checkpoint_findings.len();
        if args.json {
            let mut value = serde_json::to_value(&report)?;
            value["checkpoint_findings"] = json!(checkpoint_findings);
            outputs.push(value);
        } else {
            println!(
                "{stream}: {} events, {} findings, {} warnings, {} checkpoint findings",
                report.events_checked,
                report.findings.len(),
                report.warnings.len(),
                checkpoint_findings.len()
            );
            for f in &report.findings {
                println!(
                    "  [{}] index {} seq {:?}: {}",
                    serde_json::to_value(f.kind)?.as_str().unwrap_or("finding"),
                    f.index,
                    f.sequence_number,
                    f.detail
                );
            }
            for c in &checkpoint_findings {
                println!("  [checkpoint] {c}");
            }
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outputs)?);
    } else if findings_total == 0 {
        println!("all {} stream(s) verify clean", streams.len());
    }
    Ok(if findings_total == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
