use crate::util::{doc_label, expand_inputs, read_documents};
use anyhow::Result;
use clap::Args;
use des_core::tokens::EvidenceTier;
use des_core::validator::{self, ValidationMode};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct ValidateArgs {
    /// Event documents: .json (one event) or .ndjson (one per line);
    /// directories are expanded
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    /// Validate at this tier instead of each event's declared tier
    #[arg(long, value_name = "TIER")]
    pub tier_override: Option<EvidenceTierArg>,
    /// Treat documents as drafts (sequence number and hash chain are
    /// assigned at sealing and not required)
    #[arg(long)]
    pub draft: bool,
    /// Emit full JSON reports instead of the summary
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy)]
pub struct EvidenceTierArg(pub EvidenceTier);

impl std::str::FromStr for EvidenceTierArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(EvidenceTierArg)
    }
}

pub fn run(args: ValidateArgs) -> Result<ExitCode> {
    let mode = if args.draft { ValidationMode::Draft } else { ValidationMode::Sealed };
    let tier = args.tier_override.map(|t| t.0);
    let mut outputs = Vec::new();
    let mut total = 0usize;
    let mut invalid = 0usize;

    for path in expand_inputs(&args.files)? {
        for (line, bytes) in read_documents(&path)? {
            total += 1;
            let label = doc_label(&path, line);
            match des_core::parse_event(&bytes) {
                Err(e) => {
                    invalid += 1;
                    if args.json {
                        outputs.push(json!({"document": label, "parse_error": e.to_string()}));
                    } else {
                        println!("{label}: PARSE ERROR: {e}");
                    }
                }
                Ok(event) => {
                    let report = validator::validate_with(&event, mode, tier);
                    if !report.valid {
                        invalid += 1;
                    }
                    if args.json {
                        outputs.push(json!({"document": label, "report": report}));
                    } else if report.valid {
                        let warn = if report.warnings.is_empty() {
                            String::new()
                        } else {
                            format!(" ({} warnings)", report.warnings.len())
                        };
                        println!("{label}: valid{warn}");
                    } else {
                        let rules: Vec<String> = report
                            .violations
                            .iter()
                            .map(|v| format!("{} at {}", v.rule_id, v.path))
                            .collect();
                        println!("{label}: INVALID: {}", rules.join("; "));
                    }
                }
            }
        }
    }

    if args.json {
        println!("{}", serde_json::to_string_pretty(&outputs)?);
    } else {
        println!("{total} documents, {} valid, {invalid} invalid", total - invalid);
    }
    Ok(if invalid == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
