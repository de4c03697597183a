use crate::util::parse_duration;
use anyhow::{bail, Result};
use clap::Args;
use des_bench::{compare_to_envelope, render_table, run_benchmark, BenchConfig, Stage};
use des_core::tokens::EvidenceTier;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Args)]
pub struct BenchArgs {
    /// "all" or a comma list of lightweight,sampled,full
    #[arg(long, default_value = "all")]
    pub tiers: String,
    /// "all" or a comma list of hash,validate,seal,seal-checkpointed
    #[arg(long, default_value = "all")]
    pub stages: String,
    /// Timed span per (tier, stage), e.g. 10s or 500ms
    #[arg(long, default_value = "2s")]
    pub duration: String,
    #[arg(long, default_value = "200ms")]
    pub warmup: String,
    /// Parallel single-writer streams for the seal stages
    #[arg(long, default_value_t = 1)]
    pub streams: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub checkpoint_interval: u64,
    /// Write the full report JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the report JSON to stdout instead of the table
    #[arg(long)]
    pub json: bool,
}

fn parse_tiers(s: &str) -> Result<Vec<EvidenceTier>> {
    if s == "all" {
        return Ok(EvidenceTier::ALL.to_vec());
    }
    s.split(',')
        .map(|t| t.trim().parse::<EvidenceTier>().map_err(anyhow::Error::msg))
        .collect()
}

fn parse_stages(s: &str) -> Result<Vec<Stage>> {
    if s == "all" {
        return Ok(Stage::ALL.to_vec());
    }
    s.split(',')
        .map(|t| match t.trim() {
            "hash" => Ok(Stage::CanonicalizeHash),
            "validate" => Ok(Stage::Validate),
            "seal" => Ok(Stage::SealAppend),
            "seal-checkpointed" => Ok(Stage::SealAppendCheckpointed),
            other => bail!("unknown stage {other:?}"),
        })
        .collect()
}

pub fn run(args: BenchArgs) -> Result<ExitCode> {
    let cfg = BenchConfig {
        tiers: parse_tiers(&args.tiers)?,
        stages: parse_stages(&args.stages)?,
        duration: parse_duration(&args.duration)?,
        warmup: parse_duration(&args.warmup)?,
        seed: args.seed,
        streams: args.streams,
        checkpoint_interval: args.checkpoint_interval,
    };
    let report = run_benchmark(&cfg);
    let assessment = compare_to_envelope(&report);

    if let Some(path) = &args.out {
        let blob = serde_json::json!({"report": report, "envelope": assessment});
        std::fs::write(path, serde_json::to_vec_pretty(&blob)?)?;
    }
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({"report": report, "envelope": assessment}))?
        );
    } else {
        print!("{}", render_table(&report));
        for check in &assessment.checks {
            println!("[{}] {}: {}", if check.pass { "pass" } else { "FAIL" }, check.name, check.detail);
        }
        println!("{}", assessment.verdict);
    }
    Ok(if assessment.all_pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
