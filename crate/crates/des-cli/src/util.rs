use anyhow::{bail, Context, Result};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// "250ms", "10s", "2m".
pub fn parse_duration(s: &str) -> Result<Duration> {
    let s = s.trim();
    let (digits, unit): (String, String) = (
        s.chars().take_while(|c| c.is_ascii_digit() || *c == '.').collect(),
        s.chars().skip_while(|c| c.is_ascii_digit() || *c == '.').collect(),
    );
    let value: f64 = digits.parse().with_context(|| format!("bad duration {s:?}"))?;
    let secs = match unit.as_str() {
        "ms" => value / 1000.0,
        "s" | "" => value,
        "m" => value * 60.0,
        other => bail!("unknown duration unit {other:?} in {s:?}"),
    };
    Ok(Duration::from_secs_f64(secs))
}

/// Expand files and directories into a flat document list. Directories
/// contribute their *.json and *.ndjson entries, sorted.
pub fn expand_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .with_context(|| format!("reading {}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()),
                        Some("json") | Some("ndjson")
                    )
                })
                .collect();
            entries.sort();
            out.extend(entries);
        } else {
            out.push(path.clone());
        }
    }
    if out.is_empty() {
        bail!("no input files");
    }
    Ok(out)
}

/// One document per file, or one per line for *.ndjson.
pub fn read_documents(path: &Path) -> Result<Vec<(Option<usize>, Vec<u8>)>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().and_then(|e| e.to_str()) == Some("ndjson") {
        let mut docs = Vec::new();
        for (i, line) in bytes.split(|b| *b == b'\n').enumerate() {
            if line.iter().all(|b| b.is_ascii_whitespace()) {
                continue;
            }
            docs.push((Some(i + 1), line.to_vec()));
        }
        Ok(docs)
    } else {
        Ok(vec![(None, bytes)])
    }
}

pub fn doc_label(path: &Path, line: Option<usize>) -> String {
    match line {
        Some(n) => format!("{}:{n}", path.display()),
        None => path.display().to_string(),
    }
}
