//! Append-only NDJSON segment storage with per-stream indexes.
//!
//! Layout under the store root, one directory per stream:
//!
//! ```text
//! <stream>/<n>.events.ndjson        sealed events, canonical form, LF lines
//! <stream>/<n>.events.index.ndjson  sidecar: decision_id/sequence -> offset
//! <stream>/<n>.enrich.ndjson        enrichment records
//! <stream>/<n>.enrich.index.ndjson  sidecar: decision_id -> offset
//! <stream>/checkpoints.ndjson       Merkle checkpoints in order
//! ```
//!
//! Committed lines are never rewritten. Stored bytes are exactly the sealed
//! canonical serialization, so verification re-hashes stored bytes without
//! re-canonicalization ambiguity. On open, a partially written trailing
//! line (no LF terminator) is truncated away; sidecars that disagree with
//! their segment are rebuilt by scanning it.
//!
//! One appender per stream at a time (enforced with a per-stream lock);
//! concurrent readers are fine and never block appends for long.

use crate::chain::{self, ChainFinding, ChainFindingKind, ChainStreamState, ChainVerificationReport};
use crate::enrichment::{self, EnrichmentRecord};
use crate::event::{self, DecisionEvent};
use crate::merkle::{self, Checkpoint};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("event is not sealed; only sealed records are stored")]
    RejectUnsealed,
    #[error("duplicate sequence {sequence} for stream {stream}")]
    DuplicateSequence { stream: String, sequence: u64 },
    #[error("unknown decision_id {0}")]
    UnknownDecision(String),
    #[error("unknown stream {0}")]
    UnknownStream(String),
    #[error("corrupt stored data in {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
}

#[derive(Debug, Clone)]
pub struct StoreConfig {
    pub max_segment_bytes: u64,
    /// fsync after each append. Disable only for benchmarking.
    pub sync_writes: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        StoreConfig {
            max_segment_bytes: 8 * 1024 * 1024,
            sync_writes: true,
        }
    }
}

/// Where a committed record lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordLocation {
    pub stream: String,
    pub segment: u64,
    pub offset: u64,
    pub len: u64,
    pub sequence_number: u64,
}

#[derive(Debug, Clone, Copy)]
struct SegLoc {
    segment: u64,
    offset: u64,
    len: u64,
}

#[derive(Debug, Clone)]
struct SegmentMeta {
    n: u64,
    bytes: u64,
    lines: u64,
}

#[derive(Default)]
struct StreamState {
    segments: Vec<SegmentMeta>,
    seq_index: BTreeMap<u64, SegLoc>,
    last_sequence: u64,
    last_hash: String,
    enrich_segments: Vec<SegmentMeta>,
    enrich_index: HashMap<String, Vec<SegLoc>>,
    checkpoints: Vec<Checkpoint>,
}

struct StreamStore {
    dir: PathBuf,
    state: Mutex<StreamState>,
}

pub struct EventStore {
    root: PathBuf,
    cfg: StoreConfig,
    streams: RwLock<HashMap<String, Arc<StreamStore>>>,
    id_index: RwLock<HashMap<String, RecordLocation>>,
}

#[derive(Serialize, Deserialize)]
struct EventIndexLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    decision_id: Option<String>,
    sequence_number: u64,
    offset: u64,
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct EnrichIndexLine {
    decision_id: String,
    offset: u64,
    len: u64,
}

/// Stream directories keep `[A-Za-z0-9_-]` verbatim and percent-encode
/// everything else, so arbitrary system_id tokens map to safe paths.
pub fn encode_stream_dir(system_id: &str) -> String {
    let mut out = String::with_capacity(system_id.len());
    for b in system_id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'_' || b == b'-' {
            out.push(b as char);
        } else {
            out.push('%');
            out.push_str(&format!("{b:02x}"));
        }
    }
    out
}

pub fn decode_stream_dir(dir: &str) -> Option<String> {
    let bytes = dir.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            if i + 2 >= bytes.len() + 1 {
                return None;
            }
            let hex = dir.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

fn events_path(dir: &Path, n: u64) -> PathBuf {
    dir.join(format!("{n}.events.ndjson"))
}
fn events_index_path(dir: &Path, n: u64) -> PathBuf {
    dir.join(format!("{n}.events.index.ndjson"))
}
fn enrich_path(dir: &Path, n: u64) -> PathBuf {
    dir.join(format!("{n}.enrich.ndjson"))
}
fn enrich_index_path(dir: &Path, n: u64) -> PathBuf {
    dir.join(format!("{n}.enrich.index.ndjson"))
}
fn checkpoints_path(dir: &Path) -> PathBuf {
    dir.join("checkpoints.ndjson")
}

/// Drop a partially written trailing line; returns the surviving size.
fn truncate_partial_tail(path: &Path) -> std::io::Result<u64> {
    let mut file = OpenOptions::new().read(true).write(true).open(path)?;
    let len = file.metadata()?.len();
    if len == 0 {
        return Ok(0);
    }
    file.seek(SeekFrom::End(-1))?;
    let mut last = [0u8; 1];
    file.read_exact(&mut last)?;
    if last[0] == b'\n' {
        return Ok(len);
    }
    // Scan backwards in blocks for the last LF.
    let mut end = len;
    let mut pos = len;
    let mut buf = vec![0u8; 8192];
    let mut keep: u64 = 0;
    'outer: while pos > 0 {
        let chunk = buf.len().min(pos as usize);
        pos -= chunk as u64;
        file.seek(SeekFrom::Start(pos))?;
        file.read_exact(&mut buf[..chunk])?;
        for i in (0..chunk).rev() {
            if buf[i] == b'\n' {
                keep = pos + i as u64 + 1;
                break 'outer;
            }
        }
        end = pos;
    }
    let _ = end;
    file.set_len(keep)?;
    file.sync_data()?;
    Ok(keep)
}

fn read_lines_with_offsets(path: &Path) -> std::io::Result<Vec<(u64, Vec<u8>)>> {
    let file = File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut offset = 0u64;
    loop {
        let mut line = Vec::new();
        let read = reader.read_until(b'\n', &mut line)?;
        if read == 0 {
            break;
        }
        if line.last() == Some(&b'\n') {
            line.pop();
            out.push((offset, line));
        }
        // A line without LF is a partial tail; open() truncates those
        // before this runs, so just stop.
        offset += read as u64;
    }
    Ok(out)
}

fn segment_numbers(dir: &Path, suffix: &str) -> std::io::Result<Vec<u64>> {
    let mut numbers = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(stem) = name.strip_suffix(suffix) {
            if let Ok(n) = stem.parse::<u64>() {
                numbers.push(n);
            }
        }
    }
    numbers.sort_unstable();
    Ok(numbers)
}

fn pluck_event_fields(line: &[u8]) -> Option<(Option<String>, u64, String)> {
    let value: Value = serde_json::from_slice(line).ok()?;
    let decision_id = value
        .get("decision_context")
        .and_then(|c| c.get("decision_id"))
        .and_then(Value::as_str)
        .map(str::to_string);
    let temporal = value.get("temporal_metadata")?;
    let seq = temporal.get("sequence_number")?.as_u64()?;
    let hash = temporal
        .get("hash_chain")?
        .get("current_hash")?
        .as_str()?
        .to_string();
    Some((decision_id, seq, hash))
}

fn atomic_write(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_data()?;
    }
    fs::rename(&tmp, path)
}

impl EventStore {
    pub fn open(root: impl Into<PathBuf>, cfg: StoreConfig) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        let store = EventStore {
            root,
            cfg,
            streams: RwLock::new(HashMap::new()),
            id_index: RwLock::new(HashMap::new()),
        };
        let mut dirs: Vec<(String, PathBuf)> = Vec::new();
        for entry in fs::read_dir(&store.root)? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                let name = entry.file_name().to_string_lossy().to_string();
                if let Some(system_id) = decode_stream_dir(&name) {
                    dirs.push((system_id, entry.path()));
                }
            }
        }
        dirs.sort();
        for (system_id, dir) in dirs {
            let stream = store.load_stream(&system_id, dir)?;
            store
                .streams
                .write()
                .expect("store lock")
                .insert(system_id, Arc::new(stream));
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn load_stream(&self, system_id: &str, dir: PathBuf) -> Result<StreamStore, StoreError> {
        let mut state = StreamState::default();

        for n in segment_numbers(&dir, ".events.ndjson")? {
            let path = events_path(&dir, n);
            let size = truncate_partial_tail(&path)?;
            let lines = read_lines_with_offsets(&path)?;
            let mut use_sidecar = false;
            let index_path = events_index_path(&dir, n);
            let mut entries: Vec<EventIndexLine> = Vec::new();
            if index_path.exists() {
                truncate_partial_tail(&index_path)?;
                let raw = read_lines_with_offsets(&index_path)?;
                let parsed: Option<Vec<EventIndexLine>> = raw
                    .iter()
                    .map(|(_, l)| serde_json::from_slice::<EventIndexLine>(l).ok())
                    .collect();
                if let Some(p) = parsed {
                    let consistent = p.len() == lines.len()
                        && p.last()
                            .map(|e| e.offset + e.len + 1 == size)
                            .unwrap_or(size == 0);
                    if consistent {
                        entries = p;
                        use_sidecar = true;
                    }
                }
            }
            if !use_sidecar {
                entries.clear();
                for (offset, line) in &lines {
                    let (decision_id, seq, _hash) =
                        pluck_event_fields(line).ok_or_else(|| StoreError::Corrupt {
                            path: path.clone(),
                            detail: format!("unindexable line at offset {offset}"),
                        })?;
                    entries.push(EventIndexLine {
                        decision_id,
                        sequence_number: seq,
                        offset: *offset,
                        len: line.len() as u64,
                    });
                }
                let mut blob = Vec::new();
                for e in &entries {
                    serde_json::to_writer(&mut blob, e).expect("index line serializes");
                    blob.push(b'\n');
                }
                atomic_write(&index_path, &blob)?;
            }

            for (entry, (offset, line)) in entries.iter().zip(&lines) {
                let loc = SegLoc {
                    segment: n,
                    offset: *offset,
                    len: entry.len,
                };
                state.seq_index.insert(entry.sequence_number, loc);
                if let Some(id) = &entry.decision_id {
                    self.id_index
                        .write()
                        .expect("store lock")
                        .entry(id.clone())
                        .or_insert(RecordLocation {
                            stream: system_id.to_string(),
                            segment: n,
                            offset: *offset,
                            len: entry.len,
                            sequence_number: entry.sequence_number,
                        });
                }
                if entry.sequence_number > state.last_sequence {
                    state.last_sequence = entry.sequence_number;
                    if let Some((_, _, hash)) = pluck_event_fields(line) {
                        state.last_hash = hash;
                    }
                }
            }
            state.segments.push(SegmentMeta {
                n,
                bytes: size,
                lines: lines.len() as u64,
            });
        }

        for n in segment_numbers(&dir, ".enrich.ndjson")? {
            let path = enrich_path(&dir, n);
            let size = truncate_partial_tail(&path)?;
            let lines = read_lines_with_offsets(&path)?;
            let index_path = enrich_index_path(&dir, n);
            let mut rebuilt = Vec::new();
            for (offset, line) in &lines {
                let value: Value = serde_json::from_slice(line).map_err(|e| StoreError::Corrupt {
                    path: path.clone(),
                    detail: e.to_string(),
                })?;
                let decision_id = value
                    .get("decision_id")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string();
                rebuilt.push(EnrichIndexLine {
                    decision_id,
                    offset: *offset,
                    len: line.len() as u64,
                });
            }
            let mut blob = Vec::new();
            for e in &rebuilt {
                serde_json::to_writer(&mut blob, e).expect("index line serializes");
                blob.push(b'\n');
            }
            atomic_write(&index_path, &blob)?;
            for e in &rebuilt {
                state.enrich_index.entry(e.decision_id.clone()).or_default().push(SegLoc {
                    segment: n,
                    offset: e.offset,
                    len: e.len,
                });
            }
            state.enrich_segments.push(SegmentMeta {
                n,
                bytes: size,
                lines: lines.len() as u64,
            });
        }

        let cp_path = checkpoints_path(&dir);
        if cp_path.exists() {
            truncate_partial_tail(&cp_path)?;
            for (_, line) in read_lines_with_offsets(&cp_path)? {
                let cp: Checkpoint = serde_json::from_slice(&line).map_err(|e| StoreError::Corrupt {
                    path: cp_path.clone(),
                    detail: e.to_string(),
                })?;
                state.checkpoints.push(cp);
            }
        }

        Ok(StreamStore {
            dir,
            state: Mutex::new(state),
        })
    }

    fn stream(&self, system_id: &str) -> Option<Arc<StreamStore>> {
        self.streams.read().expect("store lock").get(system_id).cloned()
    }

    fn stream_or_create(&self, system_id: &str) -> Result<Arc<StreamStore>, StoreError> {
        if let Some(s) = self.stream(system_id) {
            return Ok(s);
        }
        let mut map = self.streams.write().expect("store lock");
        if let Some(s) = map.get(system_id) {
            return Ok(s.clone());
        }
        let dir = self.root.join(encode_stream_dir(system_id));
        fs::create_dir_all(&dir)?;
        let stream = Arc::new(StreamStore {
            dir,
            state: Mutex::new(StreamState::default()),
        });
        map.insert(system_id.to_string(), stream.clone());
        Ok(stream)
    }

    pub fn streams(&self) -> Vec<String> {
        let mut out: Vec<String> = self.streams.read().expect("store lock").keys().cloned().collect();
        out.sort();
        out
    }

    /// Chain head recovered from the stored tail; None for unknown streams.
    pub fn tail_state(&self, system_id: &str) -> Option<ChainStreamState> {
        let stream = self.stream(system_id)?;
        let state = stream.state.lock().expect("stream lock");
        Some(if state.last_sequence == 0 {
            ChainStreamState::new(system_id)
        } else {
            ChainStreamState {
                system_id: system_id.to_string(),
                last_sequence: state.last_sequence,
                last_hash: state.last_hash.clone(),
            }
        })
    }

    /// Durably append a sealed event; the committed line is canonical bytes
    /// plus LF.
    pub fn append_record(&self, system_id: &str, sealed: &DecisionEvent) -> Result<RecordLocation, StoreError> {
        let (Some(seq), true) = (sealed.sequence_number(), sealed.is_sealed()) else {
            return Err(StoreError::RejectUnsealed);
        };
        let stream = self.stream_or_create(system_id)?;
        let mut state = stream.state.lock().expect("stream lock");
        if state.seq_index.contains_key(&seq) {
            return Err(StoreError::DuplicateSequence {
                stream: system_id.to_string(),
                sequence: seq,
            });
        }

        let mut line = event::serialize_event(sealed);
        let len = line.len() as u64;
        line.push(b'\n');

        let roll = match state.segments.last() {
            None => true,
            Some(meta) => meta.lines > 0 && meta.bytes + line.len() as u64 > self.cfg.max_segment_bytes,
        };
        if roll {
            let n = state.segments.last().map(|m| m.n + 1).unwrap_or(0);
            File::create(events_path(&stream.dir, n))?;
            File::create(events_index_path(&stream.dir, n))?;
            state.segments.push(SegmentMeta { n, bytes: 0, lines: 0 });
        }
        let meta = state.segments.last().expect("segment ensured");
        let (n, offset) = (meta.n, meta.bytes);

        let path = events_path(&stream.dir, n);
        let mut file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.write_all(&line)?;
        file.flush()?;
        if self.cfg.sync_writes {
            file.sync_data()?;
        }

        let index_entry = EventIndexLine {
            decision_id: sealed.decision_id().map(str::to_string),
            sequence_number: seq,
            offset,
            len,
        };
        let mut index_line = serde_json::to_vec(&index_entry).expect("index line serializes");
        index_line.push(b'\n');
        let mut index_file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(events_index_path(&stream.dir, n))?;
        index_file.write_all(&index_line)?;
        index_file.flush()?;
        if self.cfg.sync_writes {
            index_file.sync_data()?;
        }

        let meta = state.segments.last_mut().expect("segment ensured");
        meta.bytes += line.len() as u64;
        meta.lines += 1;
        state.seq_index.insert(seq, SegLoc { segment: n, offset, len });
        if seq > state.last_sequence {
            state.last_sequence = seq;
            state.last_hash = sealed.current_hash().expect("sealed").to_string();
        }
        drop(state);

        let location = RecordLocation {
            stream: system_id.to_string(),
            segment: n,
            offset,
            len,
            sequence_number: seq,
        };
        if let Some(id) = sealed.decision_id() {
            self.id_index
                .write()
                .expect("store lock")
                .entry(id.to_string())
                .or_insert_with(|| location.clone());
        }
        Ok(location)
    }

    fn read_at(&self, dir: &Path, path: PathBuf, offset: u64, len: u64) -> Result<Vec<u8>, StoreError> {
        let _ = dir;
        let mut file = File::open(&path)?;
        file.seek(SeekFrom::Start(offset))?;
        let mut buf = vec![0u8; len as usize];
        file.read_exact(&mut buf)?;
        Ok(buf)
    }

    pub fn location(&self, decision_id: &str) -> Option<RecordLocation> {
        self.id_index.read().expect("store lock").get(decision_id).cloned()
    }

    /// Exact stored bytes of a sealed event (no trailing LF); not-found is
    /// a value, not an error.
    pub fn lookup_raw(&self, decision_id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        let Some(loc) = self.location(decision_id) else {
            return Ok(None);
        };
        let Some(stream) = self.stream(&loc.stream) else {
            return Ok(None);
        };
        let path = events_path(&stream.dir, loc.segment);
        Ok(Some(self.read_at(&stream.dir, path, loc.offset, loc.len)?))
    }

    pub fn lookup(&self, decision_id: &str) -> Result<Option<DecisionEvent>, StoreError> {
        match self.lookup_raw(decision_id)? {
            None => Ok(None),
            Some(bytes) => {
                let parsed = event::parse_event(&bytes).map_err(|e| StoreError::Corrupt {
                    path: PathBuf::from(decision_id),
                    detail: e.to_string(),
                })?;
                Ok(Some(parsed))
            }
        }
    }

    /// Ordered raw lines for one stream starting at `from_sequence`.
    /// Unknown streams yield an empty iterator.
    pub fn scan_stream_raw(&self, system_id: &str, from_sequence: u64) -> StreamScan {
        let Some(stream) = self.stream(system_id) else {
            return StreamScan::empty();
        };
        let state = stream.state.lock().expect("stream lock");
        let mut files = VecDeque::new();
        let start = state
            .seq_index
            .range(from_sequence.max(1)..)
            .next()
            .map(|(_, loc)| *loc);
        if let Some(start) = start {
            for meta in &state.segments {
                if meta.n >= start.segment {
                    files.push_back((events_path(&stream.dir, meta.n), if meta.n == start.segment { start.offset } else { 0 }));
                }
            }
        }
        StreamScan::new(files)
    }

    /// Ordered typed events; the input shape `verify_chain` expects.
    pub fn scan_stream(
        &self,
        system_id: &str,
        from_sequence: u64,
    ) -> impl Iterator<Item = Result<DecisionEvent, StoreError>> + '_ {
        self.scan_stream_raw(system_id, from_sequence).map(|raw| {
            let (path, bytes) = raw?;
            event::parse_event(&bytes).map_err(|e| StoreError::Corrupt {
                path,
                detail: e.to_string(),
            })
        })
    }

    /// Append an enrichment record; the target stream is resolved through
    /// the decision_id index.
    pub fn append_enrichment(&self, record: &EnrichmentRecord) -> Result<(), StoreError> {
        let Some(loc) = self.location(record.decision_id.as_str()) else {
            return Err(StoreError::UnknownDecision(record.decision_id.to_string()));
        };
        let stream = self
            .stream(&loc.stream)
            .ok_or_else(|| StoreError::UnknownStream(loc.stream.clone()))?;
        let mut state = stream.state.lock().expect("stream lock");

        let mut line = enrichment::serialize_enrichment(record);
        let len = line.len() as u64;
        line.push(b'\n');

        let roll = match state.enrich_segments.last() {
            None => true,
            Some(meta) => meta.lines > 0 && meta.bytes + line.len() as u64 > self.cfg.max_segment_bytes,
        };
        if roll {
            let n = state.enrich_segments.last().map(|m| m.n + 1).unwrap_or(0);
            File::create(enrich_path(&stream.dir, n))?;
            File::create(enrich_index_path(&stream.dir, n))?;
            state.enrich_segments.push(SegmentMeta { n, bytes: 0, lines: 0 });
        }
        let meta = state.enrich_segments.last().expect("segment ensured");
        let (n, offset) = (meta.n, meta.bytes);

        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(enrich_path(&stream.dir, n))?;
        file.write_all(&line)?;
        file.flush()?;
        if self.cfg.sync_writes {
            file.sync_data()?;
        }
        let index_entry = EnrichIndexLine {
            decision_id: record.decision_id.to_string(),
            offset,
            len,
        };
        let mut index_line = serde_json::to_vec(&index_entry).expect("index line serializes");
        index_line.push(b'\n');
        let mut index_file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(enrich_index_path(&stream.dir, n))?;
        index_file.write_all(&index_line)?;
        index_file.flush()?;
        if self.cfg.sync_writes {
            index_file.sync_data()?;
        }

        let meta = state.enrich_segments.last_mut().expect("segment ensured");
        meta.bytes += line.len() as u64;
        meta.lines += 1;
        state
            .enrich_index
            .entry(record.decision_id.to_string())
            .or_default()
            .push(SegLoc { segment: n, offset, len });
        Ok(())
    }

    pub fn enrichments_for(&self, decision_id: &str) -> Result<Vec<EnrichmentRecord>, StoreError> {
        let Some(loc) = self.location(decision_id) else {
            return Ok(Vec::new());
        };
        let Some(stream) = self.stream(&loc.stream) else {
            return Ok(Vec::new());
        };
        let locs: Vec<SegLoc> = {
            let state = stream.state.lock().expect("stream lock");
            state.enrich_index.get(decision_id).cloned().unwrap_or_default()
        };
        let mut out = Vec::with_capacity(locs.len());
        for l in locs {
            let path = enrich_path(&stream.dir, l.segment);
            let bytes = self.read_at(&stream.dir, path.clone(), l.offset, l.len)?;
            let record = enrichment::parse_enrichment(&bytes).map_err(|e| StoreError::Corrupt {
                path,
                detail: e.to_string(),
            })?;
            out.push(record);
        }
        Ok(out)
    }

    pub fn append_checkpoint(&self, checkpoint: &Checkpoint) -> Result<(), StoreError> {
        let stream = self.stream_or_create(&checkpoint.system_id)?;
        let mut state = stream.state.lock().expect("stream lock");
        let value = serde_json::to_value(checkpoint).expect("checkpoint serializes");
        let mut line = crate::canonical::canonicalize(&value).expect("checkpoint canonicalizes");
        line.push(b'\n');
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(checkpoints_path(&stream.dir))?;
        file.write_all(&line)?;
        file.flush()?;
        if self.cfg.sync_writes {
            file.sync_data()?;
        }
        state.checkpoints.push(checkpoint.clone());
        Ok(())
    }

    pub fn checkpoints(&self, system_id: &str) -> Vec<Checkpoint> {
        match self.stream(system_id) {
            None => Vec::new(),
            Some(stream) => stream.state.lock().expect("stream lock").checkpoints.clone(),
        }
    }

    /// Byte-level and chain-level verification of one stream: stored lines
    /// must parse, re-serialize to identical bytes, re-hash to their stored
    /// current_hash, and link into an unbroken chain.
    pub fn verify_stream(&self, system_id: &str) -> Result<ChainVerificationReport, StoreError> {
        if self.stream(system_id).is_none() {
            return Err(StoreError::UnknownStream(system_id.to_string()));
        }
        let mut events = Vec::new();
        let mut pre_findings: Vec<ChainFinding> = Vec::new();
        for (index, raw) in self.scan_stream_raw(system_id, 1).enumerate() {
            let (path, bytes) = raw?;
            match event::parse_event(&bytes) {
                Err(e) => pre_findings.push(ChainFinding {
                    index,
                    sequence_number: None,
                    kind: ChainFindingKind::CorruptRecord,
                    detail: format!("{}: {e}", path.display()),
                }),
                Ok(parsed) => {
                    if event::serialize_event(&parsed) != bytes {
                        pre_findings.push(ChainFinding {
                            index,
                            sequence_number: parsed.sequence_number(),
                            kind: ChainFindingKind::NonCanonicalRecord,
                            detail: "stored bytes differ from the canonical serialization".into(),
                        });
                    }
                    events.push(parsed);
                }
            }
        }
        let mut report = chain::verify_chain(&events);
        report.system_id = Some(system_id.to_string());
        report.events_checked += pre_findings.iter().filter(|f| f.kind == ChainFindingKind::CorruptRecord).count();
        report.findings.splice(0..0, pre_findings);
        Ok(report)
    }

    /// Checkpoint-level verification: link chain plus root recomputation
    /// over the stored events in each checkpoint range.
    pub fn verify_checkpoints(&self, system_id: &str) -> Result<Vec<String>, StoreError> {
        let checkpoints = self.checkpoints(system_id);
        let mut findings = merkle::verify_checkpoint_links(&checkpoints);
        for cp in &checkpoints {
            let mut leaves = Vec::with_capacity(cp.leaf_count() as usize);
            for result in self.scan_stream(system_id, cp.start_sequence) {
                let event = result?;
                match event.sequence_number() {
                    Some(seq) if seq > cp.end_sequence => break,
                    Some(_) => match event.current_hash() {
                        Some(h) => leaves.push(h.to_string()),
                        None => findings.push(format!("{}: unsealed record in range", cp.checkpoint_id)),
                    },
                    None => findings.push(format!("{}: unsequenced record in range", cp.checkpoint_id)),
                }
            }
            if leaves.len() as u64 != cp.leaf_count() {
                findings.push(format!(
                    "{}: expected {} leaves, found {}",
                    cp.checkpoint_id,
                    cp.leaf_count(),
                    leaves.len()
                ));
                continue;
            }
            match merkle::merkle_root(&leaves) {
                Ok(root) if root == cp.merkle_root => {}
                Ok(root) => findings.push(format!(
                    "{}: stored merkle_root {} != recomputed {root}",
                    cp.checkpoint_id, cp.merkle_root
                )),
                Err(e) => findings.push(format!("{}: {e}", cp.checkpoint_id)),
            }
        }
        Ok(findings)
    }

    /// Delete expired leading segments. A segment is deletable only when
    /// every contained event carries a retention policy and the longest
    /// retention among them has elapsed; deletion stops at the first
    /// non-expired segment so the surviving chain stays contiguous.
    pub fn enforce_retention(&self, now: DateTime<Utc>) -> Result<Vec<PathBuf>, StoreError> {
        let mut removed = Vec::new();
        let streams: Vec<Arc<StreamStore>> = self.streams.read().expect("store lock").values().cloned().collect();
        for stream in streams {
            let mut state = stream.state.lock().expect("stream lock");
            let segs: Vec<u64> = state.segments.iter().map(|m| m.n).collect();
            let mut deletable = Vec::new();
            for (i, n) in segs.iter().enumerate() {
                if i + 1 == segs.len() {
                    break; // never delete the active segment
                }
                let path = events_path(&stream.dir, *n);
                let mut all_expired = true;
                for (_, line) in read_lines_with_offsets(&path)? {
                    let expired = event::parse_event(&line)
                        .ok()
                        .and_then(|e| {
                            let ts = e.event_timestamp()?.datetime();
                            let retention = e
                                .temporal_metadata
                                .as_ref()?
                                .retention_policy
                                .as_ref()?
                                .minimum_retention
                                .clone()?;
                            let days = crate::compliance::iso8601_duration_days(&retention)?;
                            Some(ts + chrono::Duration::days(days as i64) < now)
                        })
                        .unwrap_or(false);
                    if !expired {
                        all_expired = false;
                        break;
                    }
                }
                if all_expired {
                    deletable.push(*n);
                } else {
                    break;
                }
            }
            for n in deletable {
                let path = events_path(&stream.dir, n);
                fs::remove_file(&path)?;
                let _ = fs::remove_file(events_index_path(&stream.dir, n));
                removed.push(path);
                state.segments.retain(|m| m.n != n);
                state.seq_index.retain(|_, loc| loc.segment != n);
            }
        }
        Ok(removed)
    }
}

/// Lazy raw-line iterator over a snapshot of a stream's segments.
pub struct StreamScan {
    files: VecDeque<(PathBuf, u64)>,
    current: Option<(PathBuf, BufReader<File>)>,
}

impl StreamScan {
    fn empty() -> Self {
        StreamScan {
            files: VecDeque::new(),
            current: None,
        }
    }

    fn new(files: VecDeque<(PathBuf, u64)>) -> Self {
        StreamScan { files, current: None }
    }

    fn advance(&mut self) -> Result<bool, std::io::Error> {
        let Some((path, offset)) = self.files.pop_front() else {
            return Ok(false);
        };
        let mut file = File::open(&path)?;
        file.seek(SeekFrom::Start(offset))?;
        self.current = Some((path, BufReader::new(file)));
        Ok(true)
    }
}

impl Iterator for StreamScan {
    type Item = Result<(PathBuf, Vec<u8>), StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.current.is_none() {
                match self.advance() {
                    Ok(false) => return None,
                    Ok(true) => {}
                    Err(e) => return Some(Err(e.into())),
                }
            }
            let (path, reader) = self.current.as_mut().expect("set above");
            let mut line = Vec::new();
            match reader.read_until(b'\n', &mut line) {
                Err(e) => return Some(Err(e.into())),
                Ok(0) => {
                    self.current = None;
                    continue;
                }
                Ok(_) => {
                    if line.last() == Some(&b'\n') {
                        line.pop();
                        return Some(Ok((path.clone(), line)));
                    }
                    // Unterminated tail: stop at the last committed line.
                    self.current = None;
                    continue;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{seal_and_append, ChainStreamState};
    use crate::event::new_minimal_event;
    use crate::tokens::EvidenceTier;
    use serde_json::json;

    const TS: &str = "2026-03-14T09:26:53.589Z";

    fn sealed_events(n: u32) -> Vec<DecisionEvent> {
        let mut state = ChainStreamState::new("payments");
        let mut out = Vec::new();
        for i in 0..n {
            let draft = new_minimal_event(
                &uuid::Uuid::from_u128(i as u128 + 1).hyphenated().to_string(),
                "risk_scoring",
                "ml_inference",
                json!({"score": 0.5}),
                false,
                TS,
                EvidenceTier::Lightweight,
            )
            .unwrap();
            let (sealed, next) = seal_and_append(&state, draft, None).unwrap();
            out.push(sealed);
            state = next;
        }
        out
    }

    #[test]
    fn append_lookup_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
        let events = sealed_events(3);
        for e in &events {
            store.append_record("payments", e).unwrap();
        }
        let id = events[1].decision_id().unwrap();
        let raw = store.lookup_raw(id).unwrap().unwrap();
        assert_eq!(raw, event::serialize_event(&events[1]));
        assert!(store.lookup("00000000-0000-4000-8000-00000000ffff").unwrap().is_none());
    }

    #[test]
    fn duplicate_sequence_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
        let events = sealed_events(1);
        store.append_record("payments", &events[0]).unwrap();
        assert!(matches!(
            store.append_record("payments", &events[0]),
            Err(StoreError::DuplicateSequence { sequence: 1, .. })
        ));
    }

    #[test]
    fn unsealed_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
        let draft = new_minimal_event(
            "7b1d2f7e-4a62-4b9b-9f6e-2f4e5d6a7b8c",
            "t",
            "ml_inference",
            json!(1),
            false,
            TS,
            EvidenceTier::Lightweight,
        )
        .unwrap();
        assert!(matches!(store.append_record("payments", &draft), Err(StoreError::RejectUnsealed)));
    }

    #[test]
    fn rollover_spans_segments_and_scan_is_seamless() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StoreConfig {
            max_segment_bytes: 900,
            sync_writes: false,
        };
        let store = EventStore::open(dir.path(), cfg).unwrap();
        let events = sealed_events(10);
        for e in &events {
            store.append_record("payments", e).unwrap();
        }
        let segments = segment_numbers(&dir.path().join("payments"), ".events.ndjson").unwrap();
        assert!(segments.len() > 1, "expected rollover, got {segments:?}");

        let scanned: Vec<DecisionEvent> = store
            .scan_stream("payments", 1)
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(scanned, events);
        let from5: Vec<DecisionEvent> = store
            .scan_stream("payments", 5)
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(from5.len(), 6);
        assert_eq!(from5[0].sequence_number(), Some(5));

        // Lookup across the segment boundary still hits via the index.
        let id = events[0].decision_id().unwrap();
        assert!(store.lookup_raw(id).unwrap().is_some());
        assert!(store.verify_stream("payments").unwrap().is_clean());
    }

    #[test]
    fn reopen_recovers_state_and_truncates_partial_tail() {
        let dir = tempfile::tempdir().unwrap();
        let events = sealed_events(4);
        {
            let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
            for e in &events[..3] {
                store.append_record("payments", e).unwrap();
            }
        }
        // Simulate a crash mid-append: a partial line with no LF.
        let seg = dir.path().join("payments").join("0.events.ndjson");
        let mut f = OpenOptions::new().append(true).open(&seg).unwrap();
        f.write_all(br#"{"schema_version":"0.3.0","decision_con"#).unwrap();
        f.sync_data().unwrap();
        drop(f);

        let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
        let tail = store.tail_state("payments").unwrap();
        assert_eq!(tail.last_sequence, 3);
        assert_eq!(tail.last_hash, events[2].current_hash().unwrap());
        let scanned: Vec<DecisionEvent> = store
            .scan_stream("payments", 1)
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(scanned.len(), 3);
        assert!(store.verify_stream("payments").unwrap().is_clean());
        // The next append continues the chain.
        store.append_record("payments", &events[3]).unwrap();
        assert_eq!(store.tail_state("payments").unwrap().last_sequence, 4);
    }

    #[test]
    fn stream_dir_encoding_round_trips() {
        for id in ["payments", "eu/west-1", "a b", "..", "ümlaut", "x%y"] {
            let enc = encode_stream_dir(id);
            assert!(!enc.contains('/') && !enc.contains("..") || id == "..");
            assert!(!enc.contains('/'));
            assert_eq!(decode_stream_dir(&enc).as_deref(), Some(id));
        }
        assert_eq!(encode_stream_dir(".."), "%2e%2e");
    }

    #[test]
    fn unknown_stream_scan_is_empty_but_verify_errors() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path(), StoreConfig::default()).unwrap();
        assert_eq!(store.scan_stream("ghost", 1).count(), 0);
        assert!(matches!(store.verify_stream("ghost"), Err(StoreError::UnknownStream(_))));
    }

    #[test]
    fn retention_deletes_expired_leading_segments() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = StoreConfig {
            max_segment_bytes: 700,
            sync_writes: false,
        };
        let store = EventStore::open(dir.path(), cfg).unwrap();
        let mut state = ChainStreamState::new("payments");
        for i in 0..6u32 {
            let mut draft = new_minimal_event(
                &uuid::Uuid::from_u128(i as u128 + 50).hyphenated().to_string(),
                "risk_scoring",
                "ml_inference",
                json!(1),
                false,
                "2025-01-01T00:00:00.000Z",
                EvidenceTier::Lightweight,
            )
            .unwrap();
            draft.temporal_metadata.as_mut().unwrap().retention_policy =
                Some(crate::event::RetentionPolicy {
                    minimum_retention: Some("P6M".into()),
                    classification: None,
                    extensions: Default::default(),
                });
            let (sealed, next) = seal_and_append(&state, draft, None).unwrap();
            store.append_record("payments", &sealed).unwrap();
            state = next;
        }
        let now = EventTimeForTest::parse("2026-01-01T00:00:00.000Z");
        let removed = store.enforce_retention(now).unwrap();
        assert!(!removed.is_empty(), "expired leading segments should be removed");
    }

    struct EventTimeForTest;
    impl EventTimeForTest {
        fn parse(s: &str) -> DateTime<Utc> {
            crate::event::EventTime::parse(s).unwrap().datetime()
        }
    }
}
