//! Line-delimited JSON manifest of video records, plus dataset statistics.
//!
//! Every line is one [`VideoRecord`] serialized with sorted keys. Writers take
//! an exclusive advisory lock on a `<manifest>.lock` sidecar, so appends and
//! rewrites from concurrent threads or processes never interleave.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::CaptionBundle;
use crate::media_io::Fps;
use crate::sampler::SamplingPlan;

pub const MANIFEST_SCHEMA: u32 = 1;
pub const STATS_SCHEMA: u32 = 1;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("record id {0:?} already present")]
    DuplicateId(String),
    #[error("record {id:?}: status cannot move from {from} to {to}")]
    StatusRegression { id: String, from: String, to: String },
    #[error("i/o failure on {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CatalogError + '_ {
    move |source| CatalogError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ShortTitle,
    LowViews,
    AbsentHashtags,
    BannedHashtag,
    ClosedLoop,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::ShortTitle => "short_title",
            RejectReason::LowViews => "low_views",
            RejectReason::AbsentHashtags => "absent_hashtags",
            RejectReason::BannedHashtag => "banned_hashtag",
            RejectReason::ClosedLoop => "closed_loop",
        }
    }
}

/// Lifecycle: `ingested -> kept | rejected`, `kept -> curated | rejected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "reason", rename_all = "snake_case")]
pub enum Status {
    Ingested,
    Kept,
    Rejected(RejectReason),
    Curated,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Ingested => "ingested",
            Status::Kept => "kept",
            Status::Rejected(_) => "rejected",
            Status::Curated => "curated",
        }
    }

    /// Whether a record may move from `self` to `next`. Staying put is allowed.
    pub fn can_become(&self, next: &Status) -> bool {
        use Status::*;
        match (self, next) {
            (a, b) if a == b => true,
            (Ingested, Kept | Rejected(_)) => true,
            (Kept, Curated | Rejected(_)) => true,
            _ => false,
        }
    }

    /// Whether `next` is reachable through zero or more lifecycle steps.
    pub fn can_reach(&self, next: &Status) -> bool {
        self.can_become(next) || (*self == Status::Ingested && Status::Kept.can_become(next))
    }

    pub fn is_final(&self) -> bool {
        matches!(self, Status::Rejected(_) | Status::Curated)
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Status::Rejected(r) => write!(f, "rejected({})", r.as_str()),
            s => f.write_str(s.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub schema: u32,
    pub id: String,
    pub source_url: String,
    pub title: String,
    pub hashtags: Vec<String>,
    /// `None` when the source did not report a view count.
    pub view_count: Option<u64>,
    pub duration_s: f64,
    pub width: u32,
    pub height: u32,
    pub fps: Fps,
    pub status: Status,
    pub transitions: Option<Vec<usize>>,
    pub n_clips: Option<usize>,
    pub sampling_plan: Option<SamplingPlan>,
    pub captions: Option<CaptionBundle>,
    pub category: Option<String>,
}

impl VideoRecord {
    /// A freshly ingested record with no analysis attached.
    pub fn ingested(id: impl Into<String>, title: impl Into<String>, hashtags: Vec<String>, view_count: u64) -> Self {
        VideoRecord {
            schema: MANIFEST_SCHEMA,
            id: id.into(),
            source_url: String::new(),
            title: title.into(),
            hashtags,
            view_count: Some(view_count),
            duration_s: 0.0,
            width: 0,
            height: 0,
            fps: Fps::DEFAULT,
            status: Status::Ingested,
            transitions: None,
            n_clips: None,
            sampling_plan: None,
            captions: None,
            category: None,
        }
    }

    /// Stores detected transitions and keeps `n_clips` consistent with them.
    pub fn set_transitions(&mut self, transitions: Vec<usize>) {
        self.n_clips = Some(transitions.len() + 1);
        self.transitions = Some(transitions);
    }

    /// Canonical single-line JSON with sorted keys.
    pub fn to_line(&self) -> Result<String, serde_json::Error> {
        to_canonical_json(self)
    }
}

/// Serializes with object keys in sorted order, so equal values give equal bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    serde_json::to_string(&serde_json::to_value(value)?)
}

pub fn to_canonical_json_pretty<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    serde_json::to_string_pretty(&serde_json::to_value(value)?)
}

struct WriterLock {
    file: File,
}

impl WriterLock {
    fn acquire(manifest: &Path) -> Result<Self, CatalogError> {
        let mut name = manifest.as_os_str().to_owned();
        name.push(".lock");
        let lock_path = PathBuf::from(name);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io_err(&lock_path))?;
        file.lock().map_err(io_err(&lock_path))?;
        Ok(WriterLock { file })
    }
}

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

fn existing_ids(path: &Path) -> Result<HashSet<String>, CatalogError> {
    if !path.exists() {
        return Ok(HashSet::new());
    }
    Ok(load_manifest(path)?.records.into_iter().map(|r| r.id).collect())
}

/// Appends one record as a single line. Fails without touching the file if the id exists.
pub fn append_record(path: &Path, record: &VideoRecord) -> Result<(), CatalogError> {
    let line = record.to_line()?;
    let _lock = WriterLock::acquire(path)?;
    if existing_ids(path)?.contains(&record.id) {
        return Err(CatalogError::DuplicateId(record.id.clone()));
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut buf = line.into_bytes();
    buf.push(b'\n');
    file.write_all(&buf).map_err(io_err(path))?;
    file.sync_data().map_err(io_err(path))?;
    Ok(())
}

/// Rewrites the manifest atomically (temp file + rename).
///
/// Ids must be unique, and no record may move backwards relative to the
/// version currently on disk.
pub fn save_manifest(path: &Path, records: &[VideoRecord]) -> Result<(), CatalogError> {
    let mut seen = HashSet::new();
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(CatalogError::DuplicateId(r.id.clone()));
        }
    }
    let _lock = WriterLock::acquire(path)?;
    if path.exists() {
        let current: BTreeMap<String, Status> = load_manifest(path)?
            .records
            .into_iter()
            .map(|r| (r.id, r.status))
            .collect();
        for r in records {
            if let Some(old) = current.get(&r.id) {
                if !old.can_reach(&r.status) {
                    return Err(CatalogError::StatusRegression {
                        id: r.id.clone(),
                        from: old.to_string(),
                        to: r.status.to_string(),
                    });
                }
            }
        }
    }
    let mut body = String::new();
    for r in records {
        body.push_str(&r.to_line()?);
        body.push('\n');
    }
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    std::fs::write(&tmp, body).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedManifest {
    pub records: Vec<VideoRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses every line; malformed lines become diagnostics and parsing continues.
pub fn load_manifest(path: &Path) -> Result<LoadedManifest, CatalogError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = LoadedManifest::default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<VideoRecord>(&line) {
            Ok(r) => out.records.push(r),
            Err(e) => out.diagnostics.push(Diagnostic {
                line: i + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Bin edges; the final bin is `[last, inf)` when `open_ended`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinEdges {
    pub edges: Vec<f64>,
    pub open_ended: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    /// `None` for an open upper end.
    pub hi: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<Bin>,
    pub out_of_range: u64,
}

impl Histogram {
    pub fn new(edges: &BinEdges) -> Self {
        let mut bins: Vec<Bin> = edges
            .edges
            .windows(2)
            .map(|w| Bin {
                lo: w[0],
                hi: Some(w[1]),
                count: 0,
            })
            .collect();
        if edges.open_ended {
            if let Some(&lo) = edges.edges.last() {
                bins.push(Bin { lo, hi: None, count: 0 });
            }
        }
        Histogram { bins, out_of_range: 0 }
    }

    pub fn add(&mut self, value: f64) {
        let slot = self
            .bins
            .iter_mut()
            .find(|b| value >= b.lo && b.hi.is_none_or(|hi| value < hi));
        match slot {
            Some(b) => b.count += 1,
            None => self.out_of_range += 1,
        }
    }

    pub fn counts(&self) -> Vec<u64> {
        self.bins.iter().map(|b| b.count).collect()
    }

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.count).sum::<u64>() + self.out_of_range
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub duration_s: BinEdges,
    pub caption_words: BinEdges,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            duration_s: BinEdges {
                edges: vec![0.0, 30.0, 60.0, 300.0],
                open_ended: true,
            },
            caption_words: BinEdges {
                edges: vec![0.0, 10.0, 20.0, 40.0, 80.0],
                open_ended: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub schema: u32,
    pub records: u64,
    pub status_counts: BTreeMap<String, u64>,
    pub rejection_reasons: BTreeMap<String, u64>,
    /// Over all records.
    pub duration_hist: Histogram,
    /// Word counts of video captions, over records that carry captions.
    pub caption_length_hist: Histogram,
    /// Keyed `WIDTHxHEIGHT`.
    pub resolution_counts: BTreeMap<String, u64>,
    /// Records without a category count as `uncategorized`.
    pub category_counts: BTreeMap<String, u64>,
    /// Over curated captions only.
    pub word_frequencies: BTreeMap<String, u64>,
}

/// Lowercased whitespace tokens with non-alphanumeric characters removed.
pub fn caption_words(caption: &str) -> impl Iterator<Item = String> + '_ {
    caption
        .split_whitespace()
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase())
        .filter(|t| !t.is_empty())
}

pub fn compute_stats(records: &[VideoRecord], config: &StatsConfig) -> DatasetStats {
    let mut stats = DatasetStats {
        schema: STATS_SCHEMA,
        records: records.len() as u64,
        status_counts: BTreeMap::new(),
        rejection_reasons: BTreeMap::new(),
        duration_hist: Histogram::new(&config.duration_s),
        caption_length_hist: Histogram::new(&config.caption_words),
        resolution_counts: BTreeMap::new(),
        category_counts: BTreeMap::new(),
        word_frequencies: BTreeMap::new(),
    };
    for r in records {
        *stats.status_counts.entry(r.status.label().into()).or_default() += 1;
        if let Status::Rejected(reason) = r.status {
            *stats.rejection_reasons.entry(reason.as_str().into()).or_default() += 1;
        }
        stats.duration_hist.add(r.duration_s);
        *stats
            .resolution_counts
            .entry(format!("{}x{}", r.width, r.height))
            .or_default() += 1;
        let category = r.category.clone().unwrap_or_else(|| "uncategorized".into());
        *stats.category_counts.entry(category).or_default() += 1;

        if let Some(bundle) = &r.captions {
            stats
                .caption_length_hist
                .add(caption_words(&bundle.video_caption).count() as f64);
            if r.status == Status::Curated {
                for w in caption_words(&bundle.video_caption) {
                    *stats.word_frequencies.entry(w).or_default() += 1;
                }
            }
        }
    }
    stats
}

impl DatasetStats {
    /// Human-readable summary table.
    pub fn to_table(&self) -> String {
        fn hist(out: &mut String, title: &str, h: &Histogram) {
            let _ = writeln!(out, "{title}");
            for b in &h.bins {
                let range = match b.hi {
                    Some(hi) => format!("[{}, {})", b.lo, hi),
                    None => format!("[{}, inf)", b.lo),
                };
                let _ = writeln!(out, "  {range:<16} {:>8}", b.count);
            }
            if h.out_of_range > 0 {
                let _ = writeln!(out, "  {:<16} {:>8}", "out of range", h.out_of_range);
            }
        }
        fn counts(out: &mut String, title: &str, m: &BTreeMap<String, u64>) {
            let _ = writeln!(out, "{title}");
            for (k, v) in m {
                let _ = writeln!(out, "  {k:<16} {v:>8}");
            }
        }

        let mut out = String::new();
        let _ = writeln!(out, "records {:>8}", self.records);
        counts(&mut out, "status", &self.status_counts);
        if !self.rejection_reasons.is_empty() {
            counts(&mut out, "rejection reasons", &self.rejection_reasons);
        }
        hist(&mut out, "duration (s)", &self.duration_hist);
        hist(&mut out, "caption length (words)", &self.caption_length_hist);
        counts(&mut out, "resolution", &self.resolution_counts);
        counts(&mut out, "category", &self.category_counts);

        let mut words: Vec<(&String, &u64)> = self.word_frequencies.iter().collect();
        words.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let _ = writeln!(out, "top caption words");
        for (w, n) in words.into_iter().take(20) {
            let _ = writeln!(out, "  {w:<16} {n:>8}");
        }
        out
    }
}
