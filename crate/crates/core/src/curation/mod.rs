//! Metadata filtering and staged captioning with a closed-loop verdict.
//!
//! A kept record goes through three service calls: one caption per keyframe
//! (with title and hashtags as context), a fusion of those captions into a
//! whole-video caption, and a yes/no judgement on whether the video is a
//! time-lapse. A negative verdict rejects the record.

mod client;
mod http;
mod mock;

use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use base64::Engine;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{
    CaptionProvider, CaptionRequest, CaptionResponse, CaptioningClient, ProviderError, SendError, Stage,
};
pub use http::{serve_provider, HttpProvider, ENDPOINT_ENV, TOKEN_ENV};
pub use mock::{FailMode, MockProvider};

use crate::catalog::{RejectReason, Status, VideoRecord};
use crate::media_io::{encode_png, load_cmrv, Frame, MediaError, VideoBuffer};
use crate::sampler::extract_uniform;

pub const PROMPT_VERSION: &str = "v1";
const KEYFRAME_PROMPT: &str = include_str!("../../prompts/keyframe.v1.txt");
const FUSE_PROMPT: &str = include_str!("../../prompts/fuse.v1.txt");
const JUDGE_PROMPT: &str = include_str!("../../prompts/judge.v1.txt");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("record {0:?} is missing metadata: {1}")]
    MissingMetadata(String, &'static str),
    #[error("precondition failed: {0}")]
    Precondition(&'static str),
    #[error("captioning service unavailable: {0}")]
    ServiceUnavailable(SendError),
    #[error("captioning stopped after {} of the keyframes: {source}", completed.len())]
    PartialFailure {
        completed: Vec<String>,
        source: SendError,
    },
    #[error("unexpected {stage:?} response: {detail}")]
    BadResponse { stage: Stage, detail: String },
    #[error("video for record {0:?}: {1}")]
    Video(String, MediaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_title_chars: usize,
    pub min_views: u64,
    /// Lowercase, without a leading `#`.
    pub banned_hashtags: BTreeSet<String>,
    /// Query used to retrieve candidates. Informational; not a filter predicate.
    pub required_search_term: String,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_title_chars: 20,
            min_views: 100,
            banned_hashtags: ["youtube", "video", "shorts"].iter().map(|s| s.to_string()).collect(),
            required_search_term: "time-lapse".into(),
        }
    }
}

impl FilterPolicy {
    pub fn ban(mut self, tag: &str) -> Self {
        self.banned_hashtags.insert(normalize_hashtag(tag));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Reject(RejectReason),
}

fn normalize_hashtag(tag: &str) -> String {
    tag.trim().trim_start_matches('#').to_lowercase()
}

/// Rejects short titles, low view counts, missing hashtags, and banned hashtags, in that order.
pub fn metadata_filter(record: &VideoRecord, policy: &FilterPolicy) -> Result<FilterDecision, CurationError> {
    let views = record
        .view_count
        .ok_or(CurationError::MissingMetadata(record.id.clone(), "view_count"))?;
    if record.title.trim().chars().count() < policy.min_title_chars {
        return Ok(FilterDecision::Reject(RejectReason::ShortTitle));
    }
    if views < policy.min_views {
        return Ok(FilterDecision::Reject(RejectReason::LowViews));
    }
    if record.hashtags.iter().all(|t| normalize_hashtag(t).is_empty()) {
        return Ok(FilterDecision::Reject(RejectReason::AbsentHashtags));
    }
    if record
        .hashtags
        .iter()
        .any(|t| policy.banned_hashtags.contains(&normalize_hashtag(t)))
    {
        return Ok(FilterDecision::Reject(RejectReason::BannedHashtag));
    }
    Ok(FilterDecision::Keep)
}

/// Evenly spaced keyframes, first and last included.
pub fn select_keyframes(video: &VideoBuffer, k: usize) -> Vec<Frame> {
    extract_uniform(video.frame_count(), k.max(1))
        .into_iter()
        .map(|i| video.frames()[i].clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionBundle {
    pub keyframe_captions: Vec<String>,
    pub video_caption: String,
    pub is_timelapse: bool,
    /// Trace ids of the requests that produced this bundle, in call order.
    pub provider_trace: Vec<String>,
}

/// Base64 PNG as sent on the wire.
pub fn image_payload(frame: &Frame) -> Result<String, MediaError> {
    Ok(base64::engine::general_purpose::STANDARD.encode(encode_png(frame)?))
}

fn render(template: &str, title: &str, hashtags: &[String], index: usize, count: usize) -> String {
    template
        .replace("{title}", title)
        .replace("{hashtags}", &hashtags.join(", "))
        .replace("{index}", &index.to_string())
        .replace("{count}", &count.to_string())
}

fn request(stage: Stage, prompt: String, images: Option<Vec<String>>, texts: Option<Vec<String>>, title: &str, hashtags: &[String]) -> CaptionRequest {
    CaptionRequest {
        stage,
        images,
        texts,
        title: title.to_string(),
        hashtags: hashtags.to_vec(),
        prompt,
        prompt_version: PROMPT_VERSION.into(),
    }
}

fn single_text(stage: Stage, resp: CaptionResponse) -> Result<String, CurationError> {
    match resp.texts.as_deref() {
        Some([t]) if !t.trim().is_empty() => Ok(t.clone()),
        other => Err(CurationError::BadResponse {
            stage,
            detail: format!("expected one nonempty text, got {other:?}"),
        }),
    }
}

/// Accumulates trace ids when the caller wants them.
#[derive(Debug, Default)]
pub struct Trace(pub Vec<String>);

/// One caption per keyframe, in order. Earlier captions ride along as context.
pub fn caption_keyframes(
    frames: &[Frame],
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
) -> Result<Vec<String>, CurationError> {
    caption_keyframes_traced(frames, title, hashtags, client, &mut Trace::default())
}

fn caption_keyframes_traced(
    frames: &[Frame],
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
    trace: &mut Trace,
) -> Result<Vec<String>, CurationError> {
    if frames.is_empty() {
        return Err(CurationError::Precondition("at least one keyframe is required"));
    }
    let mut captions: Vec<String> = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let payload = image_payload(frame).map_err(|e| CurationError::Video(String::new(), e))?;
        let req = request(
            Stage::Keyframe,
            render(KEYFRAME_PROMPT, title, hashtags, i + 1, frames.len()),
            Some(vec![payload]),
            Some(captions.clone()),
            title,
            hashtags,
        );
        trace.0.push(req.trace_id());
        match client.send(&req) {
            Ok(resp) => captions.push(single_text(Stage::Keyframe, resp)?),
            Err(e) if captions.is_empty() => return Err(CurationError::ServiceUnavailable(e)),
            Err(e) => {
                return Err(CurationError::PartialFailure {
                    completed: captions,
                    source: e,
                })
            }
        }
    }
    Ok(captions)
}

/// Whole-video caption from keyframe captions, submitted in the given order.
pub fn fuse_captions(
    keyframe_captions: &[String],
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
) -> Result<String, CurationError> {
    fuse_captions_traced(keyframe_captions, title, hashtags, client, &mut Trace::default())
}

fn fuse_captions_traced(
    keyframe_captions: &[String],
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
    trace: &mut Trace,
) -> Result<String, CurationError> {
    if keyframe_captions.is_empty() {
        return Err(CurationError::Precondition("fusion needs at least one keyframe caption"));
    }
    let req = request(
        Stage::Fuse,
        render(FUSE_PROMPT, title, hashtags, 0, keyframe_captions.len()),
        None,
        Some(keyframe_captions.to_vec()),
        title,
        hashtags,
    );
    trace.0.push(req.trace_id());
    let resp = client.send(&req).map_err(CurationError::ServiceUnavailable)?;
    single_text(Stage::Fuse, resp)
}

pub fn judge_timelapse(video_caption: &str, client: &CaptioningClient) -> Result<bool, CurationError> {
    judge_traced(video_caption, "", &[], client, &mut Trace::default())
}

fn judge_traced(
    video_caption: &str,
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
    trace: &mut Trace,
) -> Result<bool, CurationError> {
    if video_caption.trim().is_empty() {
        return Err(CurationError::Precondition("caption to judge is empty"));
    }
    let req = request(
        Stage::Judge,
        render(JUDGE_PROMPT, title, hashtags, 0, 0),
        None,
        Some(vec![video_caption.to_string()]),
        title,
        hashtags,
    );
    trace.0.push(req.trace_id());
    let resp = client.send(&req).map_err(CurationError::ServiceUnavailable)?;
    resp.verdict.ok_or_else(|| CurationError::BadResponse {
        stage: Stage::Judge,
        detail: "missing verdict".into(),
    })
}

/// Runs all three caption stages for one video.
pub fn caption_video(
    video: &VideoBuffer,
    title: &str,
    hashtags: &[String],
    client: &CaptioningClient,
    k: usize,
) -> Result<CaptionBundle, CurationError> {
    let mut trace = Trace::default();
    let keyframes = select_keyframes(video, k);
    let keyframe_captions = caption_keyframes_traced(&keyframes, title, hashtags, client, &mut trace)?;
    let video_caption = fuse_captions_traced(&keyframe_captions, title, hashtags, client, &mut trace)?;
    let is_timelapse = judge_traced(&video_caption, title, hashtags, client, &mut trace)?;
    Ok(CaptionBundle {
        keyframe_captions,
        video_caption,
        is_timelapse,
        provider_trace: trace.0,
    })
}

/// Source of decoded videos keyed by record id.
pub trait VideoStore: Sync {
    fn load(&self, id: &str) -> Result<VideoBuffer, MediaError>;
}

/// Reads `<dir>/<id>.cmrv`.
#[derive(Debug, Clone)]
pub struct DirStore {
    pub dir: PathBuf,
}

impl DirStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DirStore { dir: dir.into() }
    }
}

impl VideoStore for DirStore {
    fn load(&self, id: &str) -> Result<VideoBuffer, MediaError> {
        load_cmrv(&self.dir.join(format!("{id}.cmrv")))
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore(pub HashMap<String, VideoBuffer>);

impl VideoStore for MemoryStore {
    fn load(&self, id: &str) -> Result<VideoBuffer, MediaError> {
        self.0
            .get(id)
            .cloned()
            .ok_or_else(|| MediaError::Io(format!("no video stored for {id:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFailure {
    pub id: String,
    pub error: CurationError,
}

#[derive(Debug, Clone)]
pub struct ClosedLoopOutcome {
    /// Same order as the input.
    pub records: Vec<VideoRecord>,
    pub failures: Vec<RecordFailure>,
}

#[derive(Debug, Clone, Copy)]
pub struct LoopOptions {
    pub keyframes: usize,
    pub jobs: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        LoopOptions { keyframes: 4, jobs: 1 }
    }
}

fn advance(record: &VideoRecord, store: &dyn VideoStore, policy: &FilterPolicy, client: &CaptioningClient, keyframes: usize) -> Result<VideoRecord, CurationError> {
    let mut out = record.clone();
    if out.status == Status::Ingested {
        out.status = match metadata_filter(&out, policy)? {
            FilterDecision::Keep => Status::Kept,
            FilterDecision::Reject(r) => Status::Rejected(r),
        };
    }
    if out.status != Status::Kept {
        return Ok(out);
    }
    let video = store.load(&out.id).map_err(|e| CurationError::Video(out.id.clone(), e))?;
    let bundle = caption_video(&video, &out.title, &out.hashtags, client, keyframes)?;
    out.status = if bundle.is_timelapse {
        Status::Curated
    } else {
        Status::Rejected(RejectReason::ClosedLoop)
    };
    out.captions = Some(bundle);
    Ok(out)
}

/// Filters ingested records, then captions and judges every kept one.
///
/// Records already curated or rejected pass through untouched, so a second
/// run over the output makes no service calls. A failing record keeps its
/// input state and is reported in `failures`.
pub fn run_closed_loop(
    records: &[VideoRecord],
    store: &dyn VideoStore,
    policy: &FilterPolicy,
    client: &CaptioningClient,
    options: LoopOptions,
) -> ClosedLoopOutcome {
    let slots: Vec<Mutex<Option<Result<VideoRecord, CurationError>>>> =
        records.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.jobs.clamp(1, records.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= records.len() {
                    break;
                }
                let result = advance(&records[i], store, policy, client, options.keyframes);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
            });
        }
    });

    let mut outcome = ClosedLoopOutcome {
        records: Vec::with_capacity(records.len()),
        failures: Vec::new(),
    };
    for (slot, original) in slots.into_iter().zip(records) {
        match slot.into_inner().unwrap_or_else(|e| e.into_inner()) {
            Some(Ok(r)) => outcome.records.push(r),
            Some(Err(error)) => {
                outcome.failures.push(RecordFailure {
                    id: original.id.clone(),
                    error,
                });
                outcome.records.push(original.clone());
            }
            None => unreachable!("every index is claimed by a worker"),
        }
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::media_io::Fps;
    use std::sync::Arc;
    use std::time::Duration;

    fn rec(id: &str, hashtags: &[&str]) -> VideoRecord {
        VideoRecord::ingested(
            id,
            "Rose blooming over two weeks",
            hashtags.iter().map(|s| s.to_string()).collect(),
            10_000,
        )
    }

    fn client(p: Arc<MockProvider>, max_in_flight: usize, retries: u32) -> CaptioningClient {
        CaptioningClient::new(p, max_in_flight, retries).with_backoff(Duration::ZERO, Duration::ZERO)
    }

    fn frames(n: u8) -> Vec<Frame> {
        (0..n).map(|v| Frame::filled(2, 2, 3, v * 40).unwrap()).collect()
    }

    fn video(n: u8) -> VideoBuffer {
        VideoBuffer::new(frames(n), Fps::DEFAULT, "v").unwrap()
    }

    #[test]
    fn filter_examples() {
        let p = FilterPolicy::default();
        assert_eq!(
            metadata_filter(&rec("a", &["timelapse", "shorts"]), &p).unwrap(),
            FilterDecision::Reject(RejectReason::BannedHashtag)
        );
        assert_eq!(
            metadata_filter(&rec("a", &[]), &p).unwrap(),
            FilterDecision::Reject(RejectReason::AbsentHashtags)
        );
        assert_eq!(metadata_filter(&rec("a", &["timelapse"]), &p).unwrap(), FilterDecision::Keep);
        assert_eq!(
            metadata_filter(&rec("a", &["#YouTube"]), &p).unwrap(),
            FilterDecision::Reject(RejectReason::BannedHashtag)
        );
    }

    #[test]
    fn filter_thresholds() {
        let p = FilterPolicy::default();
        let mut short = rec("a", &["timelapse"]);
        short.title = "Rose".into();
        assert_eq!(metadata_filter(&short, &p).unwrap(), FilterDecision::Reject(RejectReason::ShortTitle));
        let mut quiet = rec("a", &["timelapse"]);
        quiet.view_count = Some(99);
        assert_eq!(metadata_filter(&quiet, &p).unwrap(), FilterDecision::Reject(RejectReason::LowViews));
        quiet.view_count = None;
        assert!(matches!(
            metadata_filter(&quiet, &p),
            Err(CurationError::MissingMetadata(_, "view_count"))
        ));
        let custom = FilterPolicy::default().ban("Flowers");
        assert_eq!(
            metadata_filter(&rec("a", &["flowers"]), &custom).unwrap(),
            FilterDecision::Reject(RejectReason::BannedHashtag)
        );
    }

    #[test]
    fn keyframe_selection() {
        let v = video(6);
        assert_eq!(select_keyframes(&v, 1), vec![v.frames()[0].clone()]);
        let v9 = VideoBuffer::new(frames(6).into_iter().cycle().take(9).collect(), Fps::DEFAULT, "v").unwrap();
        let picked = select_keyframes(&v9, 3);
        assert_eq!(picked, vec![v9.frames()[0].clone(), v9.frames()[4].clone(), v9.frames()[8].clone()]);
        assert_eq!(select_keyframes(&v, 6), v.frames().to_vec());
    }

    #[test]
    fn canned_keyframe_captions_in_order() {
        let fs = frames(3);
        let mock = Arc::new(
            MockProvider::new()
                .with_keyframe_caption(&fs[0], "seed")
                .with_keyframe_caption(&fs[1], "sprout")
                .with_keyframe_caption(&fs[2], "flower"),
        );
        let c = client(mock.clone(), 2, 0);
        let tags = vec!["timelapse".to_string()];
        let got = caption_keyframes(&fs, "Rose", &tags, &c).unwrap();
        assert_eq!(got, vec!["seed", "sprout", "flower"]);
        assert_eq!(caption_keyframes(&fs, "Rose", &tags, &c).unwrap(), got);

        let reqs = mock.requests();
        assert_eq!(reqs.len(), 6);
        assert!(reqs[0].prompt.contains("Rose"));
        assert!(reqs[0].prompt.contains("timelapse"));
        assert!(reqs[0].prompt.contains("keyframe 1 of 3"));
        assert_eq!(reqs[2].texts.as_deref().unwrap(), ["seed", "sprout"]);
    }

    #[test]
    fn failing_service() {
        let mock = Arc::new(MockProvider::new().with_failures(FailMode::Always));
        let c = client(mock.clone(), 1, 0);
        assert!(matches!(
            caption_keyframes(&frames(2), "t", &[], &c),
            Err(CurationError::ServiceUnavailable(_))
        ));
        assert_eq!(mock.calls(), 1);
        assert!(matches!(
            caption_keyframes(&[], "t", &[], &c),
            Err(CurationError::Precondition(_))
        ));
    }

    struct FailAfter(usize, MockProvider, AtomicUsize);

    impl CaptionProvider for FailAfter {
        fn call(&self, r: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
            if self.2.fetch_add(1, Ordering::SeqCst) >= self.0 {
                return Err(ProviderError::Transient("down".into()));
            }
            self.1.call(r)
        }
    }

    #[test]
    fn partial_failure_keeps_prefix() {
        let fs = frames(3);
        let p = FailAfter(2, MockProvider::new().with_keyframe_caption(&fs[0], "a").with_keyframe_caption(&fs[1], "b"), AtomicUsize::new(0));
        let c = CaptioningClient::new(p, 1, 0);
        match caption_keyframes(&fs, "t", &[], &c) {
            Err(CurationError::PartialFailure { completed, .. }) => assert_eq!(completed, vec!["a", "b"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fusion_and_order() {
        let mock = Arc::new(MockProvider::new().with_fusion(&["only"], "fused only"));
        let c = client(mock.clone(), 1, 0);
        assert_eq!(fuse_captions(&["only".into()], "t", &[], &c).unwrap(), "fused only");

        let caps: Vec<String> = vec!["b".into(), "a".into(), "c".into()];
        fuse_captions(&caps, "t", &[], &c).unwrap();
        assert_eq!(mock.requests().last().unwrap().texts.as_ref().unwrap(), &caps);
        assert!(matches!(fuse_captions(&[], "t", &[], &c), Err(CurationError::Precondition(_))));
    }

    #[test]
    fn verdicts() {
        let mock = Arc::new(MockProvider::new().with_verdict("X", true).with_verdict("Y", false));
        let c = client(mock, 1, 0);
        assert!(judge_timelapse("X", &c).unwrap());
        assert!(!judge_timelapse("Y", &c).unwrap());
        assert!(matches!(judge_timelapse(" ", &c), Err(CurationError::Precondition(_))));
    }

    fn store(ids: &[&str]) -> MemoryStore {
        MemoryStore(ids.iter().map(|id| (id.to_string(), video(5).with_source_id(*id))).collect())
    }

    #[test]
    fn closed_loop_end_to_end() {
        let mut records = vec![rec("a", &["timelapse"]), rec("b", &["timelapse"]), rec("c", &["timelapse"])];
        records[1].title = "Ice melting not a timelapse at all".into();
        let mock = Arc::new(MockProvider::new().with_reject_marker("not a timelapse"));
        let c = client(mock.clone(), 2, 0);
        let out = run_closed_loop(&records, &store(&["a", "b", "c"]), &FilterPolicy::default(), &c, LoopOptions { keyframes: 3, jobs: 3 });
        assert!(out.failures.is_empty());
        let statuses: Vec<Status> = out.records.iter().map(|r| r.status).collect();
        assert_eq!(statuses, vec![Status::Curated, Status::Rejected(RejectReason::ClosedLoop), Status::Curated]);
        assert_eq!(mock.calls(), 3 * (3 + 2));
        assert!(mock.peak_in_flight() <= 2);
        let bundle = out.records[0].captions.as_ref().unwrap();
        assert_eq!(bundle.keyframe_captions.len(), 3);
        assert_eq!(bundle.provider_trace.len(), 5);

        let before = mock.calls();
        let again = run_closed_loop(&out.records, &store(&[]), &FilterPolicy::default(), &c, LoopOptions::default());
        assert_eq!(mock.calls(), before);
        assert_eq!(again.records, out.records);
    }

    #[test]
    fn filtered_records_never_reach_the_client() {
        let mock = Arc::new(MockProvider::new());
        let c = client(mock.clone(), 1, 0);
        let out = run_closed_loop(&[rec("x", &["shorts"])], &store(&[]), &FilterPolicy::default(), &c, LoopOptions::default());
        assert_eq!(out.records[0].status, Status::Rejected(RejectReason::BannedHashtag));
        assert_eq!(mock.calls(), 0);
    }

    #[test]
    fn failures_are_isolated() {
        let records = vec![rec("a", &["timelapse"]), rec("missing", &["timelapse"]), rec("c", &["timelapse"])];
        let c = client(Arc::new(MockProvider::new()), 1, 0);
        let out = run_closed_loop(&records, &store(&["a", "c"]), &FilterPolicy::default(), &c, LoopOptions { keyframes: 2, jobs: 2 });
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].id, "missing");
        assert_eq!(out.records[1], records[1]);
        assert_eq!(out.records[0].status, Status::Curated);
        assert_eq!(out.records[2].status, Status::Curated);
    }

    #[test]
    fn http_provider_against_stub() {
        let mock = Arc::new(MockProvider::new().with_verdict("melting ice", false));
        let server = serve_provider(mock.clone()).unwrap();
        let c = CaptioningClient::new(HttpProvider::new(&server.url(), Some("t0k".into())), 2, 0);
        assert!(!judge_timelapse("melting ice", &c).unwrap());
        let caps = caption_keyframes(&frames(2), "Rose", &[], &c).unwrap();
        assert_eq!(caps.len(), 2);
        assert_eq!(mock.calls(), 3);

        let failing = Arc::new(MockProvider::new().with_failures(FailMode::FirstN(1)));
        let server = serve_provider(failing.clone()).unwrap();
        let c = CaptioningClient::new(HttpProvider::new(&server.url(), None), 1, 1)
            .with_backoff(Duration::ZERO, Duration::ZERO);
        assert!(judge_timelapse("a caption", &c).unwrap());
        assert_eq!(failing.calls(), 2);
    }

    #[test]
    fn unreachable_endpoint_is_unavailable() {
        let c = CaptioningClient::new(HttpProvider::new("http://127.0.0.1:9", None), 1, 0);
        assert!(matches!(judge_timelapse("x", &c), Err(CurationError::ServiceUnavailable(_))));
    }
}
