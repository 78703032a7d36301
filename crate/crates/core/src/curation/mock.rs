//! Deterministic in-process captioning backend.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use super::client::{CaptionProvider, CaptionRequest, CaptionResponse, ProviderError, Stage};
use super::image_payload;
use crate::media_io::Frame;
use crate::util::fnv1a64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailMode {
    Never,
    Always,
    /// Fail the first `n` calls, then succeed.
    FirstN(usize),
}

/// Answers from lookup tables, falling back to fixed templates.
///
/// * keyframe: caption keyed by image payload, default names the title and payload hash
/// * fuse: caption keyed by the ordered caption list, default joins them
/// * judge: verdict keyed by caption, then `false` if the caption contains any
///   reject marker, else `default_verdict`
///
/// Counters expose total calls and peak concurrency.
#[derive(Debug)]
pub struct MockProvider {
    keyframes: HashMap<u64, String>,
    fusions: HashMap<Vec<String>, String>,
    verdicts: HashMap<String, bool>,
    reject_markers: Vec<String>,
    default_verdict: bool,
    fail: FailMode,
    latency: Duration,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    peak: AtomicUsize,
    log: Mutex<Vec<CaptionRequest>>,
}

impl Default for MockProvider {
    fn default() -> Self {
        MockProvider {
            keyframes: HashMap::new(),
            fusions: HashMap::new(),
            verdicts: HashMap::new(),
            reject_markers: Vec::new(),
            default_verdict: true,
            fail: FailMode::Never,
            latency: Duration::ZERO,
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }
}

fn payload_key(payload: &str) -> u64 {
    fnv1a64(payload.as_bytes())
}

impl MockProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_keyframe_caption(mut self, frame: &Frame, caption: impl Into<String>) -> Self {
        let payload = image_payload(frame).expect("png encoding of a valid frame");
        self.keyframes.insert(payload_key(&payload), caption.into());
        self
    }

    pub fn with_fusion(mut self, captions: &[&str], fused: impl Into<String>) -> Self {
        self.fusions
            .insert(captions.iter().map(|s| s.to_string()).collect(), fused.into());
        self
    }

    pub fn with_verdict(mut self, caption: impl Into<String>, verdict: bool) -> Self {
        self.verdicts.insert(caption.into(), verdict);
        self
    }

    /// Captions containing `marker` (case-insensitive) are judged not time-lapse.
    pub fn with_reject_marker(mut self, marker: impl Into<String>) -> Self {
        self.reject_markers.push(marker.into().to_lowercase());
        self
    }

    pub fn with_default_verdict(mut self, verdict: bool) -> Self {
        self.default_verdict = verdict;
        self
    }

    pub fn with_failures(mut self, fail: FailMode) -> Self {
        self.fail = fail;
        self
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<CaptionRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn answer(&self, req: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
        let texts = req.texts.clone().unwrap_or_default();
        match req.stage {
            Stage::Keyframe => {
                let images = req.images.as_deref().unwrap_or_default();
                let [image] = images else {
                    return Err(ProviderError::Fatal(format!(
                        "keyframe stage expects one image, got {}",
                        images.len()
                    )));
                };
                let key = payload_key(image);
                let caption = self
                    .keyframes
                    .get(&key)
                    .cloned()
                    .unwrap_or_else(|| format!("A frame from \"{}\" [{key:016x}].", req.title));
                Ok(CaptionResponse {
                    texts: Some(vec![caption]),
                    verdict: None,
                })
            }
            Stage::Fuse => {
                if texts.is_empty() {
                    return Err(ProviderError::Fatal("fuse stage without captions".into()));
                }
                let fused = self
                    .fusions
                    .get(&texts)
                    .cloned()
                    .unwrap_or_else(|| format!("Time-lapse of {}: {}", req.title, texts.join(" Then ")));
                Ok(CaptionResponse {
                    texts: Some(vec![fused]),
                    verdict: None,
                })
            }
            Stage::Judge => {
                let caption = texts
                    .first()
                    .ok_or_else(|| ProviderError::Fatal("judge stage without caption".into()))?;
                let lowered = caption.to_lowercase();
                let verdict = self.verdicts.get(caption).copied().unwrap_or_else(|| {
                    !self.reject_markers.iter().any(|m| lowered.contains(m.as_str())) && self.default_verdict
                });
                Ok(CaptionResponse {
                    texts: None,
                    verdict: Some(verdict),
                })
            }
        }
    }
}

impl CaptionProvider for MockProvider {
    fn call(&self, req: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let live = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(live, Ordering::SeqCst);
        self.log
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(req.clone());
        if !self.latency.is_zero() {
            std::thread::sleep(self.latency);
        }
        let result = match self.fail {
            FailMode::Always => Err(ProviderError::Transient("mock failure".into())),
            FailMode::FirstN(k) if n < k => Err(ProviderError::Transient("mock failure".into())),
            _ => self.answer(req),
        };
        self.in_flight.fetch_sub(1, Ordering::SeqCst);
        result
    }
}
