//! Captioning service wire types and the retrying, concurrency-bounded client.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::{fnv1a64, InFlightLimit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Keyframe,
    Fuse,
    Judge,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Keyframe => "keyframe",
            Stage::Fuse => "fuse",
            Stage::Judge => "judge",
        }
    }
}

/// Body of `POST /caption`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub stage: Stage,
    /// Base64-encoded PNG images.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texts: Option<Vec<String>>,
    pub title: String,
    pub hashtags: Vec<String>,
    pub prompt: String,
    pub prompt_version: String,
}

impl CaptionRequest {
    /// Content-derived id, stable across runs and thread schedules.
    pub fn trace_id(&self) -> String {
        let body = serde_json::to_vec(self).unwrap_or_default();
        format!("{}-{:016x}", self.stage.as_str(), fnv1a64(&body))
    }
}

/// Response of `POST /caption`: `texts` for keyframe/fuse, `verdict` for judge.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CaptionResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub texts: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<bool>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    /// Worth retrying: timeouts, 429, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    #[error("fatal: {0}")]
    Fatal(String),
}

/// A captioning backend.
pub trait CaptionProvider: Send + Sync {
    fn call(&self, request: &CaptionRequest) -> Result<CaptionResponse, ProviderError>;
}

impl<P: CaptionProvider + ?Sized> CaptionProvider for Arc<P> {
    fn call(&self, request: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
        (**self).call(request)
    }
}

impl<P: CaptionProvider + ?Sized> CaptionProvider for Box<P> {
    fn call(&self, request: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
        (**self).call(request)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage:?} request failed after {attempts} attempt(s): {last}")]
pub struct SendError {
    pub stage: Stage,
    pub attempts: u32,
    pub last: ProviderError,
}

/// Wraps a provider with an in-flight cap and exponential-backoff retries.
pub struct CaptioningClient {
    provider: Box<dyn CaptionProvider>,
    limit: InFlightLimit,
    retry_budget: u32,
    backoff_base: Duration,
    backoff_cap: Duration,
}

impl CaptioningClient {
    pub fn new(provider: impl CaptionProvider + 'static, max_in_flight: usize, retry_budget: u32) -> Self {
        CaptioningClient {
            provider: Box::new(provider),
            limit: InFlightLimit::new(max_in_flight),
            retry_budget,
            backoff_base: Duration::from_millis(200),
            backoff_cap: Duration::from_secs(10),
        }
    }

    pub fn with_backoff(mut self, base: Duration, cap: Duration) -> Self {
        self.backoff_base = base;
        self.backoff_cap = cap;
        self
    }

    pub fn max_in_flight(&self) -> usize {
        self.limit.max()
    }

    pub fn retry_budget(&self) -> u32 {
        self.retry_budget
    }

    fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry.min(16)).unwrap_or(u32::MAX);
        self.backoff_base.saturating_mul(factor).min(self.backoff_cap)
    }

    /// Sends with up to `retry_budget` retries. Fatal errors are not retried.
    pub fn send(&self, request: &CaptionRequest) -> Result<CaptionResponse, SendError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            let result = {
                let _slot = self.limit.acquire();
                self.provider.call(request)
            };
            match result {
                Ok(resp) => return Ok(resp),
                Err(e @ ProviderError::Fatal(_)) => {
                    return Err(SendError {
                        stage: request.stage,
                        attempts,
                        last: e,
                    })
                }
                Err(e) if attempts > self.retry_budget => {
                    return Err(SendError {
                        stage: request.stage,
                        attempts,
                        last: e,
                    })
                }
                Err(e) => {
                    log::debug!("{} attempt {attempts} failed: {e}", request.stage.as_str());
                    std::thread::sleep(self.delay(attempts - 1));
                }
            }
        }
    }
}
