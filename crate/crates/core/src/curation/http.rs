//! HTTP captioning backend (`POST {endpoint}/caption`).

use std::sync::Arc;
use std::time::Duration;

use super::client::{CaptionProvider, CaptionRequest, CaptionResponse, ProviderError};
use crate::stub::{Reply, StubServer};

pub const TOKEN_ENV: &str = "CAPTION_TOKEN";
pub const ENDPOINT_ENV: &str = "CAPTION_ENDPOINT";

#[derive(Debug)]
pub struct HttpProvider {
    url: String,
    token: Option<String>,
    agent: ureq::Agent,
}

impl HttpProvider {
    pub fn new(endpoint: &str, token: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        HttpProvider {
            url: format!("{}/caption", endpoint.trim_end_matches('/')),
            token,
            agent,
        }
    }

    /// Token taken from `CAPTION_TOKEN` if set.
    pub fn from_env(endpoint: &str) -> Self {
        Self::new(endpoint, std::env::var(TOKEN_ENV).ok())
    }
}

impl CaptionProvider for HttpProvider {
    fn call(&self, request: &CaptionRequest) -> Result<CaptionResponse, ProviderError> {
        let mut req = self.agent.post(&self.url);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(request) {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<CaptionResponse>()
                .map_err(|e| ProviderError::Fatal(format!("malformed response: {e}"))),
            Err(ureq::Error::StatusCode(code)) if code == 429 || code >= 500 => {
                Err(ProviderError::Transient(format!("HTTP {code}")))
            }
            Err(ureq::Error::StatusCode(code)) => Err(ProviderError::Fatal(format!("HTTP {code}"))),
            Err(e) => Err(ProviderError::Transient(e.to_string())),
        }
    }
}

/// Serves `provider` on a local port, speaking the caption wire protocol.
/// Provider errors map to 503 (transient) or 400 (fatal).
pub fn serve_provider(provider: Arc<dyn CaptionProvider>) -> std::io::Result<StubServer> {
    StubServer::start(move |path: &str, body: &[u8]| {
        if path != "/caption" {
            return Reply::status(404);
        }
        let request: CaptionRequest = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return Reply::text(400, e.to_string()),
        };
        match provider.call(&request) {
            Ok(resp) => Reply::json(200, &resp),
            Err(ProviderError::Transient(m)) => Reply::text(503, m),
            Err(ProviderError::Fatal(m)) => Reply::text(400, m),
        }
    })
}
