//! Minimal JSON-over-HTTP helper shared by the judge, classifier and
//! generation clients.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    url: String,
    agent: ureq::Agent,
}

impl JsonEndpoint {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        JsonEndpoint { url: url.into(), agent }
    }

    /// Reads the endpoint URL from `var`.
    pub fn from_env(var: &str, timeout: Duration) -> Result<Self> {
        let url = std::env::var(var).map_err(|_| Error::Config(format!("environment variable {var} is not set")))?;
        Ok(Self::new(url, timeout))
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp> {
        let transport = |e: ureq::Error| Error::Transport(format!("{}: {e}", self.url));
        let bytes = serde_json::to_vec(body).map_err(|e| Error::Transport(format!("encoding request: {e}")))?;
        self.agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(&bytes[..])
            .map_err(transport)?
            .into_body()
            .read_json()
            .map_err(transport)
    }
}
