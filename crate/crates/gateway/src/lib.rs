//! Analysis backends behind one call: a remote chat-completion endpoint or
//! the deterministic local rules engine, with a shared TPM limiter and a
//! cost ledger.

mod backend;
mod config;
mod cost;
mod limiter;

use std::sync::{Arc, Mutex};

use thiserror::Error;

use spade_core::ingest::IngestError;
use spade_core::report::ReportError;
use spade_core::segment::estimate_text_tokens;

pub use backend::{
    parse_completion, request_body, Backend, Completion, LocalRules, RemoteHttp, API_KEY_VAR, ENDPOINT_VAR,
};
pub use config::{BackendConfig, BackendKind};
pub use cost::{estimate_cost, CostEstimate, UsageLedger, UsageRecord, Usd, USAGE_HEADER};
pub use limiter::{max_window_spend, Clock, Grant, LimitError, SimulatedClock, SystemClock, TpmLimiter, WINDOW};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("empty prompt")]
    EmptyPrompt,
    #[error("no data block")]
    NoDataBlock,
    #[error("data block: {0}")]
    Data(#[from] IngestError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
    #[error(transparent)]
    Limit(#[from] LimitError),
    #[error("request failed: {0}")]
    Http(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("giving up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: Box<GatewayError> },
    #[error("backend config: {0}")]
    Config(String),
}

/// Response text with its token counts and cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub text: String,
    pub cost: CostEstimate,
}

/// A backend plus the limiter and ledger shared by every request of a run.
/// Safe to call from several threads at once.
pub struct Gateway {
    config: BackendConfig,
    backend: Box<dyn Backend>,
    limiter: TpmLimiter,
    ledger: Mutex<UsageLedger>,
}

impl Gateway {
    pub fn new(config: BackendConfig, backend: Box<dyn Backend>, clock: Arc<dyn Clock>) -> Result<Self, GatewayError> {
        config.validate().map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            limiter: TpmLimiter::new(config.tpm_limit, clock),
            config,
            backend,
            ledger: Mutex::new(UsageLedger::default()),
        })
    }

    /// Backend chosen by `config.kind`; the local engine uses `local`.
    pub fn from_config(config: BackendConfig, local: LocalRules) -> Result<Self, GatewayError> {
        let backend: Box<dyn Backend> = match config.kind {
            BackendKind::LocalRules => Box::new(local),
            BackendKind::RemoteHttp => Box::new(RemoteHttp::from_config(&config)?),
        };
        Self::new(config, backend, Arc::new(SystemClock::default()))
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// Tokens reserved against the TPM limit for one request.
    pub fn reservation(&self, prompt: &str) -> u64 {
        estimate_text_tokens(prompt) as u64 + self.config.max_output_tokens
    }

    /// Sends one prompt and records its cost under `request_id`.
    pub fn analyze(&self, request_id: &str, prompt: &str) -> Result<Analysis, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        if self.backend.metered() {
            self.limiter.acquire(self.reservation(prompt))?;
        }
        let c = self.backend.complete(prompt)?;
        let input = c.input_tokens.unwrap_or_else(|| estimate_text_tokens(prompt) as u64);
        let output = c.output_tokens.unwrap_or_else(|| estimate_text_tokens(&c.text) as u64);
        let cost = estimate_cost(input, output, &self.config);
        self.ledger.lock().unwrap().record(request_id, cost);
        Ok(Analysis { text: c.text, cost })
    }

    pub fn ledger(&self) -> UsageLedger {
        self.ledger.lock().unwrap().clone()
    }

    pub fn grant_log(&self) -> Vec<Grant> {
        self.limiter.grant_log()
    }
}
