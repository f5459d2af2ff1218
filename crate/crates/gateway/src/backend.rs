use std::time::Duration;

use serde_json::{json, Value};
use spade_core::detect::{analyze, DetectorParams};
use spade_core::ingest::parse_rows;
use spade_core::prompt::{extract_data_block, RuleSet, NORMAL_IRRIGATION_RULE, REEXAMINATION_RULE};
use spade_core::report::render;

use crate::config::BackendConfig;
use crate::GatewayError;

pub const API_KEY_VAR: &str = "SPADE_API_KEY";
pub const ENDPOINT_VAR: &str = "SPADE_ENDPOINT";

/// Raw backend output. Token counts are `None` when the backend does not
/// report them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub input_tokens: Option<u64>,
    pub output_tokens: Option<u64>,
}

pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<Completion, GatewayError>;

    /// Whether requests spend tokens against the TPM limit.
    fn metered(&self) -> bool;
}

/// Deterministic engine: runs the reference detectors on the prompt's data
/// block and answers with the canonical report text.
///
/// Prompts that omit any rule of the suppression map are analyzed with
/// suppression near irrigation turned off, the way a model without those
/// rules would flag irrigation rises.
pub struct LocalRules {
    params: DetectorParams,
    /// Rule texts as they appear in a prompt that includes the rule.
    markers: Vec<String>,
}

impl LocalRules {
    /// Rules whose absence switches suppression off, by default.
    pub const DEFAULT_SUPPRESSION_MAP: [&'static str; 2] = [NORMAL_IRRIGATION_RULE, REEXAMINATION_RULE];

    pub fn new(params: DetectorParams, ruleset: &RuleSet, suppression_map: &[&str]) -> Result<Self, GatewayError> {
        let markers = suppression_map
            .iter()
            .map(|id| {
                ruleset
                    .get(id)
                    .map(|r| format!("({}): {}", r.title, r.body))
                    .ok_or_else(|| GatewayError::Config(format!("unknown rule id {id:?} in suppression map")))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { params, markers })
    }

    /// Default rules and suppression map.
    pub fn with_params(params: DetectorParams) -> Self {
        Self::new(params, &RuleSet::default(), &Self::DEFAULT_SUPPRESSION_MAP).expect("default rule ids exist")
    }

    pub fn params_for(&self, prompt: &str) -> DetectorParams {
        let mut p = self.params.clone();
        if self.markers.iter().any(|m| !prompt.contains(m.as_str())) {
            p.suppress_near_irrigation = false;
        }
        p
    }
}

impl Backend for LocalRules {
    fn complete(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let block = extract_data_block(prompt).ok_or(GatewayError::NoDataBlock)?;
        let samples = parse_rows(block)?;
        let report = analyze(&samples, &self.params_for(prompt));
        Ok(Completion {
            text: render(&report)?,
            input_tokens: None,
            output_tokens: None,
        })
    }

    fn metered(&self) -> bool {
        false
    }
}

/// Single-turn chat completion over HTTP.
pub struct RemoteHttp {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    attempts: u32,
    backoff: Duration,
}

impl RemoteHttp {
    pub const ATTEMPTS: u32 = 3;

    /// Endpoint from the config, else `SPADE_ENDPOINT`; key from `SPADE_API_KEY`.
    pub fn from_config(config: &BackendConfig) -> Result<Self, GatewayError> {
        let endpoint = config
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENDPOINT_VAR).ok().filter(|v| !v.is_empty()))
            .ok_or_else(|| GatewayError::Config(format!("remote backend needs an endpoint (config or {ENDPOINT_VAR})")))?;
        let api_key = std::env::var(API_KEY_VAR).ok().filter(|v| !v.is_empty());
        Self::new(endpoint, config.model_name.clone(), api_key)
    }

    pub fn new(endpoint: String, model: String, api_key: Option<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self {
            client,
            endpoint,
            model,
            api_key,
            attempts: Self::ATTEMPTS,
            backoff: Duration::from_secs(1),
        })
    }

    /// Delay before the second attempt; it doubles for each later one.
    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, body: &Value) -> Result<Completion, GatewayError> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| GatewayError::Http(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(GatewayError::Status {
                status: status.as_u16(),
                body: text.chars().take(200).collect(),
            });
        }
        parse_completion(&text)
    }
}

/// Reads `choices[0].message.content` and the optional `usage` counts.
pub fn parse_completion(body: &str) -> Result<Completion, GatewayError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::Protocol(e.to_string()))?;
    let text = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| GatewayError::Protocol("response has no choices[0].message.content".into()))?
        .to_string();
    Ok(Completion {
        text,
        input_tokens: v["usage"]["prompt_tokens"].as_u64(),
        output_tokens: v["usage"]["completion_tokens"].as_u64(),
    })
}

pub fn request_body(model: &str, prompt: &str) -> Value {
    json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": 0,
    })
}

impl Backend for RemoteHttp {
    fn complete(&self, prompt: &str) -> Result<Completion, GatewayError> {
        let body = request_body(&self.model, prompt);
        let mut delay = self.backoff;
        let mut last = None;
        for n in 0..self.attempts {
            if n > 0 {
                std::thread::sleep(delay);
                delay *= 2;
            }
            match self.attempt(&body) {
                Ok(c) => return Ok(c),
                Err(e @ GatewayError::Protocol(_)) => return Err(e),
                Err(e) => last = Some(e),
            }
        }
        Err(GatewayError::Exhausted {
            attempts: self.attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }

    fn metered(&self) -> bool {
        true
    }
}
