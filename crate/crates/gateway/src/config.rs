use std::fmt;
use std::str::FromStr;

use spade_core::kv::{self, Entry, KvError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    RemoteHttp,
    LocalRules,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendKind::RemoteHttp => "remote",
            BackendKind::LocalRules => "local-rules",
        })
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "remote" | "remote-http" => Ok(BackendKind::RemoteHttp),
            "local-rules" | "local" => Ok(BackendKind::LocalRules),
            other => Err(format!("unknown backend {other:?}; expected remote or local-rules")),
        }
    }
}

/// Backend selection plus throughput and price settings.
#[derive(Clone, Debug, PartialEq)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Chat-completion URL; remote backend only.
    pub endpoint: Option<String>,
    pub model_name: String,
    pub tpm_limit: u64,
    pub max_inflight: usize,
    /// USD per one million input tokens.
    pub price_in: f64,
    /// USD per one million output tokens.
    pub price_out: f64,
    /// Output tokens reserved against the TPM limit for each request.
    pub max_output_tokens: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::LocalRules,
            endpoint: None,
            model_name: "gpt-4.1".to_string(),
            tpm_limit: 30_000,
            max_inflight: 4,
            price_in: 2.0,
            price_out: 8.0,
            max_output_tokens: 1_000,
        }
    }
}

impl BackendConfig {
    pub const KEYS: [&'static str; 8] = [
        "backend",
        "endpoint",
        "model_name",
        "tpm_limit",
        "max_inflight",
        "price_in",
        "price_out",
        "max_output_tokens",
    ];

    pub fn from_kv(text: &str) -> Result<Self, KvError> {
        let mut c = Self::default();
        for e in kv::parse(text)? {
            c.apply(&e)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, e: &Entry) -> Result<(), KvError> {
        match e.key.as_str() {
            "backend" => self.kind = e.parse()?,
            "endpoint" => self.endpoint = Some(e.value.clone()).filter(|v| !v.is_empty()),
            "model_name" => self.model_name = e.value.clone(),
            "tpm_limit" => self.tpm_limit = e.parse()?,
            "max_inflight" => self.max_inflight = e.parse()?,
            "price_in" => self.price_in = e.parse()?,
            "price_out" => self.price_out = e.parse()?,
            "max_output_tokens" => self.max_output_tokens = e.parse()?,
            _ => return Err(e.unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), KvError> {
        let bad = |m: &str| Err(KvError::Invalid(m.to_string()));
        if self.tpm_limit == 0 {
            return bad("tpm_limit must be positive");
        }
        if self.max_inflight == 0 {
            return bad("max_inflight must be positive");
        }
        if !(self.price_in >= 0.0 && self.price_in.is_finite())
            || !(self.price_out >= 0.0 && self.price_out.is_finite())
        {
            return bad("prices must be finite and non-negative");
        }
        if self.model_name.trim().is_empty() {
            return bad("model_name must not be empty");
        }
        if self.max_output_tokens >= self.tpm_limit {
            return bad("max_output_tokens must be below tpm_limit");
        }
        Ok(())
    }
}
