use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use spade_core::detect::DetectorParams;
use spade_core::kv;
use spade_core::prompt::{toggle_rule, RuleSet};
use spade_core::segment::{DEFAULT_TOKEN_BUDGET, DEFAULT_WINDOW_DAYS};
use spade_gateway::{BackendConfig, BackendKind, LocalRules};

use crate::{usage, PipelineArgs};

/// Everything a pipeline run needs, after merging the config file under
/// the command-line flags.
#[derive(Clone, Debug)]
pub struct Settings {
    pub backend: BackendConfig,
    pub params: DetectorParams,
    pub rules: RuleSet,
    pub disabled: Vec<String>,
    pub suppression_map: Vec<String>,
    pub window_days: u32,
    pub budget: usize,
    pub dry_run: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            params: DetectorParams::default(),
            rules: RuleSet::default(),
            disabled: Vec::new(),
            suppression_map: LocalRules::DEFAULT_SUPPRESSION_MAP.iter().map(|s| s.to_string()).collect(),
            window_days: DEFAULT_WINDOW_DAYS,
            budget: DEFAULT_TOKEN_BUDGET,
            dry_run: false,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

impl Settings {
    pub fn resolve(args: &PipelineArgs) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = &args.config {
            s.apply_config(&read(path)?)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
        if let Some(path) = &args.params {
            let text = read(path)?;
            for e in kv::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))? {
                s.params.apply(&e).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            }
        }
        if let Some(path) = &args.rules {
            s.rules = RuleSet::from_template(&read(path)?)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        }
        if let Some(kind) = args.backend {
            s.backend.kind = kind.into();
        }
        if let Some(n) = args.window_days {
            s.window_days = n;
        }
        if let Some(n) = args.budget {
            s.budget = n;
        }
        if !args.no_suppression_map.is_empty() {
            s.suppression_map = args.no_suppression_map.clone();
        }
        s.disabled = args.disable.clone();
        s.dry_run = args.dry_run;

        s.backend.validate().map_err(|e| usage(e.to_string()))?;
        s.params.validate().map_err(|e| usage(e.to_string()))?;
        for id in s.disabled.iter().chain(&s.suppression_map) {
            if s.rules.get(id).is_none() {
                return Err(usage(format!(
                    "unknown rule id {id:?}; valid ids: {}",
                    s.rules.rule_ids().join(", ")
                )));
            }
        }
        if s.window_days == 0 {
            return Err(usage("--window-days must be at least 1"));
        }
        Ok(s)
    }

    /// Applies a `key=value` config file. Keys may name backend settings,
    /// detector parameters, `window_days` or `budget`.
    pub fn apply_config(&mut self, text: &str) -> Result<(), kv::KvError> {
        for e in kv::parse(text)? {
            let key = e.key.as_str();
            if BackendConfig::KEYS.contains(&key) {
                self.backend.apply(&e)?;
            } else if DetectorParams::KEYS.contains(&key) {
                self.params.apply(&e)?;
            } else {
                match key {
                    "window_days" => self.window_days = e.parse()?,
                    "budget" => self.budget = e.parse()?,
                    _ => return Err(e.unknown()),
                }
            }
        }
        Ok(())
    }

    /// The rule set with the `--disable` rules switched off.
    pub fn prompt_rules(&self) -> RuleSet {
        self.disabled.iter().fold(self.rules.clone(), |r, id| {
            toggle_rule(&r, id, false).expect("ids checked in resolve")
        })
    }

    pub fn local_backend(&self) -> LocalRules {
        let map: Vec<&str> = self.suppression_map.iter().map(String::as_str).collect();
        LocalRules::new(self.params.clone(), &self.rules, &map).expect("ids checked in resolve")
    }

    pub fn is_remote(&self) -> bool {
        self.backend.kind == BackendKind::RemoteHttp
    }
}

/// `<dir>/<name>`, creating `dir` first.
pub fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.join(name))
}
