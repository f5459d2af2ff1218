//! Prompt assembly from a toggleable rule set.
//!
//! Rule texts live in a template file with sections introduced by `[task]`,
//! `[input]`, `[anomaly N] <title>`, `[domain N] <title>` and `[response]`.
//! The bundled default is `templates/default_rules.txt`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::ingest::render_rows;
use crate::types::Sample;

pub const DATA_BEGIN: &str = "---DATA BEGIN---";
pub const DATA_END: &str = "---DATA END---";

pub const DEFAULT_TEMPLATE: &str = include_str!("../templates/default_rules.txt");

/// Id of the rule asking for re-examination of patterns near irrigation.
pub const REEXAMINATION_RULE: &str = "anomaly.7";
/// Id of the rule describing normal irrigation behavior.
pub const NORMAL_IRRIGATION_RULE: &str = "domain.2";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("cannot serialize an empty segment")]
    EmptySegment,
    #[error("unknown rule id {id:?}; valid ids: {}", valid.join(", "))]
    UnknownRule { id: String, valid: Vec<String> },
    #[error("template line {line}: {message}")]
    Template { line: usize, message: String },
    #[error("duplicate rule id {0}")]
    DuplicateRule(String),
    #[error("rule {0} has an empty body")]
    EmptyRule(String),
    #[error("template is missing the [{0}] section")]
    MissingSection(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleFamily {
    Anomaly,
    Domain,
}

impl RuleFamily {
    fn key(self) -> &'static str {
        match self {
            RuleFamily::Anomaly => "anomaly",
            RuleFamily::Domain => "domain",
        }
    }

    fn heading(self) -> &'static str {
        match self {
            RuleFamily::Anomaly => "Anomaly Rule",
            RuleFamily::Domain => "Domain Rule",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub id: String,
    pub title: String,
    pub body: String,
    pub enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub task_preamble: String,
    pub input_format_note: String,
    pub anomaly_rules: Vec<Rule>,
    pub domain_rules: Vec<Rule>,
    pub response_format: String,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet::from_template(DEFAULT_TEMPLATE).expect("bundled template is valid")
    }
}

enum Section {
    Task,
    Input,
    Rule(RuleFamily, usize),
    Response,
}

fn parse_header(line: &str) -> Option<Result<(Section, String), String>> {
    let rest = line.strip_prefix('[')?;
    let (inside, title) = rest.split_once(']')?;
    let inside = inside.trim();
    let title = title.trim().to_string();
    let section = match inside {
        "task" => Section::Task,
        "input" => Section::Input,
        "response" => Section::Response,
        other => {
            let (family, num) = other.split_once(char::is_whitespace)?;
            let family = match family {
                "anomaly" => RuleFamily::Anomaly,
                "domain" => RuleFamily::Domain,
                _ => return None,
            };
            return Some(match num.trim().parse::<usize>() {
                Ok(n) if !title.is_empty() => Ok((Section::Rule(family, n), title)),
                Ok(_) => Err(format!("rule [{other}] needs a title")),
                Err(_) => Err(format!("bad rule number in [{other}]")),
            });
        }
    };
    Some(Ok((section, title)))
}

impl RuleSet {
    pub fn from_template(text: &str) -> Result<Self, PromptError> {
        let mut task = None;
        let mut input = None;
        let mut response = None;
        let mut anomaly_rules = Vec::new();
        let mut domain_rules = Vec::new();

        let mut current: Option<(Section, String, usize)> = None;
        let mut body = String::new();

        let mut flush = |section: Option<(Section, String, usize)>, body: &mut String| -> Result<(), PromptError> {
            let text = body.trim().to_string();
            body.clear();
            let Some((section, title, _line)) = section else {
                return Ok(());
            };
            match section {
                Section::Task => task = Some(text),
                Section::Input => input = Some(text),
                Section::Response => response = Some(text),
                Section::Rule(family, n) => {
                    let rule = Rule {
                        id: format!("{}.{n}", family.key()),
                        title,
                        body: text,
                        enabled: true,
                    };
                    match family {
                        RuleFamily::Anomaly => anomaly_rules.push(rule),
                        RuleFamily::Domain => domain_rules.push(rule),
                    }
                }
            }
            Ok(())
        };

        for (idx, line) in text.lines().enumerate() {
            match parse_header(line.trim_end()) {
                Some(Ok((section, title))) => {
                    flush(current.take(), &mut body)?;
                    current = Some((section, title, idx + 1));
                }
                Some(Err(message)) => {
                    return Err(PromptError::Template {
                        line: idx + 1,
                        message,
                    })
                }
                None => {
                    if current.is_none() && !line.trim().is_empty() {
                        return Err(PromptError::Template {
                            line: idx + 1,
                            message: "text before the first section".into(),
                        });
                    }
                    body.push_str(line);
                    body.push('\n');
                }
            }
        }
        flush(current.take(), &mut body)?;

        let set = RuleSet {
            task_preamble: task.ok_or(PromptError::MissingSection("task"))?,
            input_format_note: input.ok_or(PromptError::MissingSection("input"))?,
            anomaly_rules,
            domain_rules,
            response_format: response.ok_or(PromptError::MissingSection("response"))?,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let mut seen = std::collections::BTreeSet::new();
        for rule in self.rules() {
            if !seen.insert(rule.id.as_str()) {
                return Err(PromptError::DuplicateRule(rule.id.clone()));
            }
            if rule.body.trim().is_empty() {
                return Err(PromptError::EmptyRule(rule.id.clone()));
            }
        }
        Ok(())
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.anomaly_rules.iter().chain(self.domain_rules.iter())
    }

    pub fn rule_ids(&self) -> Vec<String> {
        self.rules().map(|r| r.id.clone()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Rule> {
        self.rules().find(|r| r.id == id)
    }

    pub fn is_enabled(&self, id: &str) -> bool {
        self.get(id).is_some_and(|r| r.enabled)
    }

    /// Writes the set back in template form; disabled rules are kept.
    pub fn to_template(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[task]\n{}\n", self.task_preamble);
        let _ = writeln!(out, "[input]\n{}\n", self.input_format_note);
        for rule in self.rules() {
            let (family, num) = rule.id.split_once('.').unwrap_or((&rule.id, ""));
            let _ = writeln!(out, "[{family} {num}] {}\n{}\n", rule.title, rule.body);
        }
        let _ = writeln!(out, "[response]\n{}", self.response_format);
        out
    }
}

/// Returns a copy of `ruleset` with one rule's flag set to `enabled`.
pub fn toggle_rule(ruleset: &RuleSet, rule_id: &str, enabled: bool) -> Result<RuleSet, PromptError> {
    let mut out = ruleset.clone();
    let rule = out
        .anomaly_rules
        .iter_mut()
        .chain(out.domain_rules.iter_mut())
        .find(|r| r.id == rule_id)
        .ok_or_else(|| PromptError::UnknownRule {
            id: rule_id.to_string(),
            valid: ruleset.rule_ids(),
        })?;
    rule.enabled = enabled;
    Ok(out)
}

/// One line per sample: `YYYY-MM-DD HH:MM:SS,<value>\n`, no header.
pub fn serialize_segment(samples: &[Sample]) -> Result<String, PromptError> {
    if samples.is_empty() {
        return Err(PromptError::EmptySegment);
    }
    Ok(render_rows(samples))
}

fn push_rules(out: &mut String, family: RuleFamily, rules: &[Rule]) {
    for (n, rule) in rules.iter().filter(|r| r.enabled).enumerate() {
        let _ = write!(out, "{} {} ({}): {}\n\n", family.heading(), n + 1, rule.title, rule.body);
    }
}

/// Assembles the full prompt. Disabled rules are left out and the remaining
/// ones numbered contiguously; the data block always comes last.
pub fn build_prompt(ruleset: &RuleSet, segment_text: &str) -> String {
    let mut out = String::with_capacity(segment_text.len() + 8192);
    out.push_str(&ruleset.task_preamble);
    out.push_str("\n\nINPUT FORMAT\n");
    out.push_str(&ruleset.input_format_note);
    out.push_str("\n\nANOMALY RULES\n");
    push_rules(&mut out, RuleFamily::Anomaly, &ruleset.anomaly_rules);
    out.push_str("DOMAIN RULES\n");
    push_rules(&mut out, RuleFamily::Domain, &ruleset.domain_rules);
    out.push_str("RESPONSE FORMAT\n");
    out.push_str(&ruleset.response_format);
    out.push_str("\n\n");
    out.push_str(DATA_BEGIN);
    out.push('\n');
    out.push_str(segment_text);
    if !segment_text.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(DATA_END);
    out.push('\n');
    out
}

/// Text between the data sentinels, as it was passed to [`build_prompt`].
pub fn extract_data_block(prompt: &str) -> Option<&str> {
    let begin_marker = format!("{DATA_BEGIN}\n");
    let start = prompt.rfind(&begin_marker)? + begin_marker.len();
    let rest = &prompt[start..];
    let end_marker = format!("\n{DATA_END}");
    let end = rest.rfind(&end_marker)? + 1;
    Some(&rest[..end])
}
