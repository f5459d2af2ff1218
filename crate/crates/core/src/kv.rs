//! `key=value` configuration text shared by parameter, scenario and config files.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("line {line}: duplicate key `{key}`")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for `{key}`")]
    BadValue { line: usize, key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

/// One `key=value` entry with its 1-based source line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    pub fn bad_value(&self) -> KvError {
        KvError::BadValue {
            line: self.line,
            key: self.key.clone(),
            value: self.value.clone(),
        }
    }

    pub fn unknown(&self) -> KvError {
        KvError::UnknownKey {
            line: self.line,
            key: self.key.clone(),
        }
    }

    pub fn parse<T: std::str::FromStr>(&self) -> Result<T, KvError> {
        self.value.parse().map_err(|_| self.bad_value())
    }
}

/// Splits text into entries. Blank lines and `#` comments are skipped.
pub fn parse(text: &str) -> Result<Vec<Entry>, KvError> {
    let mut out: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (k, v) = trimmed.split_once('=').ok_or(KvError::Syntax { line })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(KvError::Syntax { line });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(KvError::Duplicate {
                line,
                key: key.to_string(),
            });
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(out)
}

/// Parses durations such as `90s`, `15m`, `1h`, `2d`; a bare number is minutes.
pub fn parse_duration(text: &str) -> Option<chrono::TimeDelta> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let n: i64 = num.parse().ok()?;
    let secs = match unit.trim() {
        "s" | "sec" => n,
        "" | "m" | "min" => n * 60,
        "h" => n * 3600,
        "d" => n * 86_400,
        _ => return None,
    };
    (secs > 0).then(|| chrono::TimeDelta::seconds(secs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations() {
        use chrono::TimeDelta;
        assert_eq!(parse_duration("1h"), Some(TimeDelta::hours(1)));
        assert_eq!(parse_duration("15"), Some(TimeDelta::minutes(15)));
        assert_eq!(parse_duration(" 90s "), Some(TimeDelta::seconds(90)));
        assert_eq!(parse_duration("0m"), None);
        assert_eq!(parse_duration("1 fortnight"), None);
        assert_eq!(parse_duration("h"), None);
    }

    #[test]
    fn entries_and_errors() {
        let e = parse("# c\n a = 1 \n\nb=x=y\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].line, e[0].key.as_str(), e[0].value.as_str()), (2, "a", "1"));
        assert_eq!(e[1].value, "x=y");
        assert_eq!(parse("a\n"), Err(KvError::Syntax { line: 1 }));
        assert_eq!(
            parse("a=1\na=2\n"),
            Err(KvError::Duplicate { line: 2, key: "a".into() })
        );
    }
}
