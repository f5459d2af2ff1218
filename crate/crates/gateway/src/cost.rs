use std::fmt;
use std::iter::Sum;
use std::ops::Add;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::BackendConfig;

/// An amount of money in whole picodollars, so that sums are exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Usd(i128);

const PICO: i128 = 1_000_000_000_000;

impl Usd {
    pub const ZERO: Usd = Usd(0);

    pub fn from_picos(picos: i128) -> Self {
        Usd(picos)
    }

    pub fn picos(self) -> i128 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / PICO as f64
    }

    /// Rounded to four decimal digits, half away from zero.
    pub fn display4(self) -> String {
        let unit = PICO / 10_000;
        let q = (self.0.abs() + unit / 2) / unit;
        let sign = if self.0 < 0 && q > 0 { "-" } else { "" };
        format!("${sign}{}.{:04}", q / 10_000, q % 10_000)
    }
}

impl fmt::Display for Usd {
    /// Exact decimal form without trailing zeros, e.g. `0.0072`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.abs();
        let frac = format!("{:012}", a % PICO);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            write!(f, "{sign}{}", a / PICO)
        } else {
            write!(f, "{sign}{}.{frac}", a / PICO)
        }
    }
}

impl FromStr for Usd {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_start_matches('$');
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let digits = |d: &str| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || (!frac.is_empty() && !digits(frac)) || frac.len() > 12 {
            return Err(format!("invalid amount {s:?}"));
        }
        let int: i128 = int.parse().map_err(|_| format!("invalid amount {s:?}"))?;
        let frac_val: i128 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<12}").parse().map_err(|_| format!("invalid amount {s:?}"))?
        };
        let v = int * PICO + frac_val;
        Ok(Usd(if neg { -v } else { v }))
    }
}

impl Add for Usd {
    type Output = Usd;

    fn add(self, rhs: Usd) -> Usd {
        Usd(self.0 + rhs.0)
    }
}

impl Sum for Usd {
    fn sum<I: Iterator<Item = Usd>>(iter: I) -> Usd {
        iter.fold(Usd::ZERO, Add::add)
    }
}

impl Serialize for Usd {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Usd {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Price in micro-dollars per million tokens, which equals picodollars per token.
fn price_picos_per_token(usd_per_million: f64) -> i128 {
    (usd_per_million * 1e6).round() as i128
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub input_cost: Usd,
    pub output_cost: Usd,
    pub total_cost: Usd,
}

impl CostEstimate {
    pub const ZERO: CostEstimate = CostEstimate {
        input_tokens: 0,
        output_tokens: 0,
        input_cost: Usd::ZERO,
        output_cost: Usd::ZERO,
        total_cost: Usd::ZERO,
    };
}

impl Add for CostEstimate {
    type Output = CostEstimate;

    fn add(self, o: CostEstimate) -> CostEstimate {
        CostEstimate {
            input_tokens: self.input_tokens + o.input_tokens,
            output_tokens: self.output_tokens + o.output_tokens,
            input_cost: self.input_cost + o.input_cost,
            output_cost: self.output_cost + o.output_cost,
            total_cost: self.total_cost + o.total_cost,
        }
    }
}

impl Sum for CostEstimate {
    fn sum<I: Iterator<Item = CostEstimate>>(iter: I) -> CostEstimate {
        iter.fold(CostEstimate::ZERO, Add::add)
    }
}

pub fn estimate_cost(in_tokens: u64, out_tokens: u64, config: &BackendConfig) -> CostEstimate {
    let input_cost = Usd(in_tokens as i128 * price_picos_per_token(config.price_in));
    let output_cost = Usd(out_tokens as i128 * price_picos_per_token(config.price_out));
    CostEstimate {
        input_tokens: in_tokens,
        output_tokens: out_tokens,
        input_cost,
        output_cost,
        total_cost: input_cost + output_cost,
    }
}

/// One row of the usage log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UsageRecord {
    pub request_id: String,
    pub cost: CostEstimate,
}

pub const USAGE_HEADER: &str = "request_id,input_tokens,output_tokens,input_cost,output_cost,total_cost";

/// Per-request costs with a running total.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UsageLedger {
    records: Vec<UsageRecord>,
}

impl UsageLedger {
    pub fn record(&mut self, request_id: impl Into<String>, cost: CostEstimate) {
        self.records.push(UsageRecord {
            request_id: request_id.into(),
            cost,
        });
    }

    pub fn records(&self) -> &[UsageRecord] {
        &self.records
    }

    pub fn total(&self) -> CostEstimate {
        self.records.iter().map(|r| r.cost).sum()
    }

    /// Rows sorted by request id so concurrent runs write identical logs.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<&UsageRecord> = self.records.iter().collect();
        rows.sort_by(|a, b| a.request_id.cmp(&b.request_id));
        let mut out = format!("{USAGE_HEADER}\n");
        for r in rows {
            let c = &r.cost;
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.request_id, c.input_tokens, c.output_tokens, c.input_cost, c.output_cost, c.total_cost
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        match lines.next() {
            Some((_, h)) if h.trim() == USAGE_HEADER => {}
            _ => return Err(format!("usage log must start with `{USAGE_HEADER}`")),
        }
        let mut ledger = UsageLedger::default();
        for (idx, line) in lines {
            let f: Vec<&str> = line.trim().split(',').collect();
            let err = || format!("usage log line {}: malformed row", idx + 1);
            if f.len() != 6 {
                return Err(err());
            }
            let cost = CostEstimate {
                input_tokens: f[1].parse().map_err(|_| err())?,
                output_tokens: f[2].parse().map_err(|_| err())?,
                input_cost: f[3].parse().map_err(|_| err())?,
                output_cost: f[4].parse().map_err(|_| err())?,
                total_cost: f[5].parse().map_err(|_| err())?,
            };
            if cost.total_cost != cost.input_cost + cost.output_cost {
                return Err(format!("usage log line {}: total_cost is not input_cost + output_cost", idx + 1));
            }
            ledger.record(f[0], cost);
        }
        Ok(ledger)
    }
}
