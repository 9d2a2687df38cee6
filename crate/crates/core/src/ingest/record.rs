use std::fmt;
use std::net::IpAddr;

use chrono::{DateTime, Datelike, NaiveDateTime, Utc};

/// A UTC instant with one-second resolution, stored as seconds since the
/// Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub i64);

impl Timestamp {
    pub fn from_secs(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub fn secs(self) -> i64 {
        self.0
    }

    /// Parses ISO-8601 text. An explicit offset is honoured; text without a
    /// zone designator is taken as UTC. Fractional seconds are truncated.
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
            return Some(Timestamp(dt.timestamp()));
        }
        for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
            if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
                return Some(Timestamp(naive.and_utc().timestamp()));
            }
        }
        None
    }

    fn datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).unwrap_or_default()
    }

    /// Calendar month key `YYYY-MM`.
    pub fn month_key(self) -> String {
        let dt = self.datetime();
        format!("{:04}-{:02}", dt.year(), dt.month())
    }

    /// Months elapsed since January of year 0; consecutive calendar months
    /// differ by exactly one.
    pub fn month_index(self) -> i64 {
        let dt = self.datetime();
        i64::from(dt.year()) * 12 + i64::from(dt.month0())
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.datetime().format("%Y-%m-%dT%H:%M:%SZ"))
    }
}

/// One HTTP request-reply pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpHit {
    pub hit_id: u64,
    pub timestamp: Timestamp,
    pub client_ip: IpAddr,
    pub method: String,
    pub uri_stem: String,
    pub uri_query: String,
    pub status: u16,
    pub agent_raw: String,
    pub referrer: String,
    pub is_page_view: bool,
}

/// One logged SQL statement with its execution outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SqlRequest {
    pub query_id: u64,
    pub timestamp: Timestamp,
    pub client_ip: IpAddr,
    pub statement: String,
    pub rows_returned: u64,
    pub elapsed_s: f64,
    pub cpu_s: f64,
    pub is_syntax_ok: bool,
    pub error_text: String,
    pub source_tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentCategory {
    Browser,
    Spider,
    Program,
    Admin,
    Unknown,
}

impl AgentCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentCategory::Browser => "browser",
            AgentCategory::Spider => "spider",
            AgentCategory::Program => "program",
            AgentCategory::Admin => "admin",
            AgentCategory::Unknown => "unknown",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "browser" => Some(AgentCategory::Browser),
            "spider" => Some(AgentCategory::Spider),
            "program" => Some(AgentCategory::Program),
            "admin" => Some(AgentCategory::Admin),
            "unknown" => Some(AgentCategory::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for AgentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A user-agent string together with its canonical name and category.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AgentInfo {
    pub raw: String,
    pub name: String,
    pub category: AgentCategory,
}
