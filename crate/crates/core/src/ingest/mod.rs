//! Log ingest: parse HTTP and SQL log lines into records, categorize agent
//! strings and flag page views.

mod agent;
mod parse;
mod record;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

pub use agent::{classify_agent, AgentRules, Marker};
pub use parse::{
    format_http_line, format_sql_line, parse_http_line, parse_sql_line, HttpField, HttpFormat,
    SQL_FIELDS,
};
pub use record::{AgentCategory, AgentInfo, HttpHit, SqlRequest, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    FieldCount { expected: usize, found: usize },
    Timestamp(String),
    ClientIp(String),
    Method,
    Status(String),
    Number(&'static str),
    Quote,
    Invariant(&'static str),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::FieldCount { expected, found } => {
                write!(f, "wrong field count: expected {}, found {}", expected, found)
            }
            ParseErrorKind::Timestamp(t) => write!(f, "malformed timestamp `{}`", t),
            ParseErrorKind::ClientIp(t) => write!(f, "malformed client address `{}`", t),
            ParseErrorKind::Method => f.write_str("missing HTTP method"),
            ParseErrorKind::Status(t) => write!(f, "unparseable status `{}`", t),
            ParseErrorKind::Number(name) => write!(f, "bad value for {}", name),
            ParseErrorKind::Quote => f.write_str("unbalanced quoted statement"),
            ParseErrorKind::Invariant(msg) => f.write_str(msg),
        }
    }
}

/// A rejected log line. Parse errors are counted, never fatal.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: u64,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("config line {line}: {reason}")]
    Config { line: u64, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// File suffixes whose hits never count as page views.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoiseSuffixes(BTreeSet<String>);

impl Default for NoiseSuffixes {
    fn default() -> Self {
        Self::new(["gif", "jpg", "jpeg", "png", "txt", "css", "ico", "js", "swf"])
    }
}

impl NoiseSuffixes {
    pub fn new<I, S>(suffixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        NoiseSuffixes(
            suffixes
                .into_iter()
                .map(|s| s.as_ref().trim().trim_start_matches('.').to_ascii_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, suffix: &str) -> bool {
        !suffix.is_empty() && self.0.contains(suffix)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Lowercased text after the last `.` of the final path segment; empty if
/// that segment has no dot.
pub fn uri_suffix(uri_stem: &str) -> String {
    let segment = uri_stem.rsplit('/').next().unwrap_or("");
    match segment.rfind('.') {
        Some(pos) => segment[pos + 1..].to_ascii_lowercase(),
        None => String::new(),
    }
}

const PAGE_VIEW_METHODS: [&str; 4] = ["GET", "HEAD", "PUT", "POST"];

/// A hit is a page view when it answers a GET/HEAD/PUT/POST with a 2xx
/// status, is not a noise type, and does not come from an admin agent.
pub fn is_page_view(hit: &HttpHit, agent: &AgentInfo, noise: &NoiseSuffixes) -> bool {
    PAGE_VIEW_METHODS
        .iter()
        .any(|m| hit.method.eq_ignore_ascii_case(m))
        && (200..=299).contains(&hit.status)
        && !noise.contains(&uri_suffix(&hit.uri_stem))
        && agent.category != AgentCategory::Admin
}

/// Distinct agent strings seen during ingest with their categorization.
#[derive(Debug, Clone, Default)]
pub struct AgentTable {
    by_raw: HashMap<String, AgentInfo>,
}

impl AgentTable {
    pub fn get_or_classify(&mut self, raw: &str, rules: &AgentRules) -> &AgentInfo {
        if !self.by_raw.contains_key(raw) {
            self.by_raw
                .insert(raw.to_string(), classify_agent(raw, rules));
        }
        &self.by_raw[raw]
    }

    pub fn get(&self, raw: &str) -> Option<&AgentInfo> {
        self.by_raw.get(raw)
    }

    pub fn insert(&mut self, info: AgentInfo) {
        self.by_raw.insert(info.raw.clone(), info);
    }

    pub fn len(&self) -> usize {
        self.by_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_raw.is_empty()
    }

    /// Entries ordered by raw agent string.
    pub fn sorted(&self) -> Vec<&AgentInfo> {
        let mut all: Vec<&AgentInfo> = self.by_raw.values().collect();
        all.sort_by(|a, b| a.raw.cmp(&b.raw));
        all
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    pub format: HttpFormat,
    pub rules: AgentRules,
    pub noise: NoiseSuffixes,
}

impl IngestOptions {
    pub fn with_default_rules() -> Self {
        IngestOptions {
            rules: AgentRules::default_rules(),
            ..Default::default()
        }
    }
}

/// Where a rejected line came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub source: String,
    pub error: ParseError,
}

#[derive(Debug, Default)]
pub struct HttpBatch {
    pub hits: Vec<HttpHit>,
    pub agents: AgentTable,
    pub errors: Vec<LineError>,
    pub lines: u64,
}

#[derive(Debug, Default)]
pub struct SqlBatch {
    pub queries: Vec<SqlRequest>,
    pub errors: Vec<LineError>,
    pub lines: u64,
}

fn numbered(text: &str) -> Vec<(u64, &str)> {
    text.lines().enumerate().map(|(i, l)| (i as u64 + 1, l)).collect()
}

impl HttpBatch {
    /// Parses one file's worth of text and appends its hits. Ids continue
    /// from the hits already in the batch. Every line is either a hit or a
    /// counted parse error.
    pub fn push_text(&mut self, source: &str, text: &str, opts: &IngestOptions) {
        let lines = numbered(text);
        self.lines += lines.len() as u64;
        let parsed: Vec<Result<HttpHit, ParseError>> = lines
            .par_iter()
            .map(|(no, line)| parse_http_line(line, &opts.format, *no))
            .collect();
        for result in parsed {
            match result {
                Ok(mut hit) => {
                    hit.hit_id = self.hits.len() as u64 + 1;
                    let agent = self.agents.get_or_classify(&hit.agent_raw, &opts.rules);
                    hit.is_page_view = is_page_view(&hit, agent, &opts.noise);
                    self.hits.push(hit);
                }
                Err(error) => self.errors.push(LineError {
                    source: source.to_string(),
                    error,
                }),
            }
        }
    }

    pub fn push_file(&mut self, path: &Path, opts: &IngestOptions) -> Result<(), IngestError> {
        let text = read(path)?;
        self.push_text(&path.display().to_string(), &text, opts);
        Ok(())
    }

    pub fn page_views(&self) -> usize {
        self.hits.iter().filter(|h| h.is_page_view).count()
    }
}

impl SqlBatch {
    pub fn push_text(&mut self, source: &str, text: &str) {
        let lines = numbered(text);
        self.lines += lines.len() as u64;
        let parsed: Vec<Result<SqlRequest, ParseError>> = lines
            .par_iter()
            .map(|(no, line)| parse_sql_line(line, *no))
            .collect();
        for result in parsed {
            match result {
                Ok(mut q) => {
                    q.query_id = self.queries.len() as u64 + 1;
                    self.queries.push(q);
                }
                Err(error) => self.errors.push(LineError {
                    source: source.to_string(),
                    error,
                }),
            }
        }
    }

    pub fn push_file(&mut self, path: &Path) -> Result<(), IngestError> {
        let text = read(path)?;
        self.push_text(&path.display().to_string(), &text);
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, IngestError> {
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(method: &str, stem: &str, status: u16) -> HttpHit {
        HttpHit {
            hit_id: 1,
            timestamp: Timestamp(0),
            client_ip: "10.0.0.1".parse().unwrap(),
            method: method.into(),
            uri_stem: stem.into(),
            uri_query: String::new(),
            status,
            agent_raw: String::new(),
            referrer: String::new(),
            is_page_view: false,
        }
    }

    fn browser() -> AgentInfo {
        classify_agent("Mozilla/4.0 (compatible; MSIE 6.0)", &AgentRules::default_rules())
    }

    #[test]
    fn page_view_conditions() {
        let noise = NoiseSuffixes::default();
        assert!(is_page_view(&hit("GET", "/en/default.asp", 200), &browser(), &noise));
        assert!(!is_page_view(&hit("GET", "/img/t.gif", 200), &browser(), &noise));
        assert!(!is_page_view(&hit("GET", "/img/T.GIF", 200), &browser(), &noise));
        assert!(!is_page_view(&hit("GET", "/en/tools.asp", 302), &browser(), &noise));
        assert!(!is_page_view(&hit("GET", "/en/tools.asp", 404), &browser(), &noise));
        assert!(!is_page_view(&hit("DELETE", "/en/tools.asp", 200), &browser(), &noise));
        assert!(!is_page_view(&hit("OPTIONS", "/", 200), &browser(), &noise));
        assert!(is_page_view(&hit("POST", "/ws/search.asmx", 200), &browser(), &noise));
        let bb = classify_agent("BigBrother", &AgentRules::default_rules());
        assert!(!is_page_view(&hit("GET", "/x.asp", 200), &bb, &noise));
        // a file without an extension is never noise
        assert!(is_page_view(&hit("HEAD", "/en/gif", 204), &browser(), &noise));
    }

    #[test]
    fn suffix_rules() {
        assert_eq!(uri_suffix("/img/a.b/T.GIF"), "gif");
        assert_eq!(uri_suffix("/a.d/readme"), "");
        assert_eq!(uri_suffix("/"), "");
        assert_eq!(uri_suffix(""), "");
        assert_eq!(NoiseSuffixes::new([".CSS", " js "]).iter().collect::<Vec<_>>(), ["css", "js"]);
    }

    #[test]
    fn batch_counts_and_ids() {
        let text = "2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/a.asp\t-\t200\tMSIE\t-\n\
                    bad line\n\
                    \n\
                    2006-03-01T12:00:05Z\t10.0.0.1\tGET\t/b.gif\t-\t200\tMSIE\t-\n";
        let mut batch = HttpBatch::default();
        let opts = IngestOptions::with_default_rules();
        batch.push_text("a", text, &opts);
        assert_eq!(batch.lines, 4);
        assert_eq!(batch.hits.len() + batch.errors.len(), 4);
        assert_eq!(batch.errors[0].error.line, 2);
        assert_eq!(batch.errors[1].error.line, 3);
        assert_eq!(batch.page_views(), 1);
        batch.push_text("b", text, &opts);
        let ids: Vec<u64> = batch.hits.iter().map(|h| h.hit_id).collect();
        assert_eq!(ids, [1, 2, 3, 4]);
        // re-ingest is identical up to the id offset
        for (a, b) in batch.hits[..2].iter().zip(&batch.hits[2..]) {
            let mut b = b.clone();
            b.hit_id -= 2;
            assert_eq!(a, &b);
        }
        assert_eq!(batch.agents.len(), 1);
    }
}
