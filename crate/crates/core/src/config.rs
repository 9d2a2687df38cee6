//! Flat `key = value` settings shared by the config file and CLI flags.

use std::fmt::Write as _;
use std::net::IpAddr;
use std::str::FromStr;

use thiserror::Error;

use crate::analytics::LanguageMap;
use crate::classifier::ClassifierParams;
use crate::ingest::{HttpFormat, NoiseSuffixes};
use crate::sessionizer::DEFAULT_GAP_S;
use crate::suggester::{DEFAULT_NGRAM, DEFAULT_TOP_K};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: u64 },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    Value { key: String, reason: String },
}

/// Every setting of a workspace. Paths are relative to the workspace
/// root unless absolute; lists are comma-separated.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub http_logs: Vec<String>,
    pub sql_logs: Vec<String>,
    pub http_format: String,
    pub agent_config: Option<String>,
    pub noise_suffixes: Vec<String>,
    pub admin_ips: Vec<IpAddr>,
    pub gap_seconds: i64,
    pub bot_reuse: f64,
    pub min_events: u64,
    pub min_duration: i64,
    pub max_duration: i64,
    pub ip_map: Option<String>,
    pub schema: Option<String>,
    pub languages: String,
    pub smooth: usize,
    pub think_fit: (i32, i32),
    pub size_fit: (i32, i32),
    pub duration_fit: (i32, i32),
    pub ngram: usize,
    pub top_k: usize,
}

impl Default for Config {
    fn default() -> Self {
        let defaults = ClassifierParams::default();
        Config {
            http_logs: Vec::new(),
            sql_logs: Vec::new(),
            http_format: "timestamp,client_ip,method,uri_stem,uri_query,status,agent,referrer".into(),
            agent_config: None,
            noise_suffixes: NoiseSuffixes::default().iter().map(String::from).collect(),
            admin_ips: Vec::new(),
            gap_seconds: DEFAULT_GAP_S,
            bot_reuse: defaults.reuse_threshold,
            min_events: defaults.min_events,
            min_duration: defaults.min_duration_s,
            max_duration: defaults.max_duration_s,
            ip_map: None,
            schema: None,
            languages: LanguageMap::default().to_text(),
            smooth: 1,
            // 8 s to 16 M s
            think_fit: (3, 23),
            size_fit: (2, 20),
            // beyond about 1000 s
            duration_fit: (10, 24),
            ngram: DEFAULT_NGRAM,
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Setting names in file order.
pub const KEYS: [&str; 20] = [
    "http_logs",
    "sql_logs",
    "http_format",
    "agent_config",
    "noise_suffixes",
    "admin_ips",
    "gap_seconds",
    "bot_reuse",
    "min_events",
    "min_duration",
    "max_duration",
    "ip_map",
    "schema",
    "languages",
    "smooth",
    "think_fit",
    "size_fit",
    "duration_fit",
    "ngram",
    "top_k",
];

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| bad(key, format!("`{}` is not a number", value)))
}

fn path(value: &str) -> Option<String> {
    Some(value.to_string()).filter(|v| !v.is_empty())
}

fn range(key: &str, value: &str) -> Result<(i32, i32), ConfigError> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| bad(key, "expected `min..max`"))?;
    let (lo, hi) = (num(key, lo.trim())?, num(key, hi.trim())?);
    if lo > hi {
        return Err(bad(key, "min exceeds max"));
    }
    Ok((lo, hi))
}

impl Config {
    /// Reads a config file. Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i as u64 + 1 })?;
            config.set(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Sets one key from its text form, as a config line or flag would.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "http_logs" => self.http_logs = list(value),
            "sql_logs" => self.sql_logs = list(value),
            "http_format" => {
                HttpFormat::parse(value).ok_or_else(|| bad(key, "unknown or missing columns"))?;
                self.http_format = value.to_string();
            }
            "agent_config" => self.agent_config = path(value),
            "noise_suffixes" => {
                self.noise_suffixes = list(value).into_iter().map(|s| s.to_ascii_lowercase()).collect()
            }
            "admin_ips" => {
                self.admin_ips = list(value)
                    .iter()
                    .map(|s| s.parse().map_err(|_| bad(key, format!("`{}` is not an address", s))))
                    .collect::<Result<_, _>>()?
            }
            "gap_seconds" => self.gap_seconds = num(key, value)?,
            "bot_reuse" => self.bot_reuse = num(key, value)?,
            "min_events" => self.min_events = num(key, value)?,
            "min_duration" => self.min_duration = num(key, value)?,
            "max_duration" => self.max_duration = num(key, value)?,
            "ip_map" => self.ip_map = path(value),
            "schema" => self.schema = path(value),
            "languages" => {
                LanguageMap::parse(value).ok_or_else(|| bad(key, "expected `name=/prefix/,...`"))?;
                self.languages = value.to_string();
            }
            "smooth" => self.smooth = num(key, value)?,
            "think_fit" => self.think_fit = range(key, value)?,
            "size_fit" => self.size_fit = range(key, value)?,
            "duration_fit" => self.duration_fit = range(key, value)?,
            "ngram" => self.ngram = num(key, value)?,
            "top_k" => self.top_k = num(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Cross-key checks that single assignments cannot make.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.gap_seconds < 0 {
            return Err(bad("gap_seconds", "must be non-negative"));
        }
        if self.bot_reuse.is_nan() || self.bot_reuse <= 0.0 {
            return Err(bad("bot_reuse", "must be positive"));
        }
        if self.min_duration > self.max_duration {
            return Err(bad("min_duration", "exceeds max_duration"));
        }
        if self.ngram < 1 {
            return Err(bad("ngram", "must be at least 1"));
        }
        Ok(())
    }

    /// Text form of one key.
    pub fn get(&self, key: &str) -> Option<String> {
        let r = |(lo, hi): (i32, i32)| format!("{}..{}", lo, hi);
        Some(match key {
            "http_logs" => self.http_logs.join(","),
            "sql_logs" => self.sql_logs.join(","),
            "http_format" => self.http_format.clone(),
            "agent_config" => self.agent_config.clone().unwrap_or_default(),
            "noise_suffixes" => self.noise_suffixes.join(","),
            "admin_ips" => self.admin_ips.iter().map(|ip| ip.to_string()).collect::<Vec<_>>().join(","),
            "gap_seconds" => self.gap_seconds.to_string(),
            "bot_reuse" => self.bot_reuse.to_string(),
            "min_events" => self.min_events.to_string(),
            "min_duration" => self.min_duration.to_string(),
            "max_duration" => self.max_duration.to_string(),
            "ip_map" => self.ip_map.clone().unwrap_or_default(),
            "schema" => self.schema.clone().unwrap_or_default(),
            "languages" => self.languages.clone(),
            "smooth" => self.smooth.to_string(),
            "think_fit" => r(self.think_fit),
            "size_fit" => r(self.size_fit),
            "duration_fit" => r(self.duration_fit),
            "ngram" => self.ngram.to_string(),
            "top_k" => self.top_k.to_string(),
            _ => return None,
        })
    }

    /// Canonical file text listing every key.
    pub fn render(&self) -> String {
        let mut out = String::from("# logscope workspace settings\n");
        for key in KEYS {
            let _ = writeln!(out, "{} = {}", key, self.get(key).unwrap_or_default());
        }
        out
    }

    pub fn classifier_params(&self) -> ClassifierParams {
        ClassifierParams {
            reuse_threshold: self.bot_reuse,
            min_events: self.min_events,
            min_duration_s: self.min_duration,
            max_duration_s: self.max_duration,
        }
    }

    pub fn format(&self) -> HttpFormat {
        HttpFormat::parse(&self.http_format).expect("validated on set")
    }

    pub fn noise(&self) -> NoiseSuffixes {
        NoiseSuffixes::new(&self.noise_suffixes)
    }

    pub fn language_map(&self) -> LanguageMap {
        LanguageMap::parse(&self.languages).expect("validated on set")
    }
}
