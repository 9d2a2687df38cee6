//! On-disk workspace: configuration, derived tables, reports and a
//! manifest recording which settings and inputs produced each stage.
//!
//! Layout under the root:
//!
//! ```text
//! config.txt                 settings (see crate::config)
//! manifest.tsv               stage, fingerprint, table, rows
//! manifest.settings.tsv      stage, key, value
//! manifest.times.tsv         stage, completed_at (kept apart so the rest is reproducible)
//! tables/*.tsv               derived tables
//! reports/                   report stage output
//! .lock                      held while a run owns the workspace
//! ```
//!
//! A stage fingerprint hashes the stage's settings, the digests of the
//! files it reads directly and the fingerprint of the stage before it,
//! so a changed setting invalidates that stage and everything after it.

mod tables;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{self, Write as _};
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analytics::{IpMap, Schema};
use crate::classifier::{build_ip_profiles, classify_sessions, is_mortal_query_session, IpProfile};
use crate::config::{Config, ConfigError};
use crate::ingest::{AgentRules, AgentTable, HttpBatch, HttpHit, IngestError, IngestOptions, SqlBatch, SqlRequest};
use crate::report::{self, FitInputs, ReportKind, Written};
use crate::sessionizer::{build_sessions, collect_events, Classification, Session, SessionEntry, SessionError};
use crate::suggester::{SuggestError, SuggestIndex};
use crate::templating::{build_corpora, CommandStem, Corpora, SqlTemplate};
use crate::tsv;

pub use tables::{session_fields, session_header};

pub const CONFIG_FILE: &str = "config.txt";
pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const SETTINGS_FILE: &str = "manifest.settings.tsv";
pub const TIMES_FILE: &str = "manifest.times.tsv";
pub const LOCK_FILE: &str = ".lock";
pub const TABLES_DIR: &str = "tables";
pub const REPORTS_DIR: &str = "reports";
const STAGING_DIR: &str = ".staging";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Fingerprint,
    Sessionize,
    Classify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Ingest,
        Stage::Fingerprint,
        Stage::Sessionize,
        Stage::Classify,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Fingerprint => "fingerprint",
            Stage::Sessionize => "sessionize",
            Stage::Classify => "classify",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn index(self) -> usize {
        self as usize
    }

    /// Settings keys whose values feed this stage's fingerprint.
    pub fn settings(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["http_logs", "sql_logs", "http_format", "agent_config", "noise_suffixes"],
            Stage::Fingerprint => &[],
            Stage::Sessionize => &["gap_seconds"],
            Stage::Classify => &["bot_reuse", "min_events", "min_duration", "max_duration", "admin_ips"],
            Stage::Report => &[
                "languages",
                "smooth",
                "think_fit",
                "size_fit",
                "duration_fit",
                "ip_map",
                "schema",
                "bot_reuse",
                "min_events",
            ],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageState {
    Current,
    /// Ran, but with other settings or inputs, or its tables changed.
    Stale,
    Missing,
}

impl StageState {
    pub fn as_str(self) -> &'static str {
        match self {
            StageState::Current => "current",
            StageState::Stale => "stale",
            StageState::Missing => "missing",
        }
    }
}

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0} is not a workspace (no {CONFIG_FILE}); run `logscope init` first")]
    NotInitialized(String),
    #[error("{0} is already a workspace")]
    AlreadyInitialized(String),
    #[error("workspace is locked by another run ({0}); delete the file if no run is active")]
    Locked(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {reason}")]
    Input { path: String, reason: String },
    #[error("input file {0} does not exist")]
    MissingInput(String),
    #[error("table {table} line {line}: {reason}")]
    Table { table: String, line: u64, reason: String },
    #[error("stage `{stage}` is {}; `{needed_by}` needs it current. {}", state.as_str(), remedy(*state))]
    NotCurrent {
        stage: Stage,
        state: StageState,
        needed_by: String,
    },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Suggest(#[from] SuggestError),
}

fn remedy(state: StageState) -> &'static str {
    match state {
        StageState::Missing => "Run it first, e.g. `logscope run`.",
        _ => "Its settings or inputs changed since it ran; rerun it together with the stages after it, e.g. `logscope run`.",
    }
}

impl WorkspaceError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        WorkspaceError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub stage: Stage,
    pub fingerprint: String,
    pub table: String,
    pub rows: u64,
}

/// Rows of `manifest.tsv`, in stage order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn fingerprint(&self, stage: Stage) -> Option<&str> {
        self.rows.iter().find(|r| r.stage == stage).map(|r| r.fingerprint.as_str())
    }

    pub fn tables(&self, stage: Stage) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    fn replace(&mut self, stage: Stage, fingerprint: &str, tables: &[(String, u64)]) {
        self.rows.retain(|r| r.stage != stage);
        self.rows.extend(tables.iter().map(|(t, n)| ManifestRow {
            stage,
            fingerprint: fingerprint.to_string(),
            table: t.clone(),
            rows: *n,
        }));
        self.rows.sort_by(|a, b| a.stage.cmp(&b.stage).then_with(|| a.table.cmp(&b.table)));
    }
}

/// Removes the lock file when the owning run ends.
#[derive(Debug)]
pub struct Lock {
    path: PathBuf,
}

impl Lock {
    pub fn acquire(root: &Path) -> Result<Self, WorkspaceError> {
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Lock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(WorkspaceError::Locked(path.display().to_string())),
            Err(e) => Err(WorkspaceError::io(&path, e)),
        }
    }
}

impl Drop for Lock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub executed: Vec<Stage>,
    /// Requested stages already current.
    pub skipped: Vec<Stage>,
    pub tables: Vec<(Stage, String, u64)>,
}

/// Tables read back from disk, or kept from a stage run earlier in the
/// same process.
#[derive(Default)]
struct Loaded {
    hits: Option<Vec<HttpHit>>,
    queries: Option<Vec<SqlRequest>>,
    agents: Option<AgentTable>,
    corpora: Option<Corpora>,
    sessions: Option<Vec<Session>>,
    classified: bool,
}

pub struct Workspace {
    root: PathBuf,
    config: Config,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{:02x}", b)).collect()
}

fn read_text(path: &Path) -> Result<String, WorkspaceError> {
    fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            WorkspaceError::MissingInput(path.display().to_string())
        } else {
            WorkspaceError::io(path, e)
        }
    })
}

fn write_atomic(path: &Path, text: &str) -> Result<(), WorkspaceError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| WorkspaceError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| WorkspaceError::io(path, e))
}

impl Workspace {
    /// Creates the directory layout and writes `config`.
    pub fn init(root: &Path, config: &Config) -> Result<Self, WorkspaceError> {
        config.validate()?;
        if root.join(CONFIG_FILE).exists() {
            return Err(WorkspaceError::AlreadyInitialized(root.display().to_string()));
        }
        for dir in [root.to_path_buf(), root.join(TABLES_DIR), root.join(REPORTS_DIR)] {
            fs::create_dir_all(&dir).map_err(|e| WorkspaceError::io(&dir, e))?;
        }
        write_atomic(&root.join(CONFIG_FILE), &config.render())?;
        Ok(Workspace {
            root: root.to_path_buf(),
            config: config.clone(),
        })
    }

    pub fn open(root: &Path) -> Result<Self, WorkspaceError> {
        let path = root.join(CONFIG_FILE);
        if !path.exists() {
            return Err(WorkspaceError::NotInitialized(root.display().to_string()));
        }
        let config = Config::parse(&read_text(&path)?)?;
        Ok(Workspace {
            root: root.to_path_buf(),
            config,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Replaces the settings used by this handle, e.g. after command-line
    /// overrides. Nothing is written unless [`Workspace::save_config`]
    /// is called.
    pub fn set_config(&mut self, config: Config) -> Result<(), WorkspaceError> {
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn save_config(&self) -> Result<(), WorkspaceError> {
        write_atomic(&self.root.join(CONFIG_FILE), &self.config.render())
    }

    pub fn tables_dir(&self) -> PathBuf {
        self.root.join(TABLES_DIR)
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join(REPORTS_DIR)
    }

    /// Resolves a configured path against the workspace root.
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn manifest(&self) -> Result<Manifest, WorkspaceError> {
        let path = self.root.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let (_, lines) = tsv::read_table(&path).map_err(|e| WorkspaceError::io(&path, e))?;
        let bad = |i: usize, reason: &str| WorkspaceError::Table {
            table: MANIFEST_FILE.into(),
            line: i as u64 + 2,
            reason: reason.into(),
        };
        let mut rows = Vec::new();
        for (i, line) in lines.iter().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(bad(i, "expected 4 fields"));
            }
            rows.push(ManifestRow {
                stage: Stage::parse(f[0]).ok_or_else(|| bad(i, "unknown stage"))?,
                fingerprint: f[1].to_string(),
                table: f[2].to_string(),
                rows: f[3].parse().map_err(|_| bad(i, "bad row count"))?,
            });
        }
        Ok(Manifest { rows })
    }

    fn input_files(&self, stage: Stage) -> Vec<String> {
        let c = &self.config;
        match stage {
            Stage::Ingest => c
                .http_logs
                .iter()
                .chain(&c.sql_logs)
                .chain(&c.agent_config)
                .cloned()
                .collect(),
            Stage::Report => c.ip_map.iter().chain(&c.schema).cloned().collect(),
            _ => Vec::new(),
        }
    }

    /// Fingerprints every stage would have if run now with the current
    /// settings and inputs.
    pub fn expected_fingerprints(&self) -> Result<[String; 5], WorkspaceError> {
        let mut out: [String; 5] = Default::default();
        let mut upstream = String::new();
        for stage in Stage::ALL {
            let mut text = format!("stage\t{}\nupstream\t{}\n", stage, upstream);
            for key in stage.settings() {
                text.push_str(&format!("{}\t{}\n", key, self.config.get(key).unwrap_or_default()));
            }
            for file in self.input_files(stage) {
                let path = self.resolve(&file);
                let bytes = fs::read(&path).map_err(|e| {
                    if e.kind() == io::ErrorKind::NotFound {
                        WorkspaceError::MissingInput(path.display().to_string())
                    } else {
                        WorkspaceError::io(&path, e)
                    }
                })?;
                text.push_str(&format!("file\t{}\t{}\n", file, sha256_hex(&bytes)));
            }
            upstream = sha256_hex(text.as_bytes());
            out[stage.index()] = upstream.clone();
        }
        Ok(out)
    }

    fn output_path(&self, stage: Stage, table: &str) -> PathBuf {
        match stage {
            Stage::Report => self.reports_dir().join(table),
            _ => self.tables_dir().join(format!("{}.tsv", table)),
        }
    }

    fn state_of(&self, stage: Stage, manifest: &Manifest, expected: &[String; 5]) -> StageState {
        let Some(fp) = manifest.fingerprint(stage) else {
            return StageState::Missing;
        };
        if fp != expected[stage.index()] {
            return StageState::Stale;
        }
        for row in manifest.tables(stage) {
            let path = self.output_path(stage, &row.table);
            let on_disk = if row.table.ends_with(".txt") {
                path.exists().then_some(row.rows)
            } else {
                tsv::count_rows(&path).ok()
            };
            if on_disk != Some(row.rows) {
                return StageState::Stale;
            }
        }
        StageState::Current
    }

    pub fn status(&self) -> Result<Vec<(Stage, StageState)>, WorkspaceError> {
        let manifest = self.manifest()?;
        let expected = self.expected_fingerprints()?;
        Ok(Stage::ALL
            .into_iter()
            .map(|s| (s, self.state_of(s, &manifest, &expected)))
            .collect())
    }

    /// Errors unless `stage` is current; `needed_by` names the caller in
    /// the message.
    pub fn require(&self, stage: Stage, needed_by: &str) -> Result<(), WorkspaceError> {
        let manifest = self.manifest()?;
        let expected = self.expected_fingerprints()?;
        for s in Stage::ALL.into_iter().take(stage.index() + 1) {
            let state = self.state_of(s, &manifest, &expected);
            if state != StageState::Current {
                return Err(WorkspaceError::NotCurrent {
                    stage: s,
                    state,
                    needed_by: needed_by.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Runs the requested stages in order. Stages already current are
    /// skipped unless `force`. A stage whose predecessor is neither
    /// requested nor current is refused before anything runs.
    pub fn run(&self, stages: &[Stage], force: bool) -> Result<RunSummary, WorkspaceError> {
        let _lock = Lock::acquire(&self.root)?;
        let requested: HashSet<Stage> = stages.iter().copied().collect();
        let mut manifest = self.manifest()?;
        let expected = self.expected_fingerprints()?;

        for stage in Stage::ALL.into_iter().filter(|s| requested.contains(s)) {
            for up in Stage::ALL.into_iter().take(stage.index()) {
                let state = self.state_of(up, &manifest, &expected);
                if !requested.contains(&up) && state != StageState::Current {
                    return Err(WorkspaceError::NotCurrent {
                        stage: up,
                        state,
                        needed_by: stage.to_string(),
                    });
                }
            }
        }

        let mut summary = RunSummary::default();
        let mut loaded = Loaded::default();
        for stage in Stage::ALL.into_iter().filter(|s| requested.contains(s)) {
            if !force && self.state_of(stage, &manifest, &expected) == StageState::Current {
                summary.skipped.push(stage);
                continue;
            }
            let tables = self.execute(stage, &mut loaded, &manifest)?;
            manifest.replace(stage, &expected[stage.index()], &tables);
            self.write_manifest(&manifest)?;
            self.record_time(stage)?;
            summary.executed.push(stage);
            summary
                .tables
                .extend(tables.into_iter().map(|(t, n)| (stage, t, n)));
        }
        Ok(summary)
    }

    fn write_manifest(&self, manifest: &Manifest) -> Result<(), WorkspaceError> {
        let mut text = String::from("stage\tfingerprint\ttable\trows\n");
        let mut settings = String::from("stage\tkey\tvalue\n");
        let mut seen = HashSet::new();
        for r in &manifest.rows {
            text.push_str(&format!("{}\t{}\t{}\t{}\n", r.stage, r.fingerprint, r.table, r.rows));
            if seen.insert(r.stage) {
                for key in r.stage.settings() {
                    settings.push_str(&format!("{}\t{}\t{}\n", r.stage, key, self.config.get(key).unwrap_or_default()));
                }
            }
        }
        write_atomic(&self.root.join(MANIFEST_FILE), &text)?;
        write_atomic(&self.root.join(SETTINGS_FILE), &settings)
    }

    fn record_time(&self, stage: Stage) -> Result<(), WorkspaceError> {
        let path = self.root.join(TIMES_FILE);
        let mut times: BTreeMap<Stage, String> = BTreeMap::new();
        if let Ok((_, lines)) = tsv::read_table(&path) {
            for line in lines {
                if let Some((s, t)) = line.split_once('\t') {
                    if let Some(s) = Stage::parse(s) {
                        times.insert(s, t.to_string());
                    }
                }
            }
        }
        times.insert(stage, chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        let mut text = String::from("stage\tcompleted_at\n");
        for (s, t) in times {
            text.push_str(&format!("{}\t{}\n", s, t));
        }
        write_atomic(&path, &text)
    }

    fn staging(&self, stage: Stage) -> Result<PathBuf, WorkspaceError> {
        let dir = self.root.join(STAGING_DIR).join(stage.as_str());
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| WorkspaceError::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| WorkspaceError::io(&dir, e))?;
        Ok(dir)
    }

    /// Moves a finished stage's files into place.
    fn publish(&self, stage: Stage, staged: &Path, names: &[String], previous: &Manifest) -> Result<(), WorkspaceError> {
        let target = match stage {
            Stage::Report => self.reports_dir(),
            _ => self.tables_dir(),
        };
        fs::create_dir_all(&target).map_err(|e| WorkspaceError::io(&target, e))?;
        if stage == Stage::Report {
            for old in previous.tables(stage) {
                let _ = fs::remove_file(target.join(&old.table));
            }
        }
        for name in names {
            let file = match stage {
                Stage::Report => name.clone(),
                _ => format!("{}.tsv", name),
            };
            let to = target.join(&file);
            fs::rename(staged.join(&file), &to).map_err(|e| WorkspaceError::io(&to, e))?;
        }
        let _ = fs::remove_dir_all(staged);
        let _ = fs::remove_dir(self.root.join(STAGING_DIR));
        Ok(())
    }

    fn execute(&self, stage: Stage, loaded: &mut Loaded, previous: &Manifest) -> Result<Vec<(String, u64)>, WorkspaceError> {
        let dir = self.staging(stage)?;
        let written: Vec<(String, u64)> = match stage {
            Stage::Ingest => self.run_ingest(&dir, loaded)?,
            Stage::Fingerprint => self.run_fingerprint(&dir, loaded)?,
            Stage::Sessionize => self.run_sessionize(&dir, loaded)?,
            Stage::Classify => self.run_classify(&dir, loaded)?,
            Stage::Report => self.run_report(&dir, loaded)?,
        };
        let names: Vec<String> = written.iter().map(|(n, _)| n.clone()).collect();
        self.publish(stage, &dir, &names, previous)?;
        Ok(written)
    }

    fn ingest_options(&self) -> Result<IngestOptions, WorkspaceError> {
        let rules = match &self.config.agent_config {
            Some(p) => AgentRules::parse(&read_text(&self.resolve(p))?).map_err(|e| WorkspaceError::Input {
                path: p.clone(),
                reason: e.to_string(),
            })?,
            None => AgentRules::default_rules(),
        };
        Ok(IngestOptions {
            format: self.config.format(),
            rules,
            noise: self.config.noise(),
        })
    }

    fn run_ingest(&self, dir: &Path, loaded: &mut Loaded) -> Result<Vec<(String, u64)>, WorkspaceError> {
        let opts = self.ingest_options()?;
        let mut http = HttpBatch::default();
        for p in &self.config.http_logs {
            http.push_text(p, &read_text(&self.resolve(p))?, &opts);
        }
        let mut sql = SqlBatch::default();
        for p in &self.config.sql_logs {
            sql.push_text(p, &read_text(&self.resolve(p))?);
        }
        let mut errors = http.errors.clone();
        errors.extend(sql.errors.iter().cloned());
        let out = vec![
            tables::write_weblog(dir, &http.hits)?,
            tables::write_sqllog(dir, &sql.queries)?,
            tables::write_agents(dir, &http.agents.sorted())?,
            tables::write_parse_errors(dir, &errors)?,
        ];
        loaded.hits = Some(http.hits);
        loaded.agents = Some(http.agents);
        loaded.queries = Some(sql.queries);
        Ok(out.into_iter().map(|(n, r)| (n.to_string(), r)).collect())
    }

    fn ensure_records(&self, loaded: &mut Loaded) -> Result<(), WorkspaceError> {
        let dir = self.tables_dir();
        if loaded.hits.is_none() {
            loaded.hits = Some(tables::read_weblog(&dir)?);
        }
        if loaded.queries.is_none() {
            loaded.queries = Some(tables::read_sqllog(&dir)?);
        }
        Ok(())
    }

    fn ensure_agents(&self, loaded: &mut Loaded) -> Result<(), WorkspaceError> {
        if loaded.agents.is_none() {
            let mut t = AgentTable::default();
            for a in tables::read_agents(&self.tables_dir())? {
                t.insert(a);
            }
            loaded.agents = Some(t);
        }
        Ok(())
    }

    fn ensure_corpora(&self, loaded: &mut Loaded) -> Result<(), WorkspaceError> {
        if loaded.corpora.is_none() {
            let dir = self.tables_dir();
            loaded.corpora = Some(Corpora {
                stems: tables::read_stems(&dir)?,
                templates: tables::read_templates(&dir)?,
                hit_stems: tables::read_pairs(&dir, tables::WEBLOG_STEM)?,
                query_templates: tables::read_pairs(&dir, tables::SQLLOG_TEMPLATE)?,
            });
        }
        Ok(())
    }

    fn ensure_sessions(&self, loaded: &mut Loaded) -> Result<(), WorkspaceError> {
        if loaded.sessions.is_none() {
            loaded.sessions = Some(tables::read_sessions(&self.tables_dir())?);
        }
        Ok(())
    }

    fn ensure_classified(&self, loaded: &mut Loaded) -> Result<(), WorkspaceError> {
        self.ensure_sessions(loaded)?;
        if !loaded.classified {
            let classes: HashMap<u64, Classification> = tables::read_classes(&self.tables_dir())?
                .into_iter()
                .map(|(id, c, _)| (id, c))
                .collect();
            for s in loaded.sessions.as_mut().expect("loaded") {
                s.classification = classes.get(&s.session_id).copied().unwrap_or_default();
            }
            loaded.classified = true;
        }
        Ok(())
    }

    fn run_fingerprint(&self, dir: &Path, loaded: &mut Loaded) -> Result<Vec<(String, u64)>, WorkspaceError> {
        self.ensure_records(loaded)?;
        let corpora = build_corpora(loaded.hits.as_deref().unwrap(), loaded.queries.as_deref().unwrap());
        let out = vec![
            tables::write_stems(dir, &corpora.stems)?,
            tables::write_templates(dir, &corpora.templates)?,
            tables::write_pairs(dir, tables::WEBLOG_STEM, ["hit_id", "stem_id"], &corpora.hit_stems)?,
            tables::write_pairs(dir, tables::SQLLOG_TEMPLATE, ["query_id", "template_id"], &corpora.query_templates)?,
        ];
        loaded.corpora = Some(corpora);
        Ok(out.into_iter().map(|(n, r)| (n.to_string(), r)).collect())
    }

    fn run_sessionize(&self, dir: &Path, loaded: &mut Loaded) -> Result<Vec<(String, u64)>, WorkspaceError> {
        self.ensure_records(loaded)?;
        self.ensure_corpora(loaded)?;
        let events = collect_events(
            loaded.hits.as_deref().unwrap(),
            loaded.queries.as_deref().unwrap(),
            loaded.corpora.as_ref().unwrap(),
        );
        let built = build_sessions(&events, self.config.gap_seconds)?;
        let out = vec![
            tables::write_sessions(dir, &built.sessions)?,
            tables::write_entries(dir, &built.entries)?,
        ];
        // later stages read sessions back as a reader of the table would
        loaded.sessions = None;
        loaded.classified = false;
        Ok(out.into_iter().map(|(n, r)| (n.to_string(), r)).collect())
    }

    fn admin_ips(&self) -> HashSet<IpAddr> {
        self.config.admin_ips.iter().copied().collect()
    }

    fn run_classify(&self, dir: &Path, loaded: &mut Loaded) -> Result<Vec<(String, u64)>, WorkspaceError> {
        self.ensure_records(loaded)?;
        self.ensure_agents(loaded)?;
        self.ensure_sessions(loaded)?;
        let profiles: Vec<IpProfile> = build_ip_profiles(
            loaded.hits.as_deref().unwrap(),
            loaded.queries.as_deref().unwrap(),
            loaded.agents.as_ref().unwrap(),
            &self.admin_ips(),
        );
        let sessions = loaded.sessions.as_mut().unwrap();
        classify_sessions(sessions, &profiles, &self.config.classifier_params());
        loaded.classified = true;
        let rows: Vec<(u64, Classification, bool)> = sessions
            .iter()
            .map(|s| (s.session_id, s.classification, is_mortal_query_session(s)))
            .collect();
        let out = vec![tables::write_profiles(dir, &profiles)?, tables::write_classes(dir, &rows)?];
        Ok(out.into_iter().map(|(n, r)| (n.to_string(), r)).collect())
    }

    fn ip_map(&self) -> Result<IpMap, WorkspaceError> {
        match &self.config.ip_map {
            Some(p) => IpMap::parse(&read_text(&self.resolve(p))?).map_err(|e| WorkspaceError::Input {
                path: p.clone(),
                reason: e.to_string(),
            }),
            None => Ok(IpMap::default()),
        }
    }

    fn schema(&self) -> Result<Schema, WorkspaceError> {
        match &self.config.schema {
            Some(p) => Schema::parse(&read_text(&self.resolve(p))?).map_err(|e| WorkspaceError::Input {
                path: p.clone(),
                reason: e.to_string(),
            }),
            None => Ok(Schema::default()),
        }
    }

    fn write_kind(&self, kind: ReportKind, dir: &Path, loaded: &mut Loaded) -> Result<Vec<Written>, WorkspaceError> {
        let io = |e| WorkspaceError::io(dir, e);
        let c = &self.config;
        Ok(match kind {
            ReportKind::Traffic => {
                self.ensure_records(loaded)?;
                report::write_traffic(
                    dir,
                    loaded.hits.as_deref().unwrap(),
                    loaded.queries.as_deref().unwrap(),
                    &c.language_map(),
                    c.smooth,
                )
                .map_err(io)?
            }
            ReportKind::Sessions => {
                self.ensure_classified(loaded)?;
                report::write_sessions(dir, loaded.sessions.as_deref().unwrap(), &c.classifier_params()).map_err(io)?
            }
            ReportKind::Terms => {
                self.ensure_corpora(loaded)?;
                let schema = self.schema()?;
                let (per_template, per_query) = report::term_tables(&loaded.corpora.as_ref().unwrap().templates, &schema);
                report::write_terms(dir, &per_template, &per_query, &schema).map_err(io)?
            }
            ReportKind::Fits => {
                self.ensure_records(loaded)?;
                self.ensure_corpora(loaded)?;
                self.ensure_sessions(loaded)?;
                let (_, per_query) = report::term_tables(&loaded.corpora.as_ref().unwrap().templates, &Schema::default());
                report::write_fits(
                    dir,
                    &FitInputs {
                        hits: loaded.hits.as_deref().unwrap(),
                        queries: loaded.queries.as_deref().unwrap(),
                        sessions: loaded.sessions.as_deref().unwrap(),
                        terms: &per_query,
                        think_fit: c.think_fit,
                        size_fit: c.size_fit,
                        duration_fit: c.duration_fit,
                    },
                )
                .map_err(io)?
            }
            ReportKind::Institutions => {
                self.ensure_records(loaded)?;
                report::write_institutions(
                    dir,
                    loaded.hits.as_deref().unwrap(),
                    loaded.queries.as_deref().unwrap(),
                    &self.ip_map()?,
                )
                .map_err(io)?
            }
        })
    }

    fn run_report(&self, dir: &Path, loaded: &mut Loaded) -> Result<Vec<(String, u64)>, WorkspaceError> {
        let mut out = Vec::new();
        for kind in ReportKind::ALL {
            out.extend(self.write_kind(kind, dir, loaded)?);
        }
        Ok(out)
    }

    /// The stage a report kind reads from.
    pub fn report_requires(kind: ReportKind) -> Stage {
        match kind {
            ReportKind::Traffic | ReportKind::Institutions => Stage::Ingest,
            ReportKind::Terms => Stage::Fingerprint,
            ReportKind::Fits => Stage::Sessionize,
            ReportKind::Sessions => Stage::Classify,
        }
    }

    /// Writes one report kind into `out`, outside the pipeline.
    pub fn write_report(&self, kind: ReportKind, out: &Path) -> Result<Vec<Written>, WorkspaceError> {
        self.require(Self::report_requires(kind), &format!("report {}", kind.as_str()))?;
        let _lock = Lock::acquire(&self.root)?;
        fs::create_dir_all(out).map_err(|e| WorkspaceError::io(out, e))?;
        self.write_kind(kind, out, &mut Loaded::default())
    }

    /// Builds the suggestion index from the fingerprint tables.
    pub fn suggest_index(&self, n: usize) -> Result<SuggestIndex, WorkspaceError> {
        self.require(Stage::Fingerprint, "suggest")?;
        let dir = self.tables_dir();
        let templates = tables::read_templates(&dir)?;
        let wanted: HashMap<u64, u64> = templates
            .iter()
            .filter_map(|t| t.example_query_id.map(|q| (q, t.template_id)))
            .collect();
        let examples: HashMap<u64, String> = tables::read_sqllog(&dir)?
            .into_iter()
            .filter_map(|q| wanted.get(&q.query_id).map(|&t| (t, q.statement)))
            .collect();
        Ok(SuggestIndex::build(&templates, &examples, n)?)
    }

    pub fn templates(&self) -> Result<Vec<SqlTemplate>, WorkspaceError> {
        tables::read_templates(&self.tables_dir())
    }

    pub fn stems(&self) -> Result<Vec<CommandStem>, WorkspaceError> {
        tables::read_stems(&self.tables_dir())
    }

    pub fn entries(&self) -> Result<Vec<SessionEntry>, WorkspaceError> {
        tables::read_entries(&self.tables_dir())
    }

    pub fn profiles(&self) -> Result<Vec<IpProfile>, WorkspaceError> {
        tables::read_profiles(&self.tables_dir())
    }

    /// Sessions with their labels, once classify has run.
    pub fn sessions(&self) -> Result<Vec<Session>, WorkspaceError> {
        let mut loaded = Loaded::default();
        self.ensure_classified(&mut loaded)?;
        Ok(loaded.sessions.unwrap())
    }
}
