//! Row layouts of the derived tables and their readers and writers.

use std::net::IpAddr;
use std::path::Path;
use std::str::FromStr;

use super::WorkspaceError;
use crate::classifier::IpProfile;
use crate::ingest::{AgentCategory, AgentInfo, HttpHit, LineError, SqlRequest, Timestamp};
use crate::sessionizer::{Classification, EventKind, Session, SessionEntry};
use crate::templating::{CommandStem, SqlTemplate};
use crate::tsv::{self, TableWriter};

pub const WEBLOG: &str = "weblog";
pub const SQLLOG: &str = "sqllog";
pub const WEBAGENT: &str = "webagent";
pub const PARSE_ERRORS: &str = "parse_errors";
pub const WEBCOMMANDSTEM: &str = "webcommandstem";
pub const SQLTEMPLATE: &str = "sqltemplate";
pub const WEBLOG_STEM: &str = "weblog_stem";
pub const SQLLOG_TEMPLATE: &str = "sqllog_template";
pub const SESSION: &str = "session";
pub const SESSIONLOG: &str = "sessionlog";
pub const IPPROFILE: &str = "ipprofile";
pub const SESSIONCLASS: &str = "sessionclass";

const WEBLOG_HEADER: [&str; 10] = [
    "hit_id",
    "timestamp",
    "client_ip",
    "method",
    "uri_stem",
    "uri_query",
    "status",
    "agent",
    "referrer",
    "is_page_view",
];
const SQLLOG_HEADER: [&str; 10] = [
    "query_id",
    "timestamp",
    "client_ip",
    "rows_returned",
    "elapsed_s",
    "cpu_s",
    "is_syntax_ok",
    "error_text",
    "source_tag",
    "statement",
];
const SESSION_HEADER: [&str; 10] = [
    "session_id",
    "client_ip",
    "start_ts",
    "end_ts",
    "page_views",
    "sql_count",
    "distinct_stems",
    "distinct_templates",
    "diversity",
    "duration_s",
];

/// A table file under construction; rows are counted for the manifest.
pub(crate) struct Table {
    pub name: &'static str,
    writer: TableWriter,
    path: String,
}

impl Table {
    pub fn create(dir: &Path, name: &'static str, header: &[&str]) -> Result<Self, WorkspaceError> {
        let path = dir.join(format!("{}.tsv", name));
        let writer = TableWriter::create(&path, header).map_err(|e| WorkspaceError::io(&path, e))?;
        Ok(Table {
            name,
            writer,
            path: path.display().to_string(),
        })
    }

    pub fn row(&mut self, fields: &[&str]) -> Result<(), WorkspaceError> {
        self.writer.row(fields).map_err(|source| WorkspaceError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(self) -> Result<(&'static str, u64), WorkspaceError> {
        let path = self.path;
        let rows = self.writer.finish().map_err(|source| WorkspaceError::Io { path, source })?;
        Ok((self.name, rows))
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub(crate) fn write_weblog(dir: &Path, hits: &[HttpHit]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, WEBLOG, &WEBLOG_HEADER)?;
    for h in hits {
        t.row(&[
            &h.hit_id.to_string(),
            &h.timestamp.to_string(),
            &h.client_ip.to_string(),
            &h.method,
            tsv::or_missing(&h.uri_stem),
            tsv::or_missing(&h.uri_query),
            &h.status.to_string(),
            tsv::or_missing(&h.agent_raw),
            tsv::or_missing(&h.referrer),
            flag(h.is_page_view),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_sqllog(dir: &Path, queries: &[SqlRequest]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, SQLLOG, &SQLLOG_HEADER)?;
    for q in queries {
        t.row(&[
            &q.query_id.to_string(),
            &q.timestamp.to_string(),
            &q.client_ip.to_string(),
            &q.rows_returned.to_string(),
            &q.elapsed_s.to_string(),
            &q.cpu_s.to_string(),
            flag(q.is_syntax_ok),
            tsv::or_missing(&q.error_text),
            tsv::or_missing(&q.source_tag),
            &tsv::quote_field(&q.statement),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_agents(dir: &Path, agents: &[&AgentInfo]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, WEBAGENT, &["name", "category", "agent"])?;
    for a in agents {
        t.row(&[&a.name, a.category.as_str(), tsv::or_missing(&a.raw)])?;
    }
    t.finish()
}

pub(crate) fn write_parse_errors(dir: &Path, errors: &[LineError]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, PARSE_ERRORS, &["source", "line", "error"])?;
    for e in errors {
        t.row(&[&e.source, &e.error.line.to_string(), &e.error.kind.to_string()])?;
    }
    t.finish()
}

pub(crate) fn write_stems(dir: &Path, stems: &[CommandStem]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, WEBCOMMANDSTEM, &["stem_id", "count", "verb", "stem"])?;
    for s in stems {
        t.row(&[&s.stem_id.to_string(), &s.count.to_string(), tsv::or_missing(&s.verb), tsv::or_missing(&s.stem)])?;
    }
    t.finish()
}

pub(crate) fn write_templates(dir: &Path, templates: &[SqlTemplate]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(
        dir,
        SQLTEMPLATE,
        &[
            "template_id",
            "count",
            "syntax_ok_count",
            "returned_rows_count",
            "example_query_id",
            "template_text",
        ],
    )?;
    for s in templates {
        let example = s.example_query_id.map_or_else(|| tsv::MISSING.to_string(), |id| id.to_string());
        t.row(&[
            &s.template_id.to_string(),
            &s.count.to_string(),
            &s.syntax_ok_count.to_string(),
            &s.returned_rows_count.to_string(),
            &example,
            &tsv::quote_field(&s.template_text),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_pairs(
    dir: &Path,
    name: &'static str,
    header: [&str; 2],
    pairs: &[(u64, u64)],
) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, name, &header)?;
    for (a, b) in pairs {
        t.row(&[&a.to_string(), &b.to_string()])?;
    }
    t.finish()
}

pub(crate) fn write_sessions(dir: &Path, sessions: &[Session]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, SESSION, &SESSION_HEADER)?;
    for s in sessions {
        t.row(&session_fields(s).iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    t.finish()
}

/// The session columns shared by the session table and reports.
pub fn session_fields(s: &Session) -> [String; 10] {
    [
        s.session_id.to_string(),
        s.client_ip.to_string(),
        s.start_ts.to_string(),
        s.end_ts.to_string(),
        s.page_views.to_string(),
        s.sql_count.to_string(),
        s.distinct_stems.to_string(),
        s.distinct_templates.to_string(),
        format!("{:.6}", s.diversity),
        s.duration_s.to_string(),
    ]
}

pub fn session_header() -> &'static [&'static str] {
    &SESSION_HEADER
}

pub(crate) fn write_entries(dir: &Path, entries: &[SessionEntry]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(
        dir,
        SESSIONLOG,
        &["session_id", "rank_in_session", "kind", "record_id", "fingerprint_id", "timestamp"],
    )?;
    for e in entries {
        t.row(&[
            &e.session_id.to_string(),
            &e.rank_in_session.to_string(),
            e.kind.as_str(),
            &e.record_id.to_string(),
            &e.fingerprint_id.to_string(),
            &e.timestamp.to_string(),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_profiles(dir: &Path, profiles: &[IpProfile]) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(
        dir,
        IPPROFILE,
        &["client_ip", "ever_spider_agent", "fetched_robots_txt", "ever_admin_agent"],
    )?;
    for p in profiles {
        t.row(&[
            &p.client_ip.to_string(),
            flag(p.ever_spider_agent),
            flag(p.fetched_robots_txt),
            flag(p.ever_admin_agent),
        ])?;
    }
    t.finish()
}

pub(crate) fn write_classes(
    dir: &Path,
    rows: &[(u64, Classification, bool)],
) -> Result<(&'static str, u64), WorkspaceError> {
    let mut t = Table::create(dir, SESSIONCLASS, &["session_id", "classification", "mortal_query"])?;
    for (id, c, mortal) in rows {
        t.row(&[&id.to_string(), c.as_str(), flag(*mortal)])?;
    }
    t.finish()
}

/// Field-by-field reader over the rows of one table file.
struct Reader {
    table: String,
    rows: Vec<String>,
}

struct Row<'a> {
    table: &'a str,
    line: u64,
    fields: Vec<&'a str>,
    next: usize,
}

impl<'a> Row<'a> {
    fn bad(&self, reason: impl Into<String>) -> WorkspaceError {
        WorkspaceError::Table {
            table: self.table.to_string(),
            line: self.line,
            reason: reason.into(),
        }
    }

    fn text(&mut self) -> Result<&'a str, WorkspaceError> {
        let f = self.fields.get(self.next).copied().ok_or_else(|| self.bad("too few fields"))?;
        self.next += 1;
        Ok(f)
    }

    fn value<T: FromStr>(&mut self, what: &str) -> Result<T, WorkspaceError> {
        let f = self.text()?;
        f.parse().map_err(|_| self.bad(format!("bad {} `{}`", what, f)))
    }

    fn optional(&mut self) -> Result<String, WorkspaceError> {
        Ok(tsv::optional(self.text()?).to_string())
    }

    fn flag(&mut self) -> Result<bool, WorkspaceError> {
        match self.text()? {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(self.bad(format!("bad flag `{}`", other))),
        }
    }

    fn timestamp(&mut self) -> Result<Timestamp, WorkspaceError> {
        let f = self.text()?;
        Timestamp::parse(f).ok_or_else(|| self.bad(format!("bad timestamp `{}`", f)))
    }

    fn ip(&mut self) -> Result<IpAddr, WorkspaceError> {
        self.value("address")
    }

    fn quoted(&mut self) -> Result<String, WorkspaceError> {
        let f = self.text()?;
        tsv::unquote_field(f).ok_or_else(|| self.bad("bad quoted field"))
    }

    fn parsed<T>(&mut self, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T, WorkspaceError> {
        let f = self.text()?;
        parse(f).ok_or_else(|| self.bad(format!("bad {} `{}`", what, f)))
    }
}

impl Reader {
    fn open(dir: &Path, name: &str, width: usize) -> Result<Self, WorkspaceError> {
        let path = dir.join(format!("{}.tsv", name));
        let (header, rows) = tsv::read_table(&path).map_err(|e| WorkspaceError::io(&path, e))?;
        if header.len() != width {
            return Err(WorkspaceError::Table {
                table: name.to_string(),
                line: 1,
                reason: format!("expected {} columns, found {}", width, header.len()),
            });
        }
        Ok(Reader {
            table: name.to_string(),
            rows,
        })
    }

    fn map<T>(
        &self,
        width: usize,
        f: impl Fn(&mut Row<'_>) -> Result<T, WorkspaceError>,
    ) -> Result<Vec<T>, WorkspaceError> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, line)| {
                let mut row = Row {
                    table: &self.table,
                    line: i as u64 + 2,
                    fields: tsv::split_fields(line, width),
                    next: 0,
                };
                f(&mut row)
            })
            .collect()
    }
}

fn load<T>(
    dir: &Path,
    name: &str,
    width: usize,
    f: impl Fn(&mut Row<'_>) -> Result<T, WorkspaceError>,
) -> Result<Vec<T>, WorkspaceError> {
    Reader::open(dir, name, width)?.map(width, f)
}

pub(crate) fn read_weblog(dir: &Path) -> Result<Vec<HttpHit>, WorkspaceError> {
    load(dir, WEBLOG, WEBLOG_HEADER.len(), |r| {
        Ok(HttpHit {
            hit_id: r.value("id")?,
            timestamp: r.timestamp()?,
            client_ip: r.ip()?,
            method: r.text()?.to_string(),
            uri_stem: r.optional()?,
            uri_query: r.optional()?,
            status: r.value("status")?,
            agent_raw: r.optional()?,
            referrer: r.optional()?,
            is_page_view: r.flag()?,
        })
    })
}

pub(crate) fn read_sqllog(dir: &Path) -> Result<Vec<SqlRequest>, WorkspaceError> {
    load(dir, SQLLOG, SQLLOG_HEADER.len(), |r| {
        Ok(SqlRequest {
            query_id: r.value("id")?,
            timestamp: r.timestamp()?,
            client_ip: r.ip()?,
            rows_returned: r.value("row count")?,
            elapsed_s: r.value("elapsed")?,
            cpu_s: r.value("cpu")?,
            is_syntax_ok: r.flag()?,
            error_text: r.optional()?,
            source_tag: r.optional()?,
            statement: r.quoted()?,
        })
    })
}

pub(crate) fn read_agents(dir: &Path) -> Result<Vec<AgentInfo>, WorkspaceError> {
    load(dir, WEBAGENT, 3, |r| {
        Ok(AgentInfo {
            name: r.text()?.to_string(),
            category: r.parsed("category", AgentCategory::parse)?,
            raw: r.optional()?,
        })
    })
}

pub(crate) fn read_stems(dir: &Path) -> Result<Vec<CommandStem>, WorkspaceError> {
    load(dir, WEBCOMMANDSTEM, 4, |r| {
        Ok(CommandStem {
            stem_id: r.value("id")?,
            count: r.value("count")?,
            verb: r.optional()?,
            stem: r.optional()?,
        })
    })
}

pub(crate) fn read_templates(dir: &Path) -> Result<Vec<SqlTemplate>, WorkspaceError> {
    load(dir, SQLTEMPLATE, 6, |r| {
        Ok(SqlTemplate {
            template_id: r.value("id")?,
            count: r.value("count")?,
            syntax_ok_count: r.value("count")?,
            returned_rows_count: r.value("count")?,
            example_query_id: {
                let f = r.text()?;
                if f == tsv::MISSING {
                    None
                } else {
                    Some(f.parse().map_err(|_| r.bad("bad example id"))?)
                }
            },
            template_text: r.quoted()?,
        })
    })
}

pub(crate) fn read_pairs(dir: &Path, name: &str) -> Result<Vec<(u64, u64)>, WorkspaceError> {
    load(dir, name, 2, |r| Ok((r.value("id")?, r.value("id")?)))
}

pub(crate) fn read_sessions(dir: &Path) -> Result<Vec<Session>, WorkspaceError> {
    load(dir, SESSION, SESSION_HEADER.len(), |r| {
        Ok(Session {
            session_id: r.value("id")?,
            client_ip: r.ip()?,
            start_ts: r.timestamp()?,
            end_ts: r.timestamp()?,
            page_views: r.value("count")?,
            sql_count: r.value("count")?,
            distinct_stems: r.value("count")?,
            distinct_templates: r.value("count")?,
            diversity: r.value("diversity")?,
            duration_s: r.value("duration")?,
            classification: Classification::Unclassified,
        })
    })
}

pub(crate) fn read_entries(dir: &Path) -> Result<Vec<SessionEntry>, WorkspaceError> {
    load(dir, SESSIONLOG, 6, |r| {
        Ok(SessionEntry {
            session_id: r.value("id")?,
            rank_in_session: r.value("rank")?,
            kind: r.parsed("kind", EventKind::parse)?,
            record_id: r.value("id")?,
            fingerprint_id: r.value("id")?,
            timestamp: r.timestamp()?,
        })
    })
}

pub(crate) fn read_profiles(dir: &Path) -> Result<Vec<IpProfile>, WorkspaceError> {
    load(dir, IPPROFILE, 4, |r| {
        Ok(IpProfile {
            client_ip: r.ip()?,
            ever_spider_agent: r.flag()?,
            fetched_robots_txt: r.flag()?,
            ever_admin_agent: r.flag()?,
        })
    })
}

pub(crate) fn read_classes(dir: &Path) -> Result<Vec<(u64, Classification, bool)>, WorkspaceError> {
    load(dir, SESSIONCLASS, 3, |r| {
        Ok((r.value("id")?, r.parsed("classification", Classification::parse)?, r.flag()?))
    })
}
