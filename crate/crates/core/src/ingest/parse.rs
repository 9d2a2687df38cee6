use std::net::IpAddr;

use super::record::{HttpHit, SqlRequest, Timestamp};
use super::{ParseError, ParseErrorKind};
use crate::tsv;

/// A named column of the HTTP log layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HttpField {
    Timestamp,
    ClientIp,
    Method,
    UriStem,
    UriQuery,
    Status,
    Agent,
    Referrer,
    /// A column present in the file but not used.
    Skip,
}

impl HttpField {
    fn parse(name: &str) -> Option<Self> {
        Some(match name.trim() {
            "timestamp" => HttpField::Timestamp,
            "client_ip" => HttpField::ClientIp,
            "method" => HttpField::Method,
            "uri_stem" => HttpField::UriStem,
            "uri_query" => HttpField::UriQuery,
            "status" => HttpField::Status,
            "agent" => HttpField::Agent,
            "referrer" => HttpField::Referrer,
            "skip" | "_" => HttpField::Skip,
            _ => return None,
        })
    }
}

/// Column order of a tab-separated HTTP log. The canonical layout is
/// `timestamp client_ip method uri_stem uri_query status agent referrer`;
/// other layouts are described by listing their columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpFormat {
    fields: Vec<HttpField>,
}

impl Default for HttpFormat {
    fn default() -> Self {
        HttpFormat {
            fields: vec![
                HttpField::Timestamp,
                HttpField::ClientIp,
                HttpField::Method,
                HttpField::UriStem,
                HttpField::UriQuery,
                HttpField::Status,
                HttpField::Agent,
                HttpField::Referrer,
            ],
        }
    }
}

impl HttpFormat {
    /// Parses a comma-separated column list such as
    /// `client_ip,timestamp,method,uri_stem,uri_query,status,agent,referrer`.
    /// Timestamp, client_ip, method, uri_stem and status are mandatory.
    pub fn parse(columns: &str) -> Option<Self> {
        let fields = columns
            .split(',')
            .map(HttpField::parse)
            .collect::<Option<Vec<_>>>()?;
        let required = [
            HttpField::Timestamp,
            HttpField::ClientIp,
            HttpField::Method,
            HttpField::UriStem,
            HttpField::Status,
        ];
        for r in required {
            if fields.iter().filter(|f| **f == r).count() != 1 {
                return None;
            }
        }
        Some(HttpFormat { fields })
    }

    pub fn width(&self) -> usize {
        self.fields.len()
    }
}

fn err(line: u64, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn parse_ip(text: &str, line: u64) -> Result<IpAddr, ParseError> {
    text.trim()
        .parse()
        .map_err(|_| err(line, ParseErrorKind::ClientIp(text.to_string())))
}

fn parse_ts(text: &str, line: u64) -> Result<Timestamp, ParseError> {
    Timestamp::parse(text).ok_or_else(|| err(line, ParseErrorKind::Timestamp(text.to_string())))
}

/// Parses one HTTP log line. The returned hit has `hit_id = 0` and
/// `is_page_view = false`; ids and flags are assigned by the ingest batch.
pub fn parse_http_line(line: &str, format: &HttpFormat, line_no: u64) -> Result<HttpHit, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != format.width() {
        return Err(err(
            line_no,
            ParseErrorKind::FieldCount {
                expected: format.width(),
                found: cols.len(),
            },
        ));
    }
    let mut hit = HttpHit {
        hit_id: 0,
        timestamp: Timestamp::default(),
        client_ip: IpAddr::from([0, 0, 0, 0]),
        method: String::new(),
        uri_stem: String::new(),
        uri_query: String::new(),
        status: 0,
        agent_raw: String::new(),
        referrer: String::new(),
        is_page_view: false,
    };
    for (field, raw) in format.fields.iter().zip(cols) {
        match field {
            HttpField::Timestamp => hit.timestamp = parse_ts(raw, line_no)?,
            HttpField::ClientIp => hit.client_ip = parse_ip(raw, line_no)?,
            HttpField::Method => {
                let m = tsv::optional(raw).trim();
                if m.is_empty() {
                    return Err(err(line_no, ParseErrorKind::Method));
                }
                hit.method = m.to_ascii_uppercase();
            }
            HttpField::UriStem => hit.uri_stem = tsv::optional(raw).to_string(),
            HttpField::UriQuery => hit.uri_query = tsv::optional(raw).to_string(),
            HttpField::Status => {
                hit.status = raw
                    .trim()
                    .parse::<u16>()
                    .ok()
                    .filter(|s| (100..=599).contains(s))
                    .ok_or_else(|| err(line_no, ParseErrorKind::Status(raw.to_string())))?;
            }
            HttpField::Agent => hit.agent_raw = tsv::optional(raw).to_string(),
            HttpField::Referrer => hit.referrer = tsv::optional(raw).to_string(),
            HttpField::Skip => {}
        }
    }
    // a stem that still carries a query part is split here
    if let Some(pos) = hit.uri_stem.find('?') {
        let tail = hit.uri_stem[pos + 1..].to_string();
        hit.uri_stem.truncate(pos);
        hit.uri_query = match (tail.is_empty(), hit.uri_query.is_empty()) {
            (_, true) => tail,
            (true, false) => std::mem::take(&mut hit.uri_query),
            (false, false) => format!("{}&{}", tail, hit.uri_query),
        };
    }
    Ok(hit)
}

pub const SQL_FIELDS: usize = 9;

/// Parses one SQL log line:
/// `timestamp client_ip rows_returned elapsed_s cpu_s syntax_ok error_text source_tag statement`.
/// The returned request has `query_id = 0`.
pub fn parse_sql_line(line: &str, line_no: u64) -> Result<SqlRequest, ParseError> {
    let line = line.strip_suffix('\r').unwrap_or(line);
    let cols = tsv::split_fields(line, SQL_FIELDS);
    if cols.len() != SQL_FIELDS {
        return Err(err(
            line_no,
            ParseErrorKind::FieldCount {
                expected: SQL_FIELDS,
                found: cols.len(),
            },
        ));
    }
    let timestamp = parse_ts(cols[0], line_no)?;
    let client_ip = parse_ip(cols[1], line_no)?;
    let rows_returned = cols[2]
        .trim()
        .parse::<u64>()
        .map_err(|_| err(line_no, ParseErrorKind::Number("rows_returned")))?;
    let seconds = |text: &str, name: &'static str| {
        text.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| err(line_no, ParseErrorKind::Number(name)))
    };
    let elapsed_s = seconds(cols[3], "elapsed_s")?;
    let cpu_s = seconds(cols[4], "cpu_s")?;
    let is_syntax_ok = match cols[5].trim() {
        "1" => true,
        "0" => false,
        _ => return Err(err(line_no, ParseErrorKind::Number("syntax_ok"))),
    };
    let error_text = tsv::optional(cols[6]).to_string();
    let source_tag = tsv::optional(cols[7]).to_string();
    let statement =
        tsv::unquote_field(cols[8]).ok_or_else(|| err(line_no, ParseErrorKind::Quote))?;

    if is_syntax_ok == !error_text.is_empty() {
        return Err(err(
            line_no,
            ParseErrorKind::Invariant("error_text must be empty exactly when syntax_ok is 1"),
        ));
    }
    if !is_syntax_ok && rows_returned != 0 {
        return Err(err(
            line_no,
            ParseErrorKind::Invariant("a statement with a syntax error cannot return rows"),
        ));
    }
    Ok(SqlRequest {
        query_id: 0,
        timestamp,
        client_ip,
        statement,
        rows_returned,
        elapsed_s,
        cpu_s,
        is_syntax_ok,
        error_text,
        source_tag,
    })
}

/// Renders a hit in the canonical HTTP layout.
pub fn format_http_line(hit: &HttpHit) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        hit.timestamp,
        hit.client_ip,
        hit.method,
        tsv::or_missing(&hit.uri_stem),
        tsv::or_missing(&hit.uri_query),
        hit.status,
        tsv::or_missing(&hit.agent_raw),
        tsv::or_missing(&hit.referrer),
    )
}

/// Renders a request in the SQL log layout.
pub fn format_sql_line(q: &SqlRequest) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        q.timestamp,
        q.client_ip,
        q.rows_returned,
        q.elapsed_s,
        q.cpu_s,
        u8::from(q.is_syntax_ok),
        tsv::or_missing(&q.error_text),
        tsv::or_missing(&q.source_tag),
        tsv::quote_field(&q.statement),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_http_line() {
        let hit = parse_http_line(
            "2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/en/default.asp\t\t200\tMSIE 6.0\t-",
            &HttpFormat::default(),
            1,
        )
        .unwrap();
        assert_eq!(hit.method, "GET");
        assert_eq!(hit.status, 200);
        assert_eq!(hit.uri_stem, "/en/default.asp");
        assert_eq!(hit.uri_query, "");
        assert_eq!(hit.referrer, "");
        assert_eq!(hit.agent_raw, "MSIE 6.0");
        assert_eq!(hit.timestamp.to_string(), "2006-03-01T12:00:00Z");
    }

    #[test]
    fn query_field_maps_directly() {
        let hit = parse_http_line(
            "2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/en/tools/x_sql.asp\tcmd=select+1\t200\t-\t-",
            &HttpFormat::default(),
            1,
        )
        .unwrap();
        assert_eq!(hit.uri_stem, "/en/tools/x_sql.asp");
        assert_eq!(hit.uri_query, "cmd=select+1");
    }

    #[test]
    fn stem_with_embedded_query_is_split() {
        let hit = parse_http_line(
            "2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/x.asp?a=1\tb=2\t200\t-\t-",
            &HttpFormat::default(),
            1,
        )
        .unwrap();
        assert_eq!(hit.uri_stem, "/x.asp");
        assert_eq!(hit.uri_query, "a=1&b=2");
    }

    #[test]
    fn http_errors_carry_line_numbers() {
        let f = HttpFormat::default();
        let e = parse_http_line("a\tb\tc", &f, 7).unwrap_err();
        assert_eq!(e.line, 7);
        assert_eq!(e.kind, ParseErrorKind::FieldCount { expected: 8, found: 3 });
        let e = parse_http_line("not-a-time\t10.0.0.1\tGET\t/\t-\t200\t-\t-", &f, 2).unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Timestamp(_)));
        let e = parse_http_line("2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/\t-\t20x\t-\t-", &f, 2)
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Status(_)));
        let e = parse_http_line("2006-03-01T12:00:00Z\t10.0.0.1\tGET\t/\t-\t700\t-\t-", &f, 2)
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Status(_)));
        let e = parse_http_line("2006-03-01T12:00:00Z\thost\tGET\t/\t-\t200\t-\t-", &f, 2)
            .unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::ClientIp(_)));
    }

    #[test]
    fn alternate_layout() {
        let f = HttpFormat::parse("client_ip,timestamp,skip,method,uri_stem,status").unwrap();
        let hit = parse_http_line("::1\t2006-03-01T12:00:00Z\tzz\tpost\t/a\t201", &f, 1).unwrap();
        assert_eq!(hit.method, "POST");
        assert_eq!(hit.client_ip.to_string(), "::1");
        assert!(HttpFormat::parse("timestamp,method").is_none());
        assert!(HttpFormat::parse("timestamp,timestamp,client_ip,method,uri_stem,status").is_none());
    }

    #[test]
    fn sql_line_with_quoted_statement() {
        let q = parse_sql_line(
            "2006-03-01T12:00:00Z\t10.0.0.2\t12\t1.5\t0.25\t1\t-\tDR5\t\"select\t1 \"\"x\"\"\"",
            3,
        )
        .unwrap();
        assert_eq!(q.statement, "select\t1 \"x\"");
        assert_eq!(q.rows_returned, 12);
        assert_eq!(q.source_tag, "DR5");
        assert!(q.is_syntax_ok);
        assert_eq!(parse_sql_line(&format_sql_line(&q), 3).unwrap(), q);
    }

    #[test]
    fn sql_invariants_are_enforced() {
        let bad_rows = "2006-03-01T12:00:00Z\t10.0.0.2\t5\t1\t1\t0\tsyntax error\t-\tselect";
        assert!(matches!(
            parse_sql_line(bad_rows, 1).unwrap_err().kind,
            ParseErrorKind::Invariant(_)
        ));
        let ok_with_error = "2006-03-01T12:00:00Z\t10.0.0.2\t0\t1\t1\t1\toops\t-\tselect";
        assert!(parse_sql_line(ok_with_error, 1).is_err());
        let negative = "2006-03-01T12:00:00Z\t10.0.0.2\t0\t-1\t1\t1\t-\t-\tselect";
        assert!(parse_sql_line(negative, 1).is_err());
        let unbalanced = "2006-03-01T12:00:00Z\t10.0.0.2\t0\t1\t1\t1\t-\t-\t\"select";
        assert_eq!(parse_sql_line(unbalanced, 1).unwrap_err().kind, ParseErrorKind::Quote);
        // cpu above elapsed is allowed
        let multicore = "2006-03-01T12:00:00Z\t10.0.0.2\t1\t1\t4\t1\t-\t-\tselect 1";
        assert!(parse_sql_line(multicore, 1).is_ok());
    }
}
