//! Tab-separated text helpers shared by log ingest and workspace tables.
//!
//! Every field is plain text except a trailing statement field, which is
//! wrapped in double quotes (with `""` escaping) whenever it contains a
//! tab or newline or itself starts with a quote.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const MISSING: &str = "-";

/// Quote `text` if it could not otherwise survive a tab-separated line.
pub fn quote_field(text: &str) -> String {
    if text.contains(['\t', '\n', '\r']) || text.starts_with('"') {
        let mut out = String::with_capacity(text.len() + 2);
        out.push('"');
        for c in text.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
        out
    } else {
        text.to_string()
    }
}

/// Inverse of [`quote_field`]. Returns `None` for a field that opens a
/// quote but is not a well-formed quoted field.
pub fn unquote_field(field: &str) -> Option<String> {
    let Some(body) = field.strip_prefix('"') else {
        return Some(field.to_string());
    };
    let body = body.strip_suffix('"')?;
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c == '"' {
            // inner quotes must be doubled
            if chars.next() != Some('"') {
                return None;
            }
        }
        out.push(c);
    }
    Some(out)
}

/// Split off `n - 1` leading tab-separated fields; the remainder (which may
/// itself contain tabs when quoted) is the final field.
pub fn split_fields(line: &str, n: usize) -> Vec<&str> {
    line.splitn(n, '\t').collect()
}

/// Maps the `-` placeholder to an empty string.
pub fn optional(field: &str) -> &str {
    if field == MISSING {
        ""
    } else {
        field
    }
}

/// Inverse of [`optional`] for writing.
pub fn or_missing(field: &str) -> &str {
    if field.is_empty() {
        MISSING
    } else {
        field
    }
}

/// A table file: one header line followed by data rows.
pub struct TableWriter {
    out: BufWriter<File>,
    rows: u64,
}

impl TableWriter {
    pub fn create(path: &Path, header: &[&str]) -> io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join("\t"))?;
        Ok(TableWriter { out, rows: 0 })
    }

    pub fn row(&mut self, fields: &[&str]) -> io::Result<()> {
        self.rows += 1;
        writeln!(self.out, "{}", fields.join("\t"))
    }

    pub fn finish(mut self) -> io::Result<u64> {
        self.out.flush()?;
        Ok(self.rows)
    }
}

/// Reads a table written by [`TableWriter`], returning the header and
/// the raw data lines.
pub fn read_table(path: &Path) -> io::Result<(Vec<String>, Vec<String>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line?.split('\t').map(str::to_string).collect(),
        None => Vec::new(),
    };
    let rows = lines.collect::<io::Result<Vec<_>>>()?;
    Ok((header, rows))
}

/// Number of data rows in a table file (lines minus the header).
pub fn count_rows(path: &Path) -> io::Result<u64> {
    let reader = BufReader::new(File::open(path)?);
    let mut n = 0u64;
    for line in reader.lines() {
        line?;
        n += 1;
    }
    Ok(n.saturating_sub(1))
}
