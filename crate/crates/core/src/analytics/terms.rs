use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use super::fit::{fit_log_log, FitError, FitResult};
use crate::templating::{is_keyword, simplify_template, SqlTemplate, PLACEHOLDERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermClass {
    Keyword,
    Table,
    Column,
    Function,
    Placeholder,
    Other,
}

impl TermClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TermClass::Keyword => "keyword",
            TermClass::Table => "table",
            TermClass::Column => "column",
            TermClass::Function => "function",
            TermClass::Placeholder => "placeholder",
            TermClass::Other => "other",
        }
    }
}

impl fmt::Display for TermClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("schema line {line}: {reason}")]
pub struct SchemaError {
    pub line: u64,
    pub reason: String,
}

/// Table, column and function names of the queried database.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    pub tables: BTreeSet<String>,
    pub columns: BTreeSet<String>,
    pub functions: BTreeSet<String>,
}

impl Schema {
    /// Parses `kind \t name` lines where kind is `table`, `column` or
    /// `function`. Names are matched case-insensitively.
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let mut schema = Schema::default();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |reason: String| SchemaError {
                line: i as u64 + 1,
                reason,
            };
            let (kind, name) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `kind\\tname`".into()))?;
            let name = name.trim().to_lowercase();
            if name.is_empty() {
                return Err(err("empty name".into()));
            }
            match kind.trim() {
                "table" => schema.tables.insert(name),
                "column" => schema.columns.insert(name),
                "function" => schema.functions.insert(name),
                other => return Err(err(format!("unknown kind `{}`", other))),
            };
        }
        Ok(schema)
    }

    /// Class of a simplified token. Placeholders and keywords are fixed;
    /// names are looked up in the schema, tables before functions before
    /// columns.
    pub fn classify(&self, token: &str) -> TermClass {
        if PLACEHOLDERS.contains(&token) {
            return TermClass::Placeholder;
        }
        if is_keyword(token) || (token.contains('_') && token.split('_').all(is_keyword)) {
            return TermClass::Keyword;
        }
        let lower = token.to_lowercase();
        if self.tables.contains(&lower) {
            TermClass::Table
        } else if self.functions.contains(&lower) {
            TermClass::Function
        } else if self.columns.contains(&lower) {
            TermClass::Column
        } else {
            TermClass::Other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermWeight {
    /// Each template's tokens count once.
    PerTemplate,
    /// Each template's tokens count once per query instance.
    PerQuery,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermRow {
    pub token: String,
    pub class: TermClass,
    pub count: u64,
    /// 1-based; by descending count, ties broken lexicographically.
    pub rank: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermFrequencyTable {
    pub rows: Vec<TermRow>,
}

impl TermFrequencyTable {
    pub fn top(&self, n: usize) -> &[TermRow] {
        &self.rows[..n.min(self.rows.len())]
    }

    /// Rows of one class, keeping their global rank.
    pub fn of_class(&self, class: TermClass) -> impl Iterator<Item = &TermRow> {
        self.rows.iter().filter(move |r| r.class == class)
    }

    /// Log-log fit of count against rank over the first `max_rank` rows.
    pub fn rank_frequency_fit(&self, max_rank: usize) -> Result<FitResult, FitError> {
        let pairs: Vec<(f64, f64)> = self
            .top(max_rank)
            .iter()
            .map(|r| (r.rank as f64, r.count as f64))
            .collect();
        fit_log_log(&pairs)
    }
}

/// Builds a ranked table from raw token counts.
pub fn rank_counts(counts: HashMap<String, u64>, schema: &Schema) -> TermFrequencyTable {
    let mut rows: Vec<(String, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    TermFrequencyTable {
        rows: rows
            .into_iter()
            .enumerate()
            .map(|(i, (token, count))| TermRow {
                class: schema.classify(&token),
                token,
                count,
                rank: i as u64 + 1,
            })
            .collect(),
    }
}

/// Token frequencies over the simplified templates.
pub fn term_frequency(templates: &[SqlTemplate], weight: TermWeight, schema: &Schema) -> TermFrequencyTable {
    let counts = templates
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<String, u64>, t| {
            let w = match weight {
                TermWeight::PerTemplate => 1,
                TermWeight::PerQuery => t.count,
            };
            for tok in simplify_template(&t.template_text).tokens {
                *acc.entry(tok).or_insert(0) += w;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    rank_counts(counts, schema)
}

/// Schema names that never occur in the table, per kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Unmentioned {
    pub tables: Vec<String>,
    pub columns: Vec<String>,
    pub functions: Vec<String>,
}

pub fn unmentioned(schema: &Schema, table: &TermFrequencyTable) -> Unmentioned {
    let seen: BTreeSet<String> = table.rows.iter().map(|r| r.token.to_lowercase()).collect();
    let missing = |set: &BTreeSet<String>| set.difference(&seen).cloned().collect::<Vec<_>>();
    Unmentioned {
        tables: missing(&schema.tables),
        columns: missing(&schema.columns),
        functions: missing(&schema.functions),
    }
}
