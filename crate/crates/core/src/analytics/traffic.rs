use std::collections::BTreeMap;

use crate::ingest::{uri_suffix, HttpHit, SqlRequest};
use crate::templating::extract_stem;

/// Key assigned to SQL requests under a URL-based grouping.
pub const SQL_KEY: &str = "(sql)";
/// Key assigned to hits when grouping by source tag.
pub const WEB_KEY: &str = "(web)";
/// Key for URLs with no extension under the suffix grouping.
pub const NO_SUFFIX_KEY: &str = "(none)";
/// Key for files at the site root under the tree grouping.
pub const ROOT_KEY: &str = "/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupKey {
    Month,
    Verb,
    Suffix,
    Tree,
    Language,
    SourceTag,
}

impl GroupKey {
    pub const ALL: [GroupKey; 6] = [
        GroupKey::Month,
        GroupKey::Verb,
        GroupKey::Suffix,
        GroupKey::Tree,
        GroupKey::Language,
        GroupKey::SourceTag,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::Month => "month",
            GroupKey::Verb => "verb",
            GroupKey::Suffix => "suffix",
            GroupKey::Tree => "tree",
            GroupKey::Language => "language",
            GroupKey::SourceTag => "source_tag",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Path prefixes of the language sub-sites, e.g. `/en/ -> en`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageMap {
    prefixes: Vec<(String, String)>,
}

impl Default for LanguageMap {
    fn default() -> Self {
        Self::parse("en=/en/,de=/de/,hu=/hu/,jp=/jp/,pt=/pt/,sp=/sp/").expect("default language map")
    }
}

impl LanguageMap {
    /// Parses `name=/prefix/` pairs separated by commas.
    pub fn parse(text: &str) -> Option<Self> {
        let mut prefixes = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, prefix) = part.split_once('=')?;
            let (name, prefix) = (name.trim(), prefix.trim());
            if name.is_empty() || !prefix.starts_with('/') {
                return None;
            }
            prefixes.push((prefix.to_ascii_lowercase(), name.to_string()));
        }
        // longest prefix wins
        prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Some(LanguageMap { prefixes })
    }

    pub fn to_text(&self) -> String {
        let mut pairs: Vec<String> = self.prefixes.iter().map(|(p, n)| format!("{}={}", n, p)).collect();
        pairs.sort();
        pairs.join(",")
    }

    fn matching(&self, uri_stem: &str) -> Option<&(String, String)> {
        let lower = uri_stem.to_ascii_lowercase();
        self.prefixes.iter().find(|(p, _)| lower.starts_with(p.as_str()))
    }

    /// Language name, or `other` when no prefix matches.
    pub fn language(&self, uri_stem: &str) -> String {
        self.matching(uri_stem)
            .map_or_else(|| "other".to_string(), |(_, n)| n.clone())
    }

    /// The stem with any language prefix removed (keeping a leading `/`).
    pub fn strip<'a>(&self, uri_stem: &'a str) -> &'a str {
        match self.matching(uri_stem) {
            Some((p, _)) => &uri_stem[p.len() - 1..],
            None => uri_stem,
        }
    }
}

/// Site tree of a URL: the first directory after any language prefix.
/// Files directly under the root (or the language root) map to `/`.
pub fn site_tree(uri_stem: &str, languages: &LanguageMap) -> String {
    let path = languages.strip(uri_stem);
    let segments: Vec<&str> = path.split('/').filter(|s| !s.is_empty()).collect();
    if segments.len() >= 2 || (segments.len() == 1 && path.ends_with('/')) {
        segments[0].to_string()
    } else {
        ROOT_KEY.to_string()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficRow {
    pub key: String,
    pub hits: u64,
    pub page_views: u64,
    pub sql_count: u64,
}

fn hit_key(hit: &HttpHit, key: GroupKey, languages: &LanguageMap) -> String {
    match key {
        GroupKey::Month => hit.timestamp.month_key(),
        GroupKey::Verb => extract_stem(&hit.uri_stem).1,
        GroupKey::Suffix => {
            let s = uri_suffix(&hit.uri_stem);
            if s.is_empty() {
                NO_SUFFIX_KEY.to_string()
            } else {
                s
            }
        }
        GroupKey::Tree => site_tree(&hit.uri_stem, languages),
        GroupKey::Language => languages.language(&hit.uri_stem),
        GroupKey::SourceTag => WEB_KEY.to_string(),
    }
}

fn query_key(q: &SqlRequest, key: GroupKey) -> String {
    match key {
        GroupKey::Month => q.timestamp.month_key(),
        GroupKey::SourceTag if !q.source_tag.is_empty() => q.source_tag.clone(),
        GroupKey::SourceTag => "-".to_string(),
        _ => SQL_KEY.to_string(),
    }
}

/// Hit, page-view and SQL counts per group, ordered by key. Every record
/// lands in exactly one group, so the columns sum to the corpus totals.
pub fn traffic_report<'a, H, Q>(
    hits: H,
    queries: Q,
    key: GroupKey,
    languages: &LanguageMap,
) -> Vec<TrafficRow>
where
    H: IntoIterator<Item = &'a HttpHit>,
    Q: IntoIterator<Item = &'a SqlRequest>,
{
    let mut groups: BTreeMap<String, TrafficRow> = BTreeMap::new();
    for hit in hits {
        let k = hit_key(hit, key, languages);
        let row = groups.entry(k).or_default();
        row.hits += 1;
        row.page_views += u64::from(hit.is_page_view);
    }
    for q in queries {
        let k = query_key(q, key);
        groups.entry(k).or_default().sql_count += 1;
    }
    groups
        .into_iter()
        .map(|(key, mut row)| {
            row.key = key;
            row
        })
        .collect()
}
