use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::net::IpAddr;

use ipnet::IpNet;
use thiserror::Error;

use crate::ingest::{HttpHit, SqlRequest};

pub const UNKNOWN_ORG: &str = "Unknown";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstitutionCategory {
    University,
    College,
    School,
    OtherEdu,
    Gov,
    Other,
    Unknown,
}

impl InstitutionCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            InstitutionCategory::University => "University",
            InstitutionCategory::College => "College",
            InstitutionCategory::School => "School",
            InstitutionCategory::OtherEdu => "Other .edu",
            InstitutionCategory::Gov => ".gov",
            InstitutionCategory::Other => "Other",
            InstitutionCategory::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for InstitutionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Categorizes an organization by keywords in its name; the optional
/// domain supplies the `.edu`/`.gov` fallbacks.
pub fn categorize(organization: &str, domain: Option<&str>) -> InstitutionCategory {
    let name = organization.to_lowercase();
    if name.contains("university") {
        return InstitutionCategory::University;
    }
    if name.contains("college") {
        return InstitutionCategory::College;
    }
    if name.contains("school") || name.contains("district") {
        return InstitutionCategory::School;
    }
    let domain = domain.unwrap_or("").trim().to_ascii_lowercase();
    let domain = domain.trim_end_matches('.');
    if domain.ends_with(".edu") || domain == "edu" {
        InstitutionCategory::OtherEdu
    } else if domain.ends_with(".gov") || domain == "gov" {
        InstitutionCategory::Gov
    } else {
        InstitutionCategory::Other
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("ip map line {line}: {reason}")]
pub struct IpMapError {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct IpMapEntry {
    net: IpNet,
    organization: String,
    domain: Option<String>,
}

/// CIDR prefix to organization table with longest-prefix lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IpMap {
    entries: Vec<IpMapEntry>,
}

impl IpMap {
    /// Parses `cidr \t organization [\t domain]` lines; blank lines and
    /// `#` comments are skipped. A bare address is a host route.
    pub fn parse(text: &str) -> Result<Self, IpMapError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i as u64 + 1;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !(2..=3).contains(&fields.len()) || fields[1].trim().is_empty() {
                return Err(IpMapError {
                    line: line_no,
                    reason: "expected `cidr\\torganization[\\tdomain]`".into(),
                });
            }
            let cidr = fields[0].trim();
            let net = cidr
                .parse::<IpNet>()
                .or_else(|_| cidr.parse::<IpAddr>().map(IpNet::from))
                .map_err(|_| IpMapError {
                    line: line_no,
                    reason: format!("malformed CIDR `{}`", cidr),
                })?;
            entries.push(IpMapEntry {
                net: net.trunc(),
                organization: fields[1].trim().to_string(),
                domain: fields.get(2).map(|d| d.trim().to_string()).filter(|d| !d.is_empty()),
            });
        }
        Ok(IpMap { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup_entry(&self, ip: IpAddr) -> Option<&IpMapEntry> {
        let mut best: Option<&IpMapEntry> = None;
        for e in &self.entries {
            if e.net.contains(&ip) && best.is_none_or(|b| e.net.prefix_len() > b.net.prefix_len()) {
                best = Some(e);
            }
        }
        best
    }

    /// Organization owning `ip`, or `Unknown`.
    pub fn organization(&self, ip: IpAddr) -> &str {
        self.lookup_entry(ip).map_or(UNKNOWN_ORG, |e| e.organization.as_str())
    }

    pub fn category(&self, ip: IpAddr) -> InstitutionCategory {
        match self.lookup_entry(ip) {
            Some(e) => categorize(&e.organization, e.domain.as_deref()),
            None => InstitutionCategory::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstitutionRow {
    pub organization: String,
    pub page_views: u64,
    pub sql_count: u64,
    pub category: InstitutionCategory,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryRow {
    pub category: InstitutionCategory,
    pub institutions: u64,
    pub page_views: u64,
    pub sql_count: u64,
}

/// Page views and SQL requests per organization, busiest first.
pub fn traffic_by_institution<'a, H, Q>(hits: H, queries: Q, map: &IpMap) -> Vec<InstitutionRow>
where
    H: IntoIterator<Item = &'a HttpHit>,
    Q: IntoIterator<Item = &'a SqlRequest>,
{
    let mut cache: HashMap<IpAddr, (String, InstitutionCategory)> = HashMap::new();
    let mut resolve = |ip: IpAddr| {
        cache
            .entry(ip)
            .or_insert_with(|| (map.organization(ip).to_string(), map.category(ip)))
            .clone()
    };
    let mut rows: BTreeMap<String, InstitutionRow> = BTreeMap::new();
    let mut bump = |ip: IpAddr, pv: u64, sql: u64| {
        let (org, category) = resolve(ip);
        let row = rows.entry(org.clone()).or_insert(InstitutionRow {
            organization: org,
            page_views: 0,
            sql_count: 0,
            category,
        });
        row.page_views += pv;
        row.sql_count += sql;
    };
    for h in hits.into_iter().filter(|h| h.is_page_view) {
        bump(h.client_ip, 1, 0);
    }
    for q in queries {
        bump(q.client_ip, 0, 1);
    }
    let mut out: Vec<InstitutionRow> = rows.into_values().collect();
    out.sort_by(|a, b| {
        (b.page_views + b.sql_count)
            .cmp(&(a.page_views + a.sql_count))
            .then_with(|| a.organization.cmp(&b.organization))
    });
    out
}

/// Rolls organization rows up by category.
pub fn by_category(rows: &[InstitutionRow]) -> Vec<CategoryRow> {
    let mut acc: BTreeMap<InstitutionCategory, CategoryRow> = BTreeMap::new();
    for r in rows {
        let c = acc.entry(r.category).or_insert(CategoryRow {
            category: r.category,
            institutions: 0,
            page_views: 0,
            sql_count: 0,
        });
        c.institutions += 1;
        c.page_views += r.page_views;
        c.sql_count += r.sql_count;
    }
    acc.into_values().collect()
}
