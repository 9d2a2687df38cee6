//! Report files: tab-separated tables with headers, `(x, y)` plot data
//! for the log-log figures, and a text block of model fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::analytics::{
    by_category, fit_exponential_growth, fit_power_law, moving_average, traffic_by_institution,
    traffic_report, unmentioned, BucketedHistogram, FitError, FitResult, GroupKey, IpMap,
    LanguageMap, Schema, TermFrequencyTable, TermWeight,
};
use crate::classifier::{is_mortal_query_session, ClassifierParams};
use crate::ingest::{HttpHit, SqlRequest, Timestamp};
use crate::sessionizer::{session_size_histograms, sort_events, think_time_histogram, Event, EventKind, Session};
use crate::templating::SqlTemplate;
use crate::tsv::TableWriter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportKind {
    Traffic,
    Sessions,
    Terms,
    Fits,
    Institutions,
}

impl ReportKind {
    pub const ALL: [ReportKind; 5] = [
        ReportKind::Traffic,
        ReportKind::Sessions,
        ReportKind::Terms,
        ReportKind::Fits,
        ReportKind::Institutions,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Traffic => "traffic",
            ReportKind::Sessions => "sessions",
            ReportKind::Terms => "terms",
            ReportKind::Fits => "fits",
            ReportKind::Institutions => "institutions",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// A written report file and its data row count.
pub type Written = (String, u64);

fn table(dir: &Path, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<Written> {
    let mut w = TableWriter::create(&dir.join(name), header)?;
    for r in rows {
        w.row(&r.iter().map(String::as_str).collect::<Vec<_>>())?;
    }
    Ok((name.to_string(), w.finish()?))
}

fn histogram_plot(dir: &Path, name: &str, h: &BucketedHistogram) -> io::Result<Written> {
    table(
        dir,
        name,
        &["bucket", "count"],
        h.iter().map(|(k, c)| vec![k.to_string(), c.to_string()]),
    )
}

/// One traffic table per grouping key. The month table also carries
/// centered moving averages over `smooth` months.
pub fn write_traffic(
    dir: &Path,
    hits: &[HttpHit],
    queries: &[SqlRequest],
    languages: &LanguageMap,
    smooth: usize,
) -> io::Result<Vec<Written>> {
    let mut out = Vec::new();
    for key in GroupKey::ALL {
        let rows = traffic_report(hits, queries, key, languages);
        let name = format!("traffic_{}.tsv", key.as_str());
        if key == GroupKey::Month {
            let series = |f: fn(&crate::analytics::TrafficRow) -> u64| {
                moving_average(&rows.iter().map(|r| f(r) as f64).collect::<Vec<_>>(), smooth)
            };
            let (h, p, s) = (series(|r| r.hits), series(|r| r.page_views), series(|r| r.sql_count));
            out.push(table(
                dir,
                &name,
                &["month", "hits", "page_views", "sql_count", "hits_smoothed", "page_views_smoothed", "sql_smoothed"],
                rows.iter().enumerate().map(|(i, r)| {
                    vec![
                        r.key.clone(),
                        r.hits.to_string(),
                        r.page_views.to_string(),
                        r.sql_count.to_string(),
                        format!("{:.3}", h[i]),
                        format!("{:.3}", p[i]),
                        format!("{:.3}", s[i]),
                    ]
                }),
            )?);
        } else {
            out.push(table(
                dir,
                &name,
                &[key.as_str(), "hits", "page_views", "sql_count"],
                rows.iter().map(|r| {
                    vec![r.key.clone(), r.hits.to_string(), r.page_views.to_string(), r.sql_count.to_string()]
                }),
            )?);
        }
    }
    Ok(out)
}

/// Per-session rows with labels, label counts, and the repetitive
/// web-only sessions that no rule labels as bots.
pub fn write_sessions(dir: &Path, sessions: &[Session], params: &ClassifierParams) -> io::Result<Vec<Written>> {
    let mut header: Vec<&str> = crate::workspace::session_header().to_vec();
    header.extend(["classification", "mortal_query"]);
    let row = |s: &Session| {
        let mut r = crate::workspace::session_fields(s).to_vec();
        r.push(s.classification.as_str().to_string());
        r.push(u8::from(is_mortal_query_session(s)).to_string());
        r
    };
    let mut out = vec![table(dir, "sessions.tsv", &header, sessions.iter().map(row))?];

    let mut counts: BTreeMap<_, (u64, u64, u64)> = BTreeMap::new();
    for s in sessions {
        let c = counts.entry(s.classification).or_default();
        c.0 += 1;
        c.1 += s.page_views;
        c.2 += s.sql_count;
    }
    out.push(table(
        dir,
        "session_labels.tsv",
        &["classification", "sessions", "page_views", "sql_count"],
        counts
            .iter()
            .map(|(k, c)| vec![k.as_str().to_string(), c.0.to_string(), c.1.to_string(), c.2.to_string()]),
    )?);

    let mut repetitive: Vec<&Session> = sessions
        .iter()
        .filter(|s| s.sql_count == 0 && s.page_views >= params.min_events && s.diversity >= params.reuse_threshold)
        .collect();
    repetitive.sort_by(|a, b| b.diversity.total_cmp(&a.diversity).then(a.session_id.cmp(&b.session_id)));
    out.push(table(dir, "repetitive_web_sessions.tsv", &header, repetitive.into_iter().map(row))?);
    Ok(out)
}

/// Term frequency tables under both weightings, the rank plot data and
/// the schema names never mentioned.
pub fn write_terms(dir: &Path, per_template: &TermFrequencyTable, per_query: &TermFrequencyTable, schema: &Schema) -> io::Result<Vec<Written>> {
    let rows = |t: &TermFrequencyTable| {
        t.rows
            .iter()
            .map(|r| vec![r.rank.to_string(), r.token.clone(), r.class.as_str().to_string(), r.count.to_string()])
            .collect::<Vec<_>>()
    };
    let header = ["rank", "token", "class", "count"];
    let mut out = vec![
        table(dir, "terms_per_template.tsv", &header, rows(per_template))?,
        table(dir, "terms_per_query.tsv", &header, rows(per_query))?,
        table(
            dir,
            "term_rank.plot.tsv",
            &["rank", "count"],
            per_query.rows.iter().map(|r| vec![r.rank.to_string(), r.count.to_string()]),
        )?,
    ];
    let u = unmentioned(schema, per_template);
    let listed = [("table", &u.tables), ("column", &u.columns), ("function", &u.functions)];
    out.push(table(
        dir,
        "unmentioned_schema.tsv",
        &["kind", "name"],
        listed
            .iter()
            .flat_map(|(kind, names)| names.iter().map(move |n| vec![kind.to_string(), n.clone()])),
    )?);
    Ok(out)
}

/// A named fit in the fits report.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFit {
    pub name: &'static str,
    pub source: &'static str,
    pub growth: bool,
    pub result: Result<FitResult, FitError>,
}

/// Think times between page views of one address, across session
/// boundaries.
pub fn page_view_think_times(hits: &[HttpHit]) -> BucketedHistogram {
    let mut events: Vec<Event> = hits
        .iter()
        .filter(|h| h.is_page_view)
        .map(|h| Event {
            client_ip: h.client_ip,
            timestamp: h.timestamp,
            kind: EventKind::Web,
            record_id: h.hit_id,
            fingerprint_id: 0,
        })
        .collect();
    sort_events(&mut events);
    think_time_histogram(&events)
}

fn monthly<'a>(stamps: impl Iterator<Item = Timestamp> + 'a) -> BTreeMap<i64, u64> {
    let mut m = BTreeMap::new();
    for t in stamps {
        *m.entry(t.month_index()).or_insert(0) += 1;
    }
    m
}

/// Inputs of the fits report.
pub struct FitInputs<'a> {
    pub hits: &'a [HttpHit],
    pub queries: &'a [SqlRequest],
    pub sessions: &'a [Session],
    pub terms: &'a TermFrequencyTable,
    pub think_fit: (i32, i32),
    pub size_fit: (i32, i32),
    pub duration_fit: (i32, i32),
}

/// `(month index, hits, page views, SQL requests)`.
pub type MonthlyRow = (i64, u64, u64, u64);

/// Fits, the histograms behind them, and the monthly counts.
pub type FitData = (Vec<NamedFit>, Vec<(&'static str, BucketedHistogram)>, Vec<MonthlyRow>);

pub fn compute_fits(inputs: &FitInputs<'_>) -> FitData {
    let think = page_view_think_times(inputs.hits);
    let (requests, durations) = session_size_histograms(inputs.sessions);
    let hits = monthly(inputs.hits.iter().map(|h| h.timestamp));
    let views = monthly(inputs.hits.iter().filter(|h| h.is_page_view).map(|h| h.timestamp));
    let sql = monthly(inputs.queries.iter().map(|q| q.timestamp));
    let series = |m: &BTreeMap<i64, u64>| m.iter().map(|(&k, &v)| (k, v)).collect::<Vec<_>>();

    let fits = vec![
        NamedFit {
            name: "think_time",
            source: "page-view inter-arrival seconds per address, log2 buckets",
            growth: false,
            result: fit_power_law(&think, inputs.think_fit.0, inputs.think_fit.1),
        },
        NamedFit {
            name: "session_requests",
            source: "requests per session, log2 buckets",
            growth: false,
            result: fit_power_law(&requests, inputs.size_fit.0, inputs.size_fit.1),
        },
        NamedFit {
            name: "session_duration",
            source: "session duration seconds, log2 buckets",
            growth: false,
            result: fit_power_law(&durations, inputs.duration_fit.0, inputs.duration_fit.1),
        },
        NamedFit {
            name: "monthly_hits",
            source: "hits per UTC month, ln counts",
            growth: true,
            result: fit_exponential_growth(&series(&hits)),
        },
        NamedFit {
            name: "monthly_page_views",
            source: "page views per UTC month, ln counts",
            growth: true,
            result: fit_exponential_growth(&series(&views)),
        },
        NamedFit {
            name: "monthly_sql",
            source: "SQL requests per UTC month, ln counts",
            growth: true,
            result: fit_exponential_growth(&series(&sql)),
        },
        NamedFit {
            name: "term_rank",
            source: "per-query token count against rank, log2-log2",
            growth: false,
            result: inputs.terms.rank_frequency_fit(usize::MAX),
        },
    ];
    let mut months: BTreeMap<i64, (u64, u64, u64)> = BTreeMap::new();
    for (m, c) in &hits {
        months.entry(*m).or_default().0 = *c;
    }
    for (m, c) in &views {
        months.entry(*m).or_default().1 = *c;
    }
    for (m, c) in &sql {
        months.entry(*m).or_default().2 = *c;
    }
    let months = months.into_iter().map(|(m, (a, b, c))| (m, a, b, c)).collect();
    let histograms = vec![
        ("think_time", think),
        ("session_requests", requests),
        ("session_duration", durations),
    ];
    (fits, histograms, months)
}

/// The structured text block for a list of fits.
pub fn render_fits(fits: &[NamedFit]) -> String {
    let mut out = String::new();
    for f in fits {
        let _ = writeln!(out, "[{}]", f.name);
        let _ = writeln!(out, "source = {}", f.source);
        match &f.result {
            Ok(r) => {
                let _ = writeln!(out, "range = {}..{}", r.fit_range.0, r.fit_range.1);
                let _ = writeln!(out, "points = {}", r.n_points);
                let _ = writeln!(out, "slope = {:.6}", r.slope);
                let _ = writeln!(out, "intercept = {:.6}", r.intercept);
                if f.growth {
                    let _ = writeln!(out, "yearly_multiplier = {:.6}", r.yearly_multiplier());
                    let _ = writeln!(out, "note = multiplier is exp(12 * slope per month)");
                } else {
                    let _ = writeln!(out, "implied_alpha = {:.6}", r.implied_alpha());
                    let _ = writeln!(out, "note = bucket slope is -(alpha - 1) for density exponent alpha");
                }
                let _ = writeln!(out, "r_squared = {:.6}", r.r_squared);
            }
            Err(e) => {
                let _ = writeln!(out, "error = {}", e);
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_fits(dir: &Path, inputs: &FitInputs<'_>) -> io::Result<Vec<Written>> {
    let (fits, histograms, months) = compute_fits(inputs);
    fs::write(dir.join("fits.txt"), render_fits(&fits))?;
    let mut out = vec![("fits.txt".to_string(), fits.len() as u64)];
    for (name, h) in &histograms {
        out.push(histogram_plot(dir, &format!("{}.plot.tsv", name), h)?);
    }
    out.push(table(
        dir,
        "monthly.plot.tsv",
        &["month_index", "hits", "page_views", "sql_count"],
        months
            .iter()
            .map(|(m, a, b, c)| vec![m.to_string(), a.to_string(), b.to_string(), c.to_string()]),
    )?);
    Ok(out)
}

pub fn write_institutions(dir: &Path, hits: &[HttpHit], queries: &[SqlRequest], map: &IpMap) -> io::Result<Vec<Written>> {
    let rows = traffic_by_institution(hits, queries, map);
    let categories = by_category(&rows);
    Ok(vec![
        table(
            dir,
            "institutions.tsv",
            &["organization", "page_views", "sql_count", "category"],
            rows.iter().map(|r| {
                vec![
                    r.organization.clone(),
                    r.page_views.to_string(),
                    r.sql_count.to_string(),
                    r.category.as_str().to_string(),
                ]
            }),
        )?,
        table(
            dir,
            "institution_categories.tsv",
            &["category", "institutions", "page_views", "sql_count"],
            categories.iter().map(|c| {
                vec![
                    c.category.as_str().to_string(),
                    c.institutions.to_string(),
                    c.page_views.to_string(),
                    c.sql_count.to_string(),
                ]
            }),
        )?,
    ])
}

/// Per-query weighted terms for templates, as used by the term reports.
pub fn term_tables(templates: &[SqlTemplate], schema: &Schema) -> (TermFrequencyTable, TermFrequencyTable) {
    (
        crate::analytics::term_frequency(templates, TermWeight::PerTemplate, schema),
        crate::analytics::term_frequency(templates, TermWeight::PerQuery, schema),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::FitResult;

    #[test]
    fn fits_block() {
        let fits = [
            NamedFit {
                name: "x",
                source: "test",
                growth: false,
                result: Ok(FitResult {
                    slope: -1.0,
                    intercept: 6.0,
                    r_squared: 1.0,
                    n_points: 4,
                    fit_range: (0, 3),
                }),
            },
            NamedFit {
                name: "y",
                source: "test",
                growth: true,
                result: Err(FitError::TooFewPoints(1)),
            },
        ];
        let text = render_fits(&fits);
        assert!(text.contains("[x]\nsource = test\nrange = 0..3\npoints = 4\nslope = -1.000000\n"));
        assert!(text.contains("implied_alpha = 2.000000"));
        assert!(text.contains("[y]\nsource = test\nerror = need at least 2 usable points, found 1\n"));
    }

    #[test]
    fn kinds() {
        for k in ReportKind::ALL {
            assert_eq!(ReportKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(ReportKind::parse("charts"), None);
    }
}
