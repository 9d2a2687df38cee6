//! Per-IP sessions split at think-time gaps, with per-session statistics.

use std::collections::HashSet;
use std::fmt;
use std::net::IpAddr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analytics::BucketedHistogram;
use crate::ingest::{HttpHit, SqlRequest, Timestamp};
use crate::templating::Corpora;

/// Default think-time cutoff: gaps longer than 30 minutes split sessions.
pub const DEFAULT_GAP_S: i64 = 1800;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    Web,
    Sql,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Web => "web",
            EventKind::Sql => "sql",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "web" => Some(EventKind::Web),
            "sql" => Some(EventKind::Sql),
            _ => None,
        }
    }
}

/// A page view or SQL request as seen by the sessionizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub client_ip: IpAddr,
    pub timestamp: Timestamp,
    pub kind: EventKind,
    /// `hit_id` or `query_id`.
    pub record_id: u64,
    /// `stem_id` or `template_id`.
    pub fingerprint_id: u64,
}

impl Event {
    /// Order of events within one IP's timeline.
    pub fn order_key(&self) -> (Timestamp, EventKind, u64) {
        (self.timestamp, self.kind, self.record_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Classification {
    #[default]
    Unclassified,
    Admin,
    Spider,
    Bot,
    Mortal,
    Other,
}

impl Classification {
    pub const ALL: [Classification; 6] = [
        Classification::Unclassified,
        Classification::Admin,
        Classification::Spider,
        Classification::Bot,
        Classification::Mortal,
        Classification::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Unclassified => "unclassified",
            Classification::Admin => "admin",
            Classification::Spider => "spider",
            Classification::Bot => "bot",
            Classification::Mortal => "mortal",
            Classification::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub session_id: u64,
    pub client_ip: IpAddr,
    pub start_ts: Timestamp,
    pub end_ts: Timestamp,
    pub page_views: u64,
    pub sql_count: u64,
    pub distinct_stems: u64,
    pub distinct_templates: u64,
    /// Requests per distinct fingerprint (stems plus templates).
    pub diversity: f64,
    pub duration_s: i64,
    pub classification: Classification,
}

impl Session {
    pub fn requests(&self) -> u64 {
        self.page_views + self.sql_count
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionEntry {
    pub session_id: u64,
    /// 1-based position within the session.
    pub rank_in_session: u32,
    pub kind: EventKind,
    pub record_id: u64,
    pub fingerprint_id: u64,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionTables {
    /// Ordered by `session_id`.
    pub sessions: Vec<Session>,
    /// Ordered by `(session_id, rank_in_session)`.
    pub entries: Vec<SessionEntry>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("events for {ip} are not time-ordered at record {record_id}")]
    Unsorted { ip: IpAddr, record_id: u64 },
    #[error("gap must be non-negative, got {0}")]
    NegativeGap(i64),
}

/// Page-view hits and all SQL requests as sessionizer events, sorted by
/// IP and then by `(timestamp, kind, record_id)`. Hits that are not page
/// views never take part in sessions.
pub fn collect_events(hits: &[HttpHit], queries: &[SqlRequest], corpora: &Corpora) -> Vec<Event> {
    debug_assert_eq!(hits.len(), corpora.hit_stems.len());
    debug_assert_eq!(queries.len(), corpora.query_templates.len());
    let mut events: Vec<Event> = hits
        .iter()
        .zip(&corpora.hit_stems)
        .filter(|(h, _)| h.is_page_view)
        .map(|(h, &(_, stem_id))| Event {
            client_ip: h.client_ip,
            timestamp: h.timestamp,
            kind: EventKind::Web,
            record_id: h.hit_id,
            fingerprint_id: stem_id,
        })
        .chain(queries.iter().zip(&corpora.query_templates).map(|(q, &(_, tid))| Event {
            client_ip: q.client_ip,
            timestamp: q.timestamp,
            kind: EventKind::Sql,
            record_id: q.query_id,
            fingerprint_id: tid,
        }))
        .collect();
    sort_events(&mut events);
    events
}

/// Sorts events into per-IP timelines.
pub fn sort_events(events: &mut [Event]) {
    events.par_sort_unstable_by_key(|e| (e.client_ip, e.order_key()));
}

/// Splits events into contiguous per-IP groups, keeping each IP's events in
/// their input order.
fn group_by_ip(events: &[Event]) -> Vec<Vec<Event>> {
    let mut idx: Vec<usize> = (0..events.len()).collect();
    idx.sort_by_key(|&i| events[i].client_ip);
    let mut groups: Vec<Vec<Event>> = Vec::new();
    for i in idx {
        match groups.last_mut() {
            Some(g) if g[0].client_ip == events[i].client_ip => g.push(events[i]),
            _ => groups.push(vec![events[i]]),
        }
    }
    groups
}

fn check_sorted(events: &[Event]) -> Result<(), SessionError> {
    for w in events.windows(2) {
        if w[1].order_key() <= w[0].order_key() {
            return Err(SessionError::Unsorted {
                ip: w[1].client_ip,
                record_id: w[1].record_id,
            });
        }
    }
    Ok(())
}

fn summarize(events: &[Event]) -> Session {
    let mut stems = HashSet::new();
    let mut templates = HashSet::new();
    let (mut page_views, mut sql_count) = (0u64, 0u64);
    for e in events {
        match e.kind {
            EventKind::Web => {
                page_views += 1;
                stems.insert(e.fingerprint_id);
            }
            EventKind::Sql => {
                sql_count += 1;
                templates.insert(e.fingerprint_id);
            }
        }
    }
    let first = events[0].timestamp;
    let last = events[events.len() - 1].timestamp;
    let distinct = (stems.len() + templates.len()) as f64;
    Session {
        session_id: 0,
        client_ip: events[0].client_ip,
        start_ts: first,
        end_ts: last,
        page_views,
        sql_count,
        distinct_stems: stems.len() as u64,
        distinct_templates: templates.len() as u64,
        diversity: (page_views + sql_count) as f64 / distinct,
        duration_s: last.secs() - first.secs(),
        classification: Classification::Unclassified,
    }
}

/// Splits each IP's timeline wherever consecutive events are more than
/// `gap_s` seconds apart. A gap of exactly `gap_s` keeps the session.
///
/// Events of different IPs may be interleaved, but each IP's events must
/// already be in `(timestamp, kind, record_id)` order. Session ids are
/// assigned in `(start time, IP)` order, so the result is the same however
/// the per-IP work is scheduled.
pub fn build_sessions(events: &[Event], gap_s: i64) -> Result<SessionTables, SessionError> {
    if gap_s < 0 {
        return Err(SessionError::NegativeGap(gap_s));
    }
    let groups = group_by_ip(events);
    let per_ip: Vec<Vec<(Session, Vec<Event>)>> = groups
        .par_iter()
        .map(|group| {
            check_sorted(group)?;
            let mut out = Vec::new();
            let mut start = 0;
            for i in 1..=group.len() {
                let split = i == group.len()
                    || group[i].timestamp.secs() - group[i - 1].timestamp.secs() > gap_s;
                if split {
                    let run = &group[start..i];
                    out.push((summarize(run), run.to_vec()));
                    start = i;
                }
            }
            Ok(out)
        })
        .collect::<Result<_, SessionError>>()?;

    let mut all: Vec<(Session, Vec<Event>)> = per_ip.into_iter().flatten().collect();
    all.sort_by_key(|(s, _)| (s.start_ts, s.client_ip));

    let mut tables = SessionTables {
        sessions: Vec::with_capacity(all.len()),
        entries: Vec::with_capacity(events.len()),
    };
    for (i, (mut session, run)) in all.into_iter().enumerate() {
        session.session_id = i as u64 + 1;
        for (rank, e) in run.iter().enumerate() {
            tables.entries.push(SessionEntry {
                session_id: session.session_id,
                rank_in_session: rank as u32 + 1,
                kind: e.kind,
                record_id: e.record_id,
                fingerprint_id: e.fingerprint_id,
                timestamp: e.timestamp,
            });
        }
        tables.sessions.push(session);
    }
    Ok(tables)
}

/// Gaps in seconds between consecutive events of the same IP, for events
/// sorted as by [`sort_events`].
pub fn think_times(events: &[Event]) -> Vec<i64> {
    events
        .windows(2)
        .filter(|w| w[0].client_ip == w[1].client_ip)
        .map(|w| w[1].timestamp.secs() - w[0].timestamp.secs())
        .collect()
}

/// Think-time distribution bucketed by `floor(log2(max(gap, 1)))`.
pub fn think_time_histogram(events: &[Event]) -> BucketedHistogram {
    BucketedHistogram::from_integers(think_times(events))
}

/// Log2-bucketed distributions of session size (requests) and duration.
pub fn session_size_histograms(sessions: &[Session]) -> (BucketedHistogram, BucketedHistogram) {
    let requests = BucketedHistogram::from_integers(sessions.iter().map(|s| s.requests() as i64));
    let durations = BucketedHistogram::from_integers(sessions.iter().map(|s| s.duration_s));
    (requests, durations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(ip: &str, t: i64, kind: EventKind, id: u64, fp: u64) -> Event {
        Event {
            client_ip: ip.parse().unwrap(),
            timestamp: Timestamp(t),
            kind,
            record_id: id,
            fingerprint_id: fp,
        }
    }

    fn web(ip: &str, t: i64, id: u64) -> Event {
        ev(ip, t, EventKind::Web, id, 1)
    }

    #[test]
    fn boundary_at_the_gap() {
        let s = build_sessions(&[web("1.1.1.1", 0, 1), web("1.1.1.1", 1799, 2)], 1800).unwrap();
        assert_eq!(s.sessions.len(), 1);
        assert_eq!(s.entries.len(), 2);
        let s = build_sessions(&[web("1.1.1.1", 0, 1), web("1.1.1.1", 1800, 2)], 1800).unwrap();
        assert_eq!(s.sessions.len(), 1);
        let s = build_sessions(&[web("1.1.1.1", 0, 1), web("1.1.1.1", 1801, 2)], 1800).unwrap();
        assert_eq!(s.sessions.len(), 2);
    }

    #[test]
    fn single_event_session() {
        let s = build_sessions(&[web("1.1.1.1", 50, 1)], 1800).unwrap();
        assert_eq!(s.sessions[0].duration_s, 0);
        assert_eq!(s.sessions[0].diversity, 1.0);
        assert_eq!(s.entries[0].rank_in_session, 1);
    }

    #[test]
    fn ips_never_merge_and_ids_follow_start_time() {
        let events = [
            web("2.2.2.2", 10, 1),
            web("1.1.1.1", 20, 2),
            web("2.2.2.2", 30, 3),
            web("1.1.1.1", 5000, 4),
        ];
        let s = build_sessions(&events, 1800).unwrap();
        let summary: Vec<(u64, String, u64)> = s
            .sessions
            .iter()
            .map(|x| (x.session_id, x.client_ip.to_string(), x.requests()))
            .collect();
        assert_eq!(
            summary,
            [(1, "2.2.2.2".into(), 2), (2, "1.1.1.1".into(), 1), (3, "1.1.1.1".into(), 1)]
        );
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let err = build_sessions(&[web("1.1.1.1", 10, 1), web("1.1.1.1", 5, 2)], 1800).unwrap_err();
        assert!(matches!(err, SessionError::Unsorted { record_id: 2, .. }));
        assert_eq!(build_sessions(&[], -1).unwrap_err(), SessionError::NegativeGap(-1));
    }

    #[test]
    fn stats_and_diversity() {
        let ip = "3.3.3.3";
        let events = [
            ev(ip, 0, EventKind::Web, 1, 10),
            ev(ip, 0, EventKind::Sql, 1, 7),
            ev(ip, 60, EventKind::Web, 2, 10),
            ev(ip, 120, EventKind::Sql, 2, 7),
            ev(ip, 180, EventKind::Sql, 3, 8),
        ];
        let s = &build_sessions(&events, 1800).unwrap().sessions[0];
        assert_eq!((s.page_views, s.sql_count), (2, 3));
        assert_eq!((s.distinct_stems, s.distinct_templates), (1, 2));
        assert_eq!(s.diversity, 5.0 / 3.0);
        assert_eq!(s.duration_s, 180);
    }

    #[test]
    fn web_sorts_before_sql_at_the_same_instant() {
        let mut events = vec![
            ev("1.1.1.1", 5, EventKind::Sql, 1, 1),
            ev("1.1.1.1", 5, EventKind::Web, 9, 1),
        ];
        sort_events(&mut events);
        let s = build_sessions(&events, 1800).unwrap();
        assert_eq!(s.entries[0].kind, EventKind::Web);
        assert_eq!(s.entries[1].kind, EventKind::Sql);
    }

    #[test]
    fn think_time_buckets() {
        let events: Vec<Event> = [0, 1, 3, 6, 10]
            .iter()
            .enumerate()
            .map(|(i, &t)| web("1.1.1.1", t, i as u64 + 1))
            .collect();
        let h = think_time_histogram(&events);
        assert_eq!(h.to_vec(), [(0, 1), (1, 2), (2, 1)]);
        assert!(think_time_histogram(&[]).is_empty());
        // gaps across IPs are not think times
        assert!(think_times(&[web("1.1.1.1", 0, 1), web("2.2.2.2", 9, 2)]).is_empty());
    }

    #[test]
    fn size_histograms() {
        let events: Vec<Event> = (0..9).map(|i| web("1.1.1.1", i, i as u64 + 1)).collect();
        let mut s = build_sessions(&events, 1800).unwrap().sessions;
        s.extend(build_sessions(&[web("2.2.2.2", 0, 99)], 1800).unwrap().sessions);
        let (req, dur) = session_size_histograms(&s);
        assert_eq!(req.to_vec(), [(0, 1), (3, 1)]);
        assert_eq!(dur.to_vec(), [(0, 1), (3, 1)]);
    }
}
