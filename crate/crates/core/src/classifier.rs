//! Session labels: admin, spider, bot, mortal or other.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::net::IpAddr;

use rayon::prelude::*;

use crate::ingest::{AgentCategory, AgentTable, HttpHit, SqlRequest};
use crate::sessionizer::{Classification, Session};

/// Evidence gathered over every hit from one client address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IpProfile {
    pub client_ip: IpAddr,
    pub ever_spider_agent: bool,
    pub fetched_robots_txt: bool,
    pub ever_admin_agent: bool,
}

impl IpProfile {
    pub fn clean(client_ip: IpAddr) -> Self {
        IpProfile {
            client_ip,
            ever_spider_agent: false,
            fetched_robots_txt: false,
            ever_admin_agent: false,
        }
    }

    fn merge(mut self, other: &IpProfile) -> Self {
        self.ever_spider_agent |= other.ever_spider_agent;
        self.fetched_robots_txt |= other.fetched_robots_txt;
        self.ever_admin_agent |= other.ever_admin_agent;
        self
    }
}

fn is_robots_txt(uri_stem: &str) -> bool {
    uri_stem
        .rsplit('/')
        .next()
        .is_some_and(|last| last.eq_ignore_ascii_case("robots.txt"))
}

/// One profile per address seen in either log, ordered by address. All
/// hits count, not only page views. Addresses in `admin_ips` are marked
/// admin regardless of agent.
pub fn build_ip_profiles(
    hits: &[HttpHit],
    queries: &[SqlRequest],
    agents: &AgentTable,
    admin_ips: &HashSet<IpAddr>,
) -> Vec<IpProfile> {
    let merged = hits
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<IpAddr, IpProfile>, h| {
            let category = agents
                .get(&h.agent_raw)
                .map_or(AgentCategory::Unknown, |a| a.category);
            let p = IpProfile {
                client_ip: h.client_ip,
                ever_spider_agent: category == AgentCategory::Spider,
                fetched_robots_txt: is_robots_txt(&h.uri_stem),
                ever_admin_agent: category == AgentCategory::Admin,
            };
            acc.entry(h.client_ip)
                .and_modify(|e| *e = e.merge(&p))
                .or_insert(p);
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (ip, p) in b {
                a.entry(ip).and_modify(|e| *e = e.merge(&p)).or_insert(p);
            }
            a
        });
    let mut out: BTreeMap<IpAddr, IpProfile> = merged.into_iter().collect();
    for q in queries {
        out.entry(q.client_ip).or_insert_with(|| IpProfile::clean(q.client_ip));
    }
    for ip in admin_ips {
        if let Some(p) = out.get_mut(ip) {
            p.ever_admin_agent = true;
        }
    }
    out.into_values().collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierParams {
    /// Queries per distinct template at or above which a session is a bot.
    pub reuse_threshold: f64,
    pub min_events: u64,
    pub min_duration_s: i64,
    pub max_duration_s: i64,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            reuse_threshold: 4.0,
            min_events: 4,
            min_duration_s: 60,
            max_duration_s: 28_800,
        }
    }
}

/// Labels one session; the first matching rule wins.
pub fn classify_session(session: &Session, profile: &IpProfile, params: &ClassifierParams) -> Classification {
    if profile.ever_admin_agent {
        Classification::Admin
    } else if profile.ever_spider_agent || profile.fetched_robots_txt {
        Classification::Spider
    } else if session.sql_count > 0
        && session.sql_count as f64 >= params.reuse_threshold * session.distinct_templates as f64
    {
        Classification::Bot
    } else if (params.min_duration_s..=params.max_duration_s).contains(&session.duration_s)
        && session.requests() >= params.min_events
    {
        Classification::Mortal
    } else {
        Classification::Other
    }
}

/// Labels every session in place. Sessions whose address has no profile
/// are judged against a clean one.
pub fn classify_sessions(sessions: &mut [Session], profiles: &[IpProfile], params: &ClassifierParams) {
    let by_ip: HashMap<IpAddr, &IpProfile> = profiles.iter().map(|p| (p.client_ip, p)).collect();
    sessions.par_iter_mut().for_each(|s| {
        let clean = IpProfile::clean(s.client_ip);
        let profile = by_ip.get(&s.client_ip).copied().unwrap_or(&clean);
        s.classification = classify_session(s, profile, params);
    });
}

/// A query that parsed and returned at least one row.
pub fn is_valid_query(q: &SqlRequest) -> bool {
    q.is_syntax_ok && q.rows_returned >= 1
}

/// Query sessions that look human: at least one distinct template per
/// five queries, shorter than eight hours.
pub fn is_mortal_query_session(session: &Session) -> bool {
    session.sql_count > 0
        && session.distinct_templates as f64 >= 0.2 * session.sql_count as f64
        && session.duration_s < 28_800
}

/// Label counts in `Classification::ALL` order, omitting zeros.
pub fn label_counts(sessions: &[Session]) -> Vec<(Classification, u64)> {
    let mut counts: BTreeMap<Classification, u64> = BTreeMap::new();
    for s in sessions {
        *counts.entry(s.classification).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{classify_agent, AgentRules, Timestamp};

    fn ip(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    fn hit(addr: &str, stem: &str, agent: &str) -> HttpHit {
        HttpHit {
            hit_id: 1,
            timestamp: Timestamp(0),
            client_ip: ip(addr),
            method: "GET".into(),
            uri_stem: stem.into(),
            uri_query: String::new(),
            status: 200,
            agent_raw: agent.into(),
            referrer: String::new(),
            is_page_view: true,
        }
    }

    fn agents(hits: &[HttpHit]) -> AgentTable {
        let rules = AgentRules::default_rules();
        let mut t = AgentTable::default();
        for h in hits {
            t.insert(classify_agent(&h.agent_raw, &rules));
        }
        t
    }

    fn session(sql: u64, templates: u64, pv: u64, duration_s: i64) -> Session {
        Session {
            session_id: 1,
            client_ip: ip("10.0.0.1"),
            start_ts: Timestamp(0),
            end_ts: Timestamp(duration_s),
            page_views: pv,
            sql_count: sql,
            distinct_stems: pv.min(1),
            distinct_templates: templates,
            diversity: 1.0,
            duration_s,
            classification: Classification::Unclassified,
        }
    }

    const MSIE: &str = "Mozilla/4.0 (compatible; MSIE 6.0; Windows NT 5.1)";

    #[test]
    fn profiles() {
        let hits = [
            hit("1.1.1.1", "/default.asp", "Googlebot/2.1 (+http://www.google.com/bot.html)"),
            hit("1.1.1.1", "/default.asp", MSIE),
            hit("2.2.2.2", "/robots.txt", MSIE),
            hit("3.3.3.3", "/default.asp", MSIE),
        ];
        let p = build_ip_profiles(&hits, &[], &agents(&hits), &HashSet::new());
        assert_eq!(p.len(), 3);
        assert!(p[0].ever_spider_agent && !p[0].fetched_robots_txt);
        assert!(p[1].fetched_robots_txt && !p[1].ever_spider_agent);
        assert_eq!(p[2], IpProfile::clean(ip("3.3.3.3")));
        let admin: HashSet<IpAddr> = [ip("3.3.3.3")].into();
        let p = build_ip_profiles(&hits, &[], &agents(&hits), &admin);
        assert!(p[2].ever_admin_agent);
    }

    #[test]
    fn labels() {
        let params = ClassifierParams::default();
        let clean = IpProfile::clean(ip("10.0.0.1"));
        assert_eq!(classify_session(&session(13_000, 1, 0, 3600), &clean, &params), Classification::Bot);
        assert_eq!(classify_session(&session(6, 6, 0, 1800), &clean, &params), Classification::Mortal);
        assert_eq!(classify_session(&session(0, 0, 2, 10), &clean, &params), Classification::Other);
        let robots = IpProfile {
            fetched_robots_txt: true,
            ..clean
        };
        assert_eq!(classify_session(&session(6, 6, 0, 1800), &robots, &params), Classification::Spider);
        let admin = IpProfile {
            ever_admin_agent: true,
            ..robots
        };
        assert_eq!(classify_session(&session(6, 6, 0, 1800), &admin, &params), Classification::Admin);
    }

    #[test]
    fn boundaries() {
        let params = ClassifierParams::default();
        let clean = IpProfile::clean(ip("10.0.0.1"));
        // exactly four per template is a bot
        assert_eq!(classify_session(&session(8, 2, 0, 600), &clean, &params), Classification::Bot);
        assert_eq!(classify_session(&session(7, 2, 0, 600), &clean, &params), Classification::Mortal);
        assert_eq!(classify_session(&session(0, 0, 4, 60), &clean, &params), Classification::Mortal);
        assert_eq!(classify_session(&session(0, 0, 4, 28_800), &clean, &params), Classification::Mortal);
        assert_eq!(classify_session(&session(0, 0, 4, 28_801), &clean, &params), Classification::Other);
        assert_eq!(classify_session(&session(0, 0, 3, 600), &clean, &params), Classification::Other);
    }

    #[test]
    fn mortal_query_sessions() {
        assert!(is_mortal_query_session(&session(10, 2, 0, 3600)));
        assert!(!is_mortal_query_session(&session(10, 1, 0, 3600)));
        assert!(!is_mortal_query_session(&session(6, 6, 0, 9 * 3600)));
        assert!(!is_mortal_query_session(&session(0, 0, 5, 600)));
    }

    #[test]
    fn valid_queries() {
        let mut q = SqlRequest {
            query_id: 1,
            timestamp: Timestamp(0),
            client_ip: ip("10.0.0.1"),
            statement: "select 1".into(),
            rows_returned: 0,
            elapsed_s: 0.0,
            cpu_s: 0.0,
            is_syntax_ok: true,
            error_text: String::new(),
            source_tag: String::new(),
        };
        assert!(!is_valid_query(&q));
        q.rows_returned = 3500;
        assert!(is_valid_query(&q));
        q.is_syntax_ok = false;
        assert!(!is_valid_query(&q));
    }
}
