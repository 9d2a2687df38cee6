//! Seeded synthetic log corpora with known structure, for tests, benches
//! and the `synth` command.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;

use chrono::{Datelike, NaiveDate, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Pareto};

use crate::ingest::{format_http_line, format_sql_line, HttpHit, SqlRequest, Timestamp};
use crate::sessionizer::Classification;

/// 2003-01-01T00:00:00Z
pub const EPOCH: i64 = 1_041_379_200;

/// Largest generated think-time gap, in seconds.
pub const MAX_GAP_S: f64 = (1u64 << 28) as f64;

pub const BROWSER_AGENT: &str = "Mozilla/4.0 (compatible; MSIE 6.0; Windows NT 5.1)";
pub const SPIDER_AGENT: &str = "Googlebot/2.1 (+http://www.google.com/bot.html)";
pub const PROGRAM_AGENT: &str = "libwww-perl/5.79";
pub const ADMIN_AGENT: &str = "BigBrother/1.9c";

/// A generated corpus: log lines plus the true label of each client.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub http: Vec<HttpHit>,
    pub sql: Vec<SqlRequest>,
    pub truth: Vec<(IpAddr, Classification)>,
}

impl Corpus {
    pub fn http_text(&self) -> String {
        lines(self.http.iter().map(format_http_line))
    }

    pub fn sql_text(&self) -> String {
        lines(self.sql.iter().map(format_sql_line))
    }

    pub fn truth_text(&self) -> String {
        let mut out = String::from("client_ip\tlabel\n");
        for (ip, label) in &self.truth {
            out.push_str(&format!("{}\t{}\n", ip, label.as_str()));
        }
        out
    }

    /// Writes `http.log`, `sql.log` and `truth.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut http = BufWriter::new(fs::File::create(dir.join("http.log"))?);
        for hit in &self.http {
            writeln!(http, "{}", format_http_line(hit))?;
        }
        http.flush()?;
        let mut sql = BufWriter::new(fs::File::create(dir.join("sql.log"))?);
        for q in &self.sql {
            writeln!(sql, "{}", format_sql_line(q))?;
        }
        sql.flush()?;
        fs::write(dir.join("truth.tsv"), self.truth_text())
    }

    fn hit(&mut self, ts: i64, ip: IpAddr, stem: &str, agent: &str) {
        self.http.push(HttpHit {
            hit_id: 0,
            timestamp: Timestamp(ts),
            client_ip: ip,
            method: "GET".into(),
            uri_stem: stem.into(),
            uri_query: String::new(),
            status: 200,
            agent_raw: agent.into(),
            referrer: String::new(),
            is_page_view: false,
        });
    }

    fn query(&mut self, ts: i64, ip: IpAddr, statement: String, rows: u64) {
        self.sql.push(SqlRequest {
            query_id: 0,
            timestamp: Timestamp(ts),
            client_ip: ip,
            statement,
            rows_returned: rows,
            elapsed_s: 0.05,
            cpu_s: 0.01,
            is_syntax_ok: true,
            error_text: String::new(),
            source_tag: "skyserver".into(),
        });
    }

    /// Orders both logs by time so the files look like real server logs.
    fn finish(mut self) -> Self {
        self.http.sort_by_key(|h| (h.timestamp, h.client_ip));
        self.sql.sort_by_key(|q| (q.timestamp, q.client_ip));
        self.truth.sort();
        self
    }
}

fn lines(items: impl Iterator<Item = String>) -> String {
    let mut out = String::new();
    for line in items {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

fn ip(group: u8, n: usize) -> IpAddr {
    IpAddr::V4(Ipv4Addr::new(10, group, (n >> 8) as u8, n as u8))
}

const TABLES: [&str; 6] = ["PhotoObjAll", "SpecObjAll", "Field", "Frame", "PhotoZ", "Neighbors"];
const COLUMNS: [&str; 5] = ["ra", "dec", "run", "camcol", "z"];
const PAGES: [&str; 8] = [
    "/en/default.asp",
    "/en/tools/search/sql.asp",
    "/en/tools/chart/navi.asp",
    "/en/help/docs/sql_help.asp",
    "/en/tools/explore/obj.asp",
    "/en/proj/basic/default.asp",
    "/dr5/en/tools/search/radial.asp",
    "/en/sdss/data/data.asp",
];

/// Number of structurally distinct statements `template_statement` can emit.
pub const TEMPLATE_POOL: usize = TABLES.len() * COLUMNS.len();

/// Statement of template `t` with random constants.
pub fn template_statement(t: usize, rng: &mut impl Rng) -> String {
    let table = TABLES[t % TABLES.len()];
    let column = COLUMNS[(t / TABLES.len()) % COLUMNS.len()];
    format!(
        "SELECT TOP {} objID, {} FROM {} WHERE {} > {}",
        rng.random_range(1..1000),
        column,
        table,
        column,
        rng.random_range(0..360)
    )
}

fn bot_statement(rng: &mut impl Rng) -> String {
    format!(
        "SELECT p.objID, p.ra, p.dec FROM fGetNearbyObjEq({}, {}, 0.5) n JOIN PhotoPrimary p ON n.objID = p.objID",
        rng.random_range(0..360),
        rng.random_range(0..90)
    )
}

/// Population sizes for the planted corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Planted {
    pub spiders: usize,
    pub bots: usize,
    pub bot_queries: usize,
    pub mortals: usize,
    pub mortal_sessions: usize,
    pub others: usize,
    pub admins: usize,
    pub seed: u64,
}

impl Default for Planted {
    fn default() -> Self {
        Planted {
            spiders: 20,
            bots: 5,
            bot_queries: 13_000,
            mortals: 100,
            mortal_sessions: 3,
            others: 50,
            admins: 2,
            seed: 7,
        }
    }
}

/// Populations whose labels are known by construction. Every client has
/// one kind of behaviour:
/// spiders crawl pages, half after fetching robots.txt with a browser agent
/// and half with a crawler agent; bots replay one statement shape from a
/// script every second; mortals run sessions of six distinct statements six
/// minutes apart, a day between sessions; others view two pages ten
/// seconds apart; admins probe with a monitoring agent and one query.
pub fn planted(p: &Planted) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut c = Corpus::default();
    for i in 0..p.spiders {
        let addr = ip(1, i);
        let start = EPOCH + rng.random_range(0..86_400);
        let agent = if i % 2 == 0 {
            c.hit(start, addr, "/robots.txt", BROWSER_AGENT);
            BROWSER_AGENT
        } else {
            SPIDER_AGENT
        };
        for k in 0..40 {
            let page = PAGES[k % PAGES.len()];
            c.hit(start + 5 + 20 * k as i64, addr, page, agent);
        }
        c.truth.push((addr, Classification::Spider));
    }
    for i in 0..p.bots {
        let addr = ip(2, i);
        let start = EPOCH + rng.random_range(0..86_400);
        c.hit(start, addr, "/en/tools/search/x_sql.asp", PROGRAM_AGENT);
        for k in 0..p.bot_queries {
            c.query(start + 1 + k as i64, addr, bot_statement(&mut rng), 1);
        }
        c.truth.push((addr, Classification::Bot));
    }
    for i in 0..p.mortals {
        let addr = ip(3, i);
        let first = EPOCH + rng.random_range(0..86_400);
        for s in 0..p.mortal_sessions {
            let start = first + 86_400 * s as i64;
            let mut pool: Vec<usize> = (0..TEMPLATE_POOL).collect();
            let (picked, _) = pool.partial_shuffle(&mut rng, 6);
            let picked = picked.to_vec();
            c.hit(start, addr, "/en/tools/search/sql.asp", BROWSER_AGENT);
            for (k, t) in picked.into_iter().enumerate() {
                let statement = template_statement(t, &mut rng);
                c.query(start + 360 * k as i64, addr, statement, rng.random_range(1..500));
            }
            c.hit(start + 1800, addr, "/en/tools/explore/obj.asp", BROWSER_AGENT);
        }
        c.truth.push((addr, Classification::Mortal));
    }
    for i in 0..p.others {
        let addr = ip(4, i);
        let start = EPOCH + rng.random_range(0..86_400);
        c.hit(start, addr, "/en/default.asp", BROWSER_AGENT);
        c.hit(start + 10, addr, "/en/sdss/data/data.asp", BROWSER_AGENT);
        c.truth.push((addr, Classification::Other));
    }
    for i in 0..p.admins {
        let addr = ip(5, i);
        let start = EPOCH + rng.random_range(0..86_400);
        c.hit(start, addr, "/en/default.asp", ADMIN_AGENT);
        c.query(start + 1, addr, "SELECT COUNT(*) FROM Field".into(), 1);
        c.truth.push((addr, Classification::Admin));
    }
    c.finish()
}

/// Page views whose think times follow a Pareto density `x^-alpha` on
/// `[1, MAX_GAP_S]` seconds. The log2-bucket counts then fall off with
/// slope `1 - alpha`. Gaps are whole seconds; flooring keeps every value in
/// its power-of-two bucket.
pub fn power_law(alpha: f64, clients: usize, gaps_per_client: usize, seed: u64) -> Corpus {
    assert!(alpha > 1.0, "density exponent must exceed 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pareto = Pareto::new(1.0, alpha - 1.0).expect("valid pareto");
    let mut c = Corpus::default();
    for i in 0..clients {
        let addr = ip(6, i);
        let mut ts = EPOCH;
        c.hit(ts, addr, PAGES[0], BROWSER_AGENT);
        for k in 0..gaps_per_client {
            let gap: f64 = pareto.sample(&mut rng);
            ts += gap.min(MAX_GAP_S).floor() as i64;
            c.hit(ts, addr, PAGES[(k + 1) % PAGES.len()], BROWSER_AGENT);
        }
        c.truth.push((addr, Classification::Other));
    }
    c.finish()
}

/// Monthly page-view counts growing by `yearly` per year from `base`, with
/// multiplicative Gaussian noise of relative size `noise`.
pub fn growth(months: usize, base: f64, yearly: f64, noise: f64, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).expect("valid normal");
    let mut c = Corpus::default();
    let first = Utc.timestamp_opt(EPOCH, 0).single().expect("epoch").date_naive();
    for m in 0..months {
        let start = month_start(first, m);
        let len = month_start(first, m + 1) - start;
        let mean = base * yearly.powf(m as f64 / 12.0);
        let count = (mean * (1.0 + jitter.sample(&mut rng))).round().max(1.0) as usize;
        for k in 0..count {
            let addr = ip(7, rng.random_range(0..4096));
            let ts = start + rng.random_range(0..len);
            c.hit(ts, addr, PAGES[k % PAGES.len()], BROWSER_AGENT);
        }
    }
    c.finish()
}

fn month_start(first: NaiveDate, m: usize) -> i64 {
    let months = first.year() * 12 + first.month0() as i32 + m as i32;
    NaiveDate::from_ymd_opt(months / 12, months as u32 % 12 + 1, 1)
        .expect("valid month")
        .and_hms_opt(0, 0, 0)
        .expect("midnight")
        .and_utc()
        .timestamp()
}

/// Realistic mixed traffic: `web` hits and `sql` statements from a few
/// thousand clients over one day, for throughput measurements.
pub fn mixed(web: usize, sql: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agents = [BROWSER_AGENT, SPIDER_AGENT, PROGRAM_AGENT, "Mozilla/5.0 Firefox/1.5"];
    let stems = [
        "/en/default.asp",
        "/en/tools/search/sql.asp",
        "/images/logo.gif",
        "/css/main.css",
        "/en/tools/chart/navi.asp",
        "/en/get/frameByRCFZ.asp",
    ];
    let mut c = Corpus::default();
    for _ in 0..web {
        let addr = ip(8, rng.random_range(0..4096));
        let ts = EPOCH + rng.random_range(0..86_400);
        let stem = stems.choose(&mut rng).expect("stems");
        let agent = agents.choose(&mut rng).expect("agents");
        c.hit(ts, addr, stem, agent);
        if let Some(h) = c.http.last_mut() {
            h.uri_query = format!("id={}", rng.random_range(0..100_000));
        }
    }
    for _ in 0..sql {
        let addr = ip(8, rng.random_range(0..4096));
        let ts = EPOCH + rng.random_range(0..86_400);
        let t = rng.random_range(0..TEMPLATE_POOL);
        let statement = template_statement(t, &mut rng);
        c.query(ts, addr, statement, rng.random_range(0..100));
    }
    c.finish()
}
