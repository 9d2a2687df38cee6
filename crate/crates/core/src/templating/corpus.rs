use std::collections::HashMap;

use rayon::prelude::*;

use super::template::{extract_stem, sql_template};
use crate::ingest::{HttpHit, SqlRequest};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandStem {
    pub stem_id: u64,
    pub stem: String,
    pub verb: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlTemplate {
    pub template_id: u64,
    pub template_text: String,
    pub count: u64,
    pub syntax_ok_count: u64,
    pub returned_rows_count: u64,
    /// First syntactically correct instance, if any.
    pub example_query_id: Option<u64>,
}

/// Fingerprint tables plus the per-record annotations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpora {
    pub stems: Vec<CommandStem>,
    pub templates: Vec<SqlTemplate>,
    /// `(hit_id, stem_id)` in hit order.
    pub hit_stems: Vec<(u64, u64)>,
    /// `(query_id, template_id)` in query order.
    pub query_templates: Vec<(u64, u64)>,
}

/// Builds the stem and template tables. Ids are assigned in first-seen
/// order of the input streams, so the result does not depend on how the
/// fingerprinting work is split across threads.
pub fn build_corpora(hits: &[HttpHit], queries: &[SqlRequest]) -> Corpora {
    let mut corpora = Corpora::default();

    let mut stem_ids: HashMap<&str, usize> = HashMap::new();
    for hit in hits {
        let idx = *stem_ids.entry(hit.uri_stem.as_str()).or_insert_with(|| {
            let (stem, verb) = extract_stem(&hit.uri_stem);
            corpora.stems.push(CommandStem {
                stem_id: corpora.stems.len() as u64 + 1,
                stem,
                verb,
                count: 0,
            });
            corpora.stems.len() - 1
        });
        corpora.stems[idx].count += 1;
        corpora.hit_stems.push((hit.hit_id, corpora.stems[idx].stem_id));
    }

    let texts: Vec<String> = queries.par_iter().map(|q| sql_template(&q.statement)).collect();
    let mut template_ids: HashMap<String, usize> = HashMap::new();
    for (q, text) in queries.iter().zip(texts) {
        let idx = match template_ids.get(&text) {
            Some(&idx) => idx,
            None => {
                corpora.templates.push(SqlTemplate {
                    template_id: corpora.templates.len() as u64 + 1,
                    template_text: text.clone(),
                    count: 0,
                    syntax_ok_count: 0,
                    returned_rows_count: 0,
                    example_query_id: None,
                });
                template_ids.insert(text, corpora.templates.len() - 1);
                corpora.templates.len() - 1
            }
        };
        let t = &mut corpora.templates[idx];
        t.count += 1;
        if q.is_syntax_ok {
            t.syntax_ok_count += 1;
            t.example_query_id.get_or_insert(q.query_id);
        }
        if q.rows_returned >= 1 {
            t.returned_rows_count += 1;
        }
        corpora.query_templates.push((q.query_id, t.template_id));
    }
    corpora
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Timestamp;

    fn query(id: u64, statement: &str, ok: bool, rows: u64) -> SqlRequest {
        SqlRequest {
            query_id: id,
            timestamp: Timestamp(0),
            client_ip: "10.0.0.1".parse().unwrap(),
            statement: statement.into(),
            rows_returned: rows,
            elapsed_s: 0.0,
            cpu_s: 0.0,
            is_syntax_ok: ok,
            error_text: if ok { String::new() } else { "err".into() },
            source_tag: String::new(),
        }
    }

    fn hit(id: u64, stem: &str, query: &str) -> HttpHit {
        HttpHit {
            hit_id: id,
            timestamp: Timestamp(0),
            client_ip: "10.0.0.1".parse().unwrap(),
            method: "GET".into(),
            uri_stem: stem.into(),
            uri_query: query.into(),
            status: 200,
            agent_raw: String::new(),
            referrer: String::new(),
            is_page_view: true,
        }
    }

    #[test]
    fn constants_collapse_to_one_template() {
        let qs = [
            query(1, "select * from t where x = 1", false, 0),
            query(2, "select * from t where x = 22", true, 0),
            query(3, "SELECT *  FROM T WHERE X = 3.5", true, 7),
        ];
        let c = build_corpora(&[], &qs);
        assert_eq!(c.templates.len(), 1);
        let t = &c.templates[0];
        assert_eq!(t.count, 3);
        assert_eq!(t.syntax_ok_count, 2);
        assert_eq!(t.returned_rows_count, 1);
        assert_eq!(t.example_query_id, Some(2));
        assert_eq!(c.query_templates, [(1, 1), (2, 1), (3, 1)]);
    }

    #[test]
    fn stems_ignore_query_strings() {
        let hits = [hit(1, "/x.asp", "a=1"), hit(2, "/x.asp", "a=2"), hit(3, "/y.asp", "")];
        let c = build_corpora(&hits, &[]);
        assert_eq!(c.stems.len(), 2);
        assert_eq!(c.stems[0].count, 2);
        assert_eq!(c.stems[0].verb, "x");
        assert_eq!(c.hit_stems, [(1, 1), (2, 1), (3, 2)]);
    }

    #[test]
    fn empty_streams() {
        assert_eq!(build_corpora(&[], &[]), Corpora::default());
    }

    #[test]
    fn never_correct_template_has_no_example() {
        let c = build_corpora(&[], &[query(9, "selec 1", false, 0)]);
        assert_eq!(c.templates[0].example_query_id, None);
    }
}
