//! Nearest known-good templates for a statement, by Jaccard similarity of
//! token n-gram sets.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::templating::{simplify_template, sql_template, SqlTemplate, TokenStream};

pub const DEFAULT_NGRAM: usize = 3;
pub const DEFAULT_TOP_K: usize = 3;

pub type Gram = Vec<String>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SuggestError {
    #[error("n-gram length must be at least 1, got {0}")]
    BadN(usize),
}

/// Contiguous windows of `n` tokens as a set. A stream shorter than `n`
/// yields itself as the only gram; an empty stream yields nothing.
pub fn ngrams(tokens: &[String], n: usize) -> Result<BTreeSet<Gram>, SuggestError> {
    if n < 1 {
        return Err(SuggestError::BadN(n));
    }
    if tokens.is_empty() {
        return Ok(BTreeSet::new());
    }
    if tokens.len() < n {
        return Ok(BTreeSet::from([tokens.to_vec()]));
    }
    Ok(tokens.windows(n).map(<[String]>::to_vec).collect())
}

/// `|A ∩ B| / |A ∪ B|`, with two empty sets counting as identical.
pub fn jaccard_similarity<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    ratio(inter, a.len() + b.len() - inter)
}

fn ratio(inter: usize, union: usize) -> f64 {
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// The token stream a raw statement is compared on.
pub fn statement_stream(statement: &str) -> TokenStream {
    simplify_template(&sql_template(statement))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub template_id: u64,
    pub similarity: f64,
    pub example_statement: String,
}

#[derive(Debug, Clone)]
struct Entry {
    template_id: u64,
    count: u64,
    example: String,
    /// Sorted, distinct gram ids.
    grams: Vec<u32>,
}

/// Immutable n-gram profiles of the templates that ran correctly at
/// least once, with an inverted index from gram to entries.
#[derive(Debug, Clone)]
pub struct SuggestIndex {
    n: usize,
    gram_ids: HashMap<Gram, u32>,
    entries: Vec<Entry>,
    postings: Vec<Vec<u32>>,
    /// Entry positions by count descending, then template id.
    popularity: Vec<u32>,
}

fn intersect_sorted(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Query grams resolved against the index vocabulary. Grams the index
/// has never seen still count towards the union.
struct QueryGrams {
    known: Vec<u32>,
    total: usize,
}

impl SuggestIndex {
    /// `examples` maps template ids to a correct statement shown with
    /// each suggestion.
    pub fn build(templates: &[SqlTemplate], examples: &HashMap<u64, String>, n: usize) -> Result<Self, SuggestError> {
        if n < 1 {
            return Err(SuggestError::BadN(n));
        }
        let eligible: Vec<&SqlTemplate> = templates.iter().filter(|t| t.syntax_ok_count >= 1).collect();
        let gram_sets: Vec<BTreeSet<Gram>> = eligible
            .par_iter()
            .map(|t| ngrams(&simplify_template(&t.template_text).tokens, n).expect("n checked"))
            .collect();

        let mut gram_ids: HashMap<Gram, u32> = HashMap::new();
        let mut postings: Vec<Vec<u32>> = Vec::new();
        let mut entries = Vec::with_capacity(eligible.len());
        for (pos, (t, set)) in eligible.iter().zip(gram_sets).enumerate() {
            let mut grams: Vec<u32> = set
                .into_iter()
                .map(|g| {
                    let next = gram_ids.len() as u32;
                    let id = *gram_ids.entry(g).or_insert(next);
                    if id == next {
                        postings.push(Vec::new());
                    }
                    postings[id as usize].push(pos as u32);
                    id
                })
                .collect();
            grams.sort_unstable();
            entries.push(Entry {
                template_id: t.template_id,
                count: t.count,
                example: examples.get(&t.template_id).cloned().unwrap_or_default(),
                grams,
            });
        }
        let mut popularity: Vec<u32> = (0..entries.len() as u32).collect();
        popularity.sort_by(|&a, &b| {
            let (a, b) = (&entries[a as usize], &entries[b as usize]);
            b.count.cmp(&a.count).then(a.template_id.cmp(&b.template_id))
        });
        Ok(SuggestIndex {
            n,
            gram_ids,
            entries,
            postings,
            popularity,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn query_grams(&self, statement: &str) -> QueryGrams {
        let set = ngrams(&statement_stream(statement).tokens, self.n).expect("n checked at build");
        let mut known: Vec<u32> = set.iter().filter_map(|g| self.gram_ids.get(g).copied()).collect();
        known.sort_unstable();
        QueryGrams {
            known,
            total: set.len(),
        }
    }

    fn score(&self, q: &QueryGrams, entry: &Entry, inter: usize) -> f64 {
        if q.total == 0 && entry.grams.is_empty() {
            return 1.0;
        }
        ratio(inter, q.total + entry.grams.len() - inter)
    }

    fn rank(&self, a: (u32, f64), b: (u32, f64)) -> Ordering {
        let (ea, eb) = (&self.entries[a.0 as usize], &self.entries[b.0 as usize]);
        b.1.total_cmp(&a.1)
            .then(eb.count.cmp(&ea.count))
            .then(ea.template_id.cmp(&eb.template_id))
    }

    fn to_suggestions(&self, scored: Vec<(u32, f64)>) -> Vec<Suggestion> {
        scored
            .into_iter()
            .map(|(pos, similarity)| {
                let e = &self.entries[pos as usize];
                Suggestion {
                    template_id: e.template_id,
                    similarity,
                    example_statement: e.example.clone(),
                }
            })
            .collect()
    }

    /// Top `k` templates for `statement`, scoring only templates that
    /// share a gram with it and padding with zero-similarity templates in
    /// popularity order.
    pub fn suggest(&self, statement: &str, k: usize) -> Vec<Suggestion> {
        let q = self.query_grams(statement);
        if q.total == 0 {
            return self.exhaustive(&q, k);
        }
        let mut overlap: HashMap<u32, usize> = HashMap::new();
        for &g in &q.known {
            for &pos in &self.postings[g as usize] {
                *overlap.entry(pos).or_insert(0) += 1;
            }
        }
        let mut scored: Vec<(u32, f64)> = overlap
            .into_iter()
            .map(|(pos, inter)| (pos, self.score(&q, &self.entries[pos as usize], inter)))
            .collect();
        scored.sort_by(|&a, &b| self.rank(a, b));
        scored.truncate(k);
        if scored.len() < k {
            let taken: Vec<u32> = scored.iter().map(|s| s.0).collect();
            let fill = self
                .popularity
                .iter()
                .filter(|p| !taken.contains(p))
                .take(k - scored.len())
                .map(|&p| (p, 0.0))
                .collect::<Vec<_>>();
            scored.extend(fill);
        }
        self.to_suggestions(scored)
    }

    /// Same result as [`SuggestIndex::suggest`], scoring every template.
    pub fn suggest_exhaustive(&self, statement: &str, k: usize) -> Vec<Suggestion> {
        let q = self.query_grams(statement);
        self.exhaustive(&q, k)
    }

    fn exhaustive(&self, q: &QueryGrams, k: usize) -> Vec<Suggestion> {
        let mut scored: Vec<(u32, f64)> = self
            .entries
            .par_iter()
            .enumerate()
            .map(|(pos, e)| (pos as u32, self.score(q, e, intersect_sorted(&q.known, &e.grams))))
            .collect();
        scored.sort_by(|&a, &b| self.rank(a, b));
        scored.truncate(k);
        self.to_suggestions(scored)
    }
}
