//! Shared fixtures for the benchmarks.

use logscope::synth;

/// HTTP and SQL log text of a seeded mixed corpus.
pub fn mixed_logs(web: usize, sql: usize) -> (String, String) {
    let corpus = synth::mixed(web, sql, 11);
    (corpus.http_text(), corpus.sql_text())
}
