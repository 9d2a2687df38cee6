use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use logscope::ingest::{HttpBatch, IngestOptions, SqlBatch};
use logscope::suggester::DEFAULT_NGRAM;
use logscope::templating::build_corpora;
use logscope::{simplify_template, sql_template, SuggestIndex};
use logscope_bench::mixed_logs;

const WEB: usize = 50_000;
const SQL: usize = 10_000;

fn ingest_and_fingerprint(c: &mut Criterion) {
    let (http, sql) = mixed_logs(WEB, SQL);
    let opts = IngestOptions::with_default_rules();
    let mut group = c.benchmark_group("ingest");
    group.throughput(Throughput::Elements((WEB + SQL) as u64));
    group.sample_size(10);
    group.bench_function("parse", |b| {
        b.iter(|| {
            let mut web = HttpBatch::default();
            web.push_text("http.log", black_box(&http), &opts);
            let mut queries = SqlBatch::default();
            queries.push_text("sql.log", black_box(&sql));
            (web.hits.len(), queries.queries.len())
        })
    });
    group.bench_function("parse_and_fingerprint", |b| {
        b.iter(|| {
            let mut web = HttpBatch::default();
            web.push_text("http.log", black_box(&http), &opts);
            let mut queries = SqlBatch::default();
            queries.push_text("sql.log", black_box(&sql));
            build_corpora(&web.hits, &queries.queries).templates.len()
        })
    });
    group.finish();
}

fn templating(c: &mut Criterion) {
    let statement = "SELECT TOP 10 p.objID, p.ra, p.dec FROM fGetNearbyObjEq(195.163, 2.5, 0.5) n \
                     JOIN PhotoPrimary p ON n.objID = p.objID WHERE p.r BETWEEN 15 AND 19.5 AND (p.flags & 0x10) = 0";
    c.bench_function("sql_template", |b| b.iter(|| sql_template(black_box(statement))));
    let template = sql_template(statement);
    c.bench_function("simplify_template", |b| b.iter(|| simplify_template(black_box(&template))));
}

fn suggest(c: &mut Criterion) {
    let (http, sql) = mixed_logs(10, 20_000);
    let mut web = HttpBatch::default();
    web.push_text("http.log", &http, &IngestOptions::with_default_rules());
    let mut queries = SqlBatch::default();
    queries.push_text("sql.log", &sql);
    let corpora = build_corpora(&web.hits, &queries.queries);
    let examples = corpora
        .templates
        .iter()
        .map(|t| (t.template_id, t.template_text.clone()))
        .collect();
    let index = SuggestIndex::build(&corpora.templates, &examples, DEFAULT_NGRAM).unwrap();
    let broken = "SELECT TOP 5 objID, ra FROM PhotoObjAll WHERE ra >> 10";
    c.bench_function("suggest_pruned", |b| b.iter(|| index.suggest(black_box(broken), 3)));
    c.bench_function("suggest_exhaustive", |b| b.iter(|| index.suggest_exhaustive(black_box(broken), 3)));
}

criterion_group!(benches, ingest_and_fingerprint, templating, suggest);
criterion_main!(benches);
