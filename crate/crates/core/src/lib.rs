//! Log analytics for a web site fronting a SQL database: ingest HTTP and
//! SQL logs, fingerprint requests, sessionize, label traffic, fit
//! log-scale models and suggest corrections for failing statements.

pub mod analytics;
pub mod classifier;
pub mod config;
pub mod ingest;
pub mod report;
pub mod sessionizer;
pub mod suggester;
pub mod synth;
pub mod templating;
pub mod tsv;
pub mod workspace;

pub use analytics::{BucketedHistogram, FitResult, GroupKey, IpMap, LanguageMap, Schema, TermFrequencyTable};
pub use classifier::{classify_session, ClassifierParams, IpProfile};
pub use config::Config;
pub use ingest::{AgentCategory, AgentInfo, AgentRules, HttpHit, SqlRequest, Timestamp};
pub use report::ReportKind;
pub use sessionizer::{build_sessions, Classification, Event, EventKind, Session, SessionEntry};
pub use suggester::{jaccard_similarity, ngrams, SuggestIndex, Suggestion};
pub use templating::{simplify_template, sql_template, CommandStem, Corpora, SqlTemplate, TokenStream};
pub use workspace::{Stage, StageState, Workspace, WorkspaceError};
