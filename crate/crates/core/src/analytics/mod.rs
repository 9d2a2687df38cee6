//! Traffic aggregation, term frequencies and log-scale model fitting.

mod fit;
mod histogram;
mod institution;
mod terms;
mod traffic;

pub use fit::{
    fit_exponential_growth, fit_log_log, fit_power_law, moving_average, ols, FitError, FitResult,
};
pub use histogram::{bucket_of_int, bucket_of_real, BucketedHistogram};
pub use institution::{
    by_category, categorize, traffic_by_institution, CategoryRow, InstitutionCategory,
    InstitutionRow, IpMap, IpMapError, UNKNOWN_ORG,
};
pub use terms::{
    rank_counts, term_frequency, unmentioned, Schema, SchemaError, TermClass, TermFrequencyTable,
    TermRow, TermWeight, Unmentioned,
};
pub use traffic::{
    site_tree, traffic_report, GroupKey, LanguageMap, TrafficRow, NO_SUFFIX_KEY, ROOT_KEY,
    SQL_KEY, WEB_KEY,
};
