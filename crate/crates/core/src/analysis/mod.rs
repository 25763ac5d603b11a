//! Comparing systems: pairwise Bradley–Terry strengths with sign tests,
//! propensity weighting, rater agreement, evaluation-set sampling and
//! error-profile reports.

mod agreement;
mod bradley_terry;
mod propensity;
mod report;
mod sampling;

pub use agreement::{
    coding_round, fleiss_kappa, CodingRound, Disagreement, ErrorCategory, ErrorLabel, CODING_STOP_KAPPA,
};
pub use bradley_terry::{
    fit_bradley_terry, pairwise_table, sign_test, write_pairwise_csv, BtScores, OutcomeMatrix, PairwiseRow,
    SignTest,
};
pub use propensity::{
    propensity_weight, stratify, train_propensity, weighted_mean, Binning, PropensityConfig, PropensityModel,
    PropensityRecord, Stratum, PROPENSITY_EPS,
};
pub use report::{
    error_distribution_report, wilson_interval, win_rate_by_quantile, BinRate, ErrorProfile, EvaluatedItem,
    PreferenceOutcome, Z95,
};
pub use sampling::{kmeanspp_sample, quantile_bins, stratified_sample_by_metric};
