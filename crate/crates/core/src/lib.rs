//! Comparison of predictive models evaluated by cross-validation over many
//! datasets: naive averages, Friedman/Nemenyi rank tests and a hierarchical
//! Bayesian correlated t-test with a region of practical equivalence.

pub mod bayes;
pub mod config;
pub mod data;
pub mod decision;
pub mod error;
pub mod family;
pub mod nhst;
pub mod plot;
pub mod rank;
pub mod report;
pub mod sim;
pub mod special;

pub use data::{
    dataset_means, pair_differences, parse_results_csv, ColumnMapping, CvGeometry, FoldId, MetricSpec,
    PairDifferences, PerfTable,
};
pub use decision::{DecisionMatrix, Verdict};
pub use error::{Error, Problem, Result};
pub use family::{EpistemicNote, FamilyOfBest, Method};
pub use nhst::{FriedmanOutcome, NemenyiOutcome};
pub use rank::RankMatrix;
pub use config::{Format, RunConfig};
pub use report::ReportBundle;
