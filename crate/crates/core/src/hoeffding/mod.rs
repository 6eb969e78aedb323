//! Incremental Hoeffding tree learners for classification and regression.

mod bound;
mod classification;
mod observers;
mod regression;

pub use bound::{hoeffding_epsilon, BoundError, HoeffdingBoundParams};
pub use classification::{
    best_two_splits_classification, observe_classification, try_split_classification,
    CandidateSplit, HoeffdingTreeClassifier, LeafStats, SplitDecision, SplitError, SplitKind,
    NUMERIC_SPLIT_POINTS,
};
pub use observers::{
    ClassObserver, GaussianStats, NumericHistogram, RegObserver, TargetMoments,
    REGRESSION_HISTOGRAM_BINS,
};
pub use regression::{
    best_two_splits_regression, observe_regression, try_split_regression, HoeffdingTreeRegressor,
    LeafStatsReg, RegCandidate, RegSplitDecision,
};
