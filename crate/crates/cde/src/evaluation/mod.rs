//! Model evaluation: Hellinger distance against known densities,
//! held-out log-likelihood, moment errors, and cross-validated
//! hyperparameter search.

pub mod grid_search;
pub mod hellinger;
pub mod metrics;
pub mod nelder_mead;

pub use grid_search::{cv_folds, grid_search_cv, CvCell, CvTable, GridSearchSpec};
pub use hellinger::{conditional_hellinger, hellinger_1d, EvalProtocol};
pub use metrics::{
    avg_log_likelihood, evaluate, rmse_mean, rmse_std, summarize_metric, MetricSummary,
    MetricsReport,
};
pub use nelder_mead::{nelder_mead, NmOptions};
