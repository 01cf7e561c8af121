//! Detection metrics and evaluation protocols.

mod metrics;
mod protocols;

pub use metrics::{
    auc, auc_grid, confusion, f1_score, metrics_report, precision_recall_f1, ConfusionCounts, MetricsReport,
    PrecisionRecall,
};
pub use protocols::{
    detect, reliability_resample, robustness_sweep, summarize, write_sweep_csv, Detection, ReliabilityReport,
    Summary, SweepRow, DEFAULT_ALPHAS,
};
