//! Detection metrics, bpw sweeps and feature export.

mod metrics;
mod report;

pub use metrics::{f1_score, ClassScores, ConfusionMatrix, Metrics};
pub use report::{
    count_inversions, evaluate, evaluate_binary, evaluate_multiclass, export_features, format_feature, predict_argmax,
    predict_binary, sweep_bpw, write_features, SweepReport, SweepRow,
};
