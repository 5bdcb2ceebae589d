//! Error metrics, pose rareness and the train/test protocols.

mod metrics;
mod rare;
mod report;
mod split;

pub use metrics::{
    joint_errors, mpjpe, pa_mpjpe, pck, pck_auc, procrustes, Alignment, Pose3, AUC_THRESHOLDS,
    PCK_THRESHOLD,
};
pub use rare::{
    occurrence, occurrences, pose_similarity, rank_by_occurrence, rare_count, rareness_deciles,
    select_rare, DEFAULT_SIGMA_MM,
};
pub use report::{MetricReport, MetricRow, SampleResult, CSV_HEADER};
pub use split::{build_split, ProtocolKind, ProtocolSpec, TestSet};
