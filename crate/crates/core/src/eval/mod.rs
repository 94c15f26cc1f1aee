//! Costmap scoring against semantic ground truth and navigation trials.

pub mod metrics;
pub mod navigation;
pub mod planner;
pub mod report;

pub use metrics::{auc, binarize_ground_truth, costmap_metrics, roc_curve, BinaryGroundTruth, CostmapMetrics, RocPoint};
pub use navigation::{navigation_metrics, run_trial, run_trials, semantic_costmap, NavigationMetrics, TrialResult, TrialSpec};
pub use planner::{plan_path, PlannedPath, PlannerParams};
