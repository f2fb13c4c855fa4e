//! Evaluation of detected events against expert annotations.

pub mod detection;
pub mod impact;
pub mod tagging;

pub use detection::{
    classify_detection, detection_records, DetectionRecord, DetectionSummary, DetectionType,
    TimingOffsetStats,
};
pub use impact::{
    heuristic_flags, impact_tables, DetectionRatioRow, HeuristicConfig, HeuristicFlag, ImpactCoRow,
    ImpactLink, ImpactLinks, ImpactTable,
};
pub use tagging::{tag_events, ConfusionCounts, EventTag, RateMetrics, TagOutcome};
