//! Dataset preparation and the evaluation suite.

mod capacity;
mod dataset;
mod metrics;
mod misclass;
mod report;
mod throughput;

pub use capacity::{capacity_plan, CapacityError, CapacityPlan, HOURS_PER_MONTH};
pub use dataset::{
    parse_annotation_file, stratified_split, write_annotation_file, AnnotationError, DatasetError, DatasetManifest,
    ManifestEntry, SplitSpec, NORMAL_ACTION_NAMES,
};
pub use metrics::{
    class_metrics, confusion_from_records, macro_metrics, percent, ClassMetrics, ConfusionMatrix, MacroMetrics,
    MetricsError,
};
pub use misclass::{misclass_breakdown, EvalRecord, MisclassBreakdown};
pub use report::{tradeoff_report, TradeoffReport, TradeoffRow};
pub use throughput::{measure_throughput, ChunkSample, ThroughputError, ThroughputReport, MIN_THROUGHPUT_SAMPLES};
