//! Matching, scoring, the end-to-end pipeline, and plot output.

mod matching;
mod pipeline;
mod plot;
mod predictions;
mod report;
pub mod surrogate;

pub use matching::{match_events, overlap, Matching};
pub use pipeline::{
    attach_labels, classify_events, detect_stage, preprocess_stage, run_pipeline, PipelineConfig,
};
pub use plot::{load_series, read_series, render_svg, write_series, Series};
pub use predictions::{load_predictions, read_predictions, save_predictions, write_predictions, ClassedEvent};
pub use report::{
    evaluate, load_report, read_report, save_report, write_report, Confusion, EvalReport, EvalTally, LaneReport,
    MatchedPrediction, RepeatSummary, SchemeAccuracy,
};
