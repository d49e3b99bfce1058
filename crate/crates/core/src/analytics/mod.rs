//! Offline analysis of exported activity and survey data.

pub mod edits;
pub mod metrics;
pub mod report;
pub mod special;
pub mod stats;
pub mod survey;

pub use edits::{detect_edit_changes, ChangeKind, EditOutcome, DEFAULT_PAIRING_WINDOW_MINUTES};
pub use metrics::{compute_user_metrics, metrics_from_export, Group, MetricsConfig, UserMetrics};
pub use report::{
    analyze_events, analyze_summaries, read_summaries, read_summaries_from_path, render_report, AnalysisConfig, Descriptive,
    RenderedReport, Report, SummaryRow, Totals, VariableResult, VARIABLES,
};
pub use stats::{levene_test, pooled_t_test, summarize, GroupComparison, GroupSummary, LeveneResult};
pub use survey::{
    cronbach_alpha, read_survey, read_survey_from_path, score_survey, ConstructScore, ReliabilityResult,
    SurveyFile, SurveyItemResponse, SurveyScores, ALPHA_THRESHOLD,
};
