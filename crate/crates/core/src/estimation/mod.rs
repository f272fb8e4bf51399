//! Parameter recovery from reported incidence plus a survey.
//!
//! Reported data yield two summaries, the early growth rate and the final
//! reported fraction. Together with the known recovery rate they pin down
//! `beta*(1 - pi)` and `p (1 - pi)`; a survey of either `pi` or `p` then
//! fixes the remaining two parameters.

mod final_size;
mod growth;
mod inversion;
mod survey;

pub use final_size::{predicted_reported_final_size, solve_final_size, solve_reported_final_size, FinalSizeRoot};
pub use growth::{
    deterministic_reported_times, fit_growth_rate, fit_log_cumulative, ols, GrowthFit, DEFAULT_GROWTH_THRESHOLD,
};
pub use inversion::{estimate_remaining, EstimationResult, SummaryStats, Supplied};
pub use survey::{
    draw_without_replacement, peak_state, survey_immunity, survey_reporting_at_peak, PeakScope, SurveyEstimate,
    SurveyKind,
};
