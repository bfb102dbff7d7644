//! Experiment engine behind the command-line front end: repeated runs over
//! an epsilon grid, RMSE against a reference, cost summaries, rate fitting
//! and CSV output.

mod config;
mod csvio;
mod experiment;
mod rates;
mod reference;

pub use config::{build_model, ExperimentConfig, ModelSpec, Reference, ShippedModel};
pub use csvio::{
    emit_histogram, read_runs, read_summary, summarize, summarize_grouped, write_histogram,
    write_runs, write_summary, HistogramTable, RunRow, SummaryRow, HISTOGRAM_SCHEMA, RUNS_SCHEMA,
    SUMMARY_SCHEMA,
};
pub use experiment::{run_experiment, write_outputs, ExperimentReport, GridPoint};
pub use rates::{fit_cost_slope, least_squares_slope, theoretical_cost, CostSlopeFit, RateMethod};
pub use reference::{
    empirical_quantile, exact_qoi_sample, measured_work_exponent, reference_from_sample,
};
