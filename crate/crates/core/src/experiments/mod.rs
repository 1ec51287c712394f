//! Scenario files, replication orchestration and outcome reporting.

mod config;
mod outcomes;
mod report;
mod runner;

pub use config::{ScenarioConfig, DEFAULT_TRAVEL_ALTERNATE, DEFAULT_TRAVEL_PREFERRED};
pub use outcomes::{beta_diverted, delta_net, metric_names, replication_metrics, write_outcomes, OutcomeStats};
pub use report::{merge_summaries, read_summary, write_mape_csv, write_mape_markdown, SummaryTable};
pub use runner::{
    compliance_sweep, load_model, run_replication, run_scenario, write_scenario_outputs, write_sweep, ReplicationOutput,
    RunOptions, ScenarioResult,
};
