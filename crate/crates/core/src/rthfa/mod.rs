//! Real-time assignment of outpatients across a network of facilities.

mod assign;
mod calibrate;
mod demand;
mod network;
mod oracle;

pub use assign::{choose_facility, comply, write_decisions, AssignmentDecision, CandidateScore, PredictorKind};
pub use calibrate::{effective_lambda, write_lambda_trace, LambdaCalibration};
pub use demand::{draw_outpatient, next_demand_time};
pub use network::{
    run_network, CalibrationSettings, LambdaPoint, NetEvent, Network, NetworkConfig, NetworkRun, Predictor,
    MAX_INTERARRIVAL,
};
pub use oracle::{actual_los_oracle, SyntheticDemand, SYNTHETIC_ID_BASE};
