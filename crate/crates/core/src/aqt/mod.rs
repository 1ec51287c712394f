//! Analytical length-of-stay predictor built from per-station queue projections.

mod extrapolate;
mod predictors;
mod remaining;
mod trace;

pub use extrapolate::{
    expected_arrivals, extrapolate_mgm, future_remaining, net_remaining, server_progress,
    ExtrapolatedState, ServerProgress,
};
pub use predictors::{
    geometric_priority_delay, predict_facility, predict_los_doctor, predict_los_lab,
    predict_los_ncd, predict_los_pharmacy, total_los, AqtParams, DoctorExtrapolation,
    FacilityPrediction, LabRoute, LosPrediction,
};
pub use remaining::{band_anchors, remaining_service_time, remaining_service_time_exact, BandAnchors};
pub use trace::PredictionTraceWriter;
