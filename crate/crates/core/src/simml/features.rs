use crate::aqt::{net_remaining, predict_facility, server_progress, AqtParams, LabRoute};
use crate::error::Result;
use crate::phc::{ClassKind, FacilityState, StationId};

/// Version tag written into dataset headers and model files.
pub const SCHEMA_VERSION: &str = "v1";

/// Feature names in vector order.
pub const FEATURE_NAMES: [&str; 22] = [
    "delta",
    "age_ge_threshold",
    "lab_route",
    "ncd_queue",
    "ncd_remaining",
    "ncd_queue_at_arrival",
    "ncd_remaining_at_arrival",
    "doc_queue_op",
    "doc_queue_ip",
    "doc_queue_cbp",
    "doc_remaining",
    "doc_queue_op_at_arrival",
    "doc_queue_priority_at_arrival",
    "doc_remaining_at_arrival",
    "lab_queue",
    "lab_remaining",
    "lab_queue_at_arrival",
    "lab_remaining_at_arrival",
    "phar_queue",
    "phar_remaining",
    "phar_queue_at_arrival",
    "phar_remaining_at_arrival",
];

pub const FEATURE_COUNT: usize = FEATURE_NAMES.len();

/// Position of the laboratory-route flag.
pub const LAB_ROUTE_INDEX: usize = 2;

/// Observed and projected state of one candidate facility for one patient.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn with_lab_route(&self, visits_lab: bool) -> FeatureVector {
        let mut v = self.0.clone();
        v[LAB_ROUTE_INDEX] = f64::from(u8::from(visits_lab));
        FeatureVector(v)
    }
}

/// Builds the feature vector of a patient of `age` travelling `delta` minutes
/// to the facility observed in `state`.
pub fn extract_features(
    state: &FacilityState,
    delta: f64,
    age: f64,
    visits_lab: bool,
    params: &AqtParams,
) -> Result<FeatureVector> {
    let projected = predict_facility(state, delta, age, LabRoute::Expected, params)?;
    let remaining_now = |station: StationId| -> Result<f64> {
        let dist = match station {
            StationId::NcdNurse => params.ncd_service,
            StationId::Doctor => params.doctor_outpatient,
            StationId::Laboratory => params.lab_service,
            StationId::Pharmacy => params.pharmacy_service,
        };
        let progress = server_progress(state.get(station), |c| match (station, c) {
            (StationId::Doctor, ClassKind::Inpatient) => params.doctor_inpatient,
            (StationId::Doctor, ClassKind::Childbirth) => params.doctor_childbirth,
            _ => dist,
        })?;
        Ok(net_remaining(&progress))
    };
    let ncd = state.get(StationId::NcdNurse);
    let doc = state.get(StationId::Doctor);
    let lab = state.get(StationId::Laboratory);
    let phar = state.get(StationId::Pharmacy);
    // Screening projections are only computed for patients who are screened.
    let ncd_projection = if projected.visits_ncd {
        projected.ncd
    } else {
        crate::aqt::predict_los_ncd(ncd, delta, params)?
    };
    let v = vec![
        delta,
        f64::from(u8::from(age >= params.ncd_age_threshold)),
        f64::from(u8::from(visits_lab)),
        ncd.queue_total() as f64,
        remaining_now(StationId::NcdNurse)?,
        ncd_projection.queue_len,
        ncd_projection.remaining,
        doc.queue_outpatient as f64,
        doc.queue_inpatient as f64,
        doc.queue_childbirth as f64,
        remaining_now(StationId::Doctor)?,
        projected.doctor.outpatient_queue,
        projected.doctor.priority_queue,
        projected.doctor.remaining,
        lab.queue_total() as f64,
        remaining_now(StationId::Laboratory)?,
        projected.lab.queue_len,
        projected.lab.remaining,
        phar.queue_total() as f64,
        remaining_now(StationId::Pharmacy)?,
        projected.pharmacy.queue_len,
        projected.pharmacy.remaining,
    ];
    debug_assert_eq!(v.len(), FEATURE_COUNT);
    Ok(FeatureVector(v))
}
