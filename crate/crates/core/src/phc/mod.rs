//! Facility model: stations, routing, priority at the doctor and state observation.

mod facility;
mod records;
mod types;

pub use facility::{route, BusyTime, ClassCounts, Entity, Facility, FacilityEvent, Scheduler, Station};
pub use records::write_patient_records;
pub use types::{
    BusyServer, ClassKind, FacilityConfig, FacilityState, PatientClass, PatientId, PatientRecord,
    StationId, StationServers, StationVisit, SubsystemState,
};
