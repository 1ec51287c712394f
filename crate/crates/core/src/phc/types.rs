use std::fmt;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{SimTime, ServiceDistribution};

pub type PatientId = u64;

/// The four stations an outpatient can pass through, in routing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StationId {
    NcdNurse,
    Doctor,
    Laboratory,
    Pharmacy,
}

impl StationId {
    pub const ALL: [StationId; 4] = [
        StationId::NcdNurse,
        StationId::Doctor,
        StationId::Laboratory,
        StationId::Pharmacy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<StationId> {
        StationId::ALL.get(i).copied()
    }

    /// Short label used in CSV headers and traces.
    pub fn label(self) -> &'static str {
        match self {
            StationId::NcdNurse => "ncd",
            StationId::Doctor => "doc",
            StationId::Laboratory => "lab",
            StationId::Pharmacy => "phar",
        }
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PatientClass {
    Outpatient { age: f64 },
    Inpatient,
    Childbirth,
}

impl PatientClass {
    pub fn kind(self) -> ClassKind {
        match self {
            PatientClass::Outpatient { .. } => ClassKind::Outpatient,
            PatientClass::Inpatient => ClassKind::Inpatient,
            PatientClass::Childbirth => ClassKind::Childbirth,
        }
    }
}

/// Patient class without per-patient attributes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    Outpatient,
    Inpatient,
    Childbirth,
}

impl ClassKind {
    pub fn is_priority(self) -> bool {
        !matches!(self, ClassKind::Outpatient)
    }
}

/// Number of servers at each station.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationServers {
    pub ncd: usize,
    pub doctor: usize,
    pub lab: usize,
    pub pharmacy: usize,
}

impl Default for StationServers {
    fn default() -> Self {
        StationServers {
            ncd: 1,
            doctor: 1,
            lab: 1,
            pharmacy: 1,
        }
    }
}

impl StationServers {
    pub fn get(&self, station: StationId) -> usize {
        match station {
            StationId::NcdNurse => self.ncd,
            StationId::Doctor => self.doctor,
            StationId::Laboratory => self.lab,
            StationId::Pharmacy => self.pharmacy,
        }
    }
}

/// Arrival and service processes of one facility. Defaults are the
/// primary-health-centre estimates with an outpatient interarrival of 9 min.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FacilityConfig {
    pub name: String,
    /// Outpatient demand of this facility's catchment.
    pub outpatient_interarrival: ServiceDistribution,
    pub inpatient_interarrival: ServiceDistribution,
    pub childbirth_interarrival: ServiceDistribution,
    pub doctor_outpatient: ServiceDistribution,
    pub doctor_inpatient: ServiceDistribution,
    pub doctor_childbirth: ServiceDistribution,
    pub ncd_service: ServiceDistribution,
    pub lab_service: ServiceDistribution,
    pub pharmacy_service: ServiceDistribution,
    pub servers: StationServers,
    pub lab_visit_prob: f64,
    /// Fraction of outpatients at or above the screening age.
    pub ncd_fraction: f64,
    pub ncd_age_threshold: f64,
    pub opd_minutes: f64,
}

impl Default for FacilityConfig {
    fn default() -> Self {
        FacilityConfig {
            name: "PHC".to_string(),
            outpatient_interarrival: ServiceDistribution::exponential(9.0),
            inpatient_interarrival: ServiceDistribution::exponential(2880.0),
            childbirth_interarrival: ServiceDistribution::exponential(2880.0),
            doctor_outpatient: ServiceDistribution::gaussian(0.87, 0.21),
            doctor_inpatient: ServiceDistribution::uniform(10.0, 30.0),
            doctor_childbirth: ServiceDistribution::uniform(30.0, 60.0),
            ncd_service: ServiceDistribution::uniform(2.0, 5.0),
            lab_service: ServiceDistribution::gaussian(3.45, 0.83),
            pharmacy_service: ServiceDistribution::gaussian(2.08, 0.72),
            servers: StationServers::default(),
            lab_visit_prob: 0.5,
            ncd_fraction: 0.5,
            ncd_age_threshold: 30.0,
            opd_minutes: 480.0,
        }
    }
}

impl FacilityConfig {
    pub fn with_outpatient_interarrival(name: &str, mean: f64) -> Self {
        FacilityConfig {
            name: name.to_string(),
            outpatient_interarrival: ServiceDistribution::exponential(mean),
            ..FacilityConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for d in [
            &self.outpatient_interarrival,
            &self.inpatient_interarrival,
            &self.childbirth_interarrival,
            &self.doctor_outpatient,
            &self.doctor_inpatient,
            &self.doctor_childbirth,
            &self.ncd_service,
            &self.lab_service,
            &self.pharmacy_service,
        ] {
            d.validate()?;
        }
        for p in [self.lab_visit_prob, self.ncd_fraction] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "{}: probability {p} outside [0, 1]",
                    self.name
                )));
            }
        }
        if StationId::ALL.iter().any(|&s| self.servers.get(s) == 0) {
            return Err(Error::Config(format!("{}: every station needs a server", self.name)));
        }
        if !(self.opd_minutes > 0.0 && self.opd_minutes <= crate::sim::DAY_MINUTES) {
            return Err(Error::Config(format!(
                "{}: OPD window {} min is not within one day",
                self.name, self.opd_minutes
            )));
        }
        if !(self.ncd_age_threshold >= 0.0) {
            return Err(Error::Config(format!("{}: negative screening age", self.name)));
        }
        Ok(())
    }

    /// Outpatient service-time distribution at `station`.
    pub fn outpatient_service(&self, station: StationId) -> &ServiceDistribution {
        match station {
            StationId::NcdNurse => &self.ncd_service,
            StationId::Doctor => &self.doctor_outpatient,
            StationId::Laboratory => &self.lab_service,
            StationId::Pharmacy => &self.pharmacy_service,
        }
    }

    pub fn doctor_service(&self, class: ClassKind) -> &ServiceDistribution {
        match class {
            ClassKind::Outpatient => &self.doctor_outpatient,
            ClassKind::Inpatient => &self.doctor_inpatient,
            ClassKind::Childbirth => &self.doctor_childbirth,
        }
    }

    /// Mean outpatient interarrival time of the catchment, minutes.
    pub fn outpatient_mean_interarrival(&self) -> f64 {
        self.outpatient_interarrival.mean()
    }

    /// Whether `at` falls inside the daily outpatient window.
    pub fn in_opd_hours(&self, at: SimTime) -> bool {
        at.time_of_day() < self.opd_minutes
    }
}

/// Queue-entry, service-start and service-end instants at one station.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StationVisit {
    pub enter: f64,
    pub start: f64,
    pub end: f64,
}

impl StationVisit {
    pub fn wait(&self) -> f64 {
        self.start - self.enter
    }

    pub fn sojourn(&self) -> f64 {
        self.end - self.enter
    }
}

/// Everything known about one outpatient visit.
#[derive(Clone, Debug, PartialEq)]
pub struct PatientRecord {
    pub id: PatientId,
    pub age: f64,
    pub origin: usize,
    pub preferred: usize,
    pub visited: usize,
    pub decision_time: f64,
    pub arrival: f64,
    pub visits: [Option<StationVisit>; 4],
    pub exit: Option<f64>,
    /// Seed of the patient's own service requirements.
    pub seed: u64,
    pub visits_lab: bool,
    /// Features observed at the decision instant, when dataset collection is on.
    pub decision_features: Option<Vec<f64>>,
    /// Subsystem predictions (ncd, doctor, lab, pharmacy) at the decision instant.
    pub aqt_prediction: Option<[f64; 4]>,
}

impl PatientRecord {
    pub fn new(id: PatientId, age: f64, origin: usize, seed: u64) -> Self {
        PatientRecord {
            id,
            age,
            origin,
            preferred: origin,
            visited: origin,
            decision_time: 0.0,
            arrival: 0.0,
            visits: [None; 4],
            exit: None,
            seed,
            visits_lab: false,
            decision_features: None,
            aqt_prediction: None,
        }
    }

    pub fn class(&self) -> PatientClass {
        PatientClass::Outpatient { age: self.age }
    }

    pub fn los(&self) -> Option<f64> {
        self.exit.map(|e| e - self.arrival)
    }

    pub fn visit(&self, station: StationId) -> Option<&StationVisit> {
        self.visits[station.index()].as_ref()
    }

    /// Deterministic lab decision for this patient at a facility with visit
    /// probability `p`.
    pub fn draws_lab(seed: u64, p: f64) -> bool {
        requirement_rng(seed, 4).gen::<f64>() < p
    }

    /// The patient's own service requirement at `station` under `dist`.
    ///
    /// Drawn from a generator keyed by the patient and station, so the same
    /// patient needs the same time at any facility with the same distribution.
    pub fn service_requirement(&self, station: StationId, dist: &ServiceDistribution) -> f64 {
        dist.sample(&mut requirement_rng(self.seed, station.index() as u64))
    }
}

fn requirement_rng(seed: u64, slot: u64) -> Pcg64 {
    Pcg64::seed_from_u64(crate::sim::derive_seed(
        seed,
        crate::sim::StreamKey::Routing { facility: u16::MAX },
        slot,
    ))
}

/// An entity in service at an observed station.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BusyServer {
    pub elapsed: f64,
    pub class: ClassKind,
}

/// Observation of one station at an instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsystemState {
    pub station: StationId,
    pub queue_outpatient: usize,
    pub queue_inpatient: usize,
    pub queue_childbirth: usize,
    pub servers: usize,
    pub busy: Vec<BusyServer>,
    pub observed_at: SimTime,
}

impl SubsystemState {
    pub fn empty(station: StationId, servers: usize, at: SimTime) -> Self {
        SubsystemState {
            station,
            queue_outpatient: 0,
            queue_inpatient: 0,
            queue_childbirth: 0,
            servers,
            busy: Vec::new(),
            observed_at: at,
        }
    }

    pub fn queue_priority(&self) -> usize {
        self.queue_inpatient + self.queue_childbirth
    }

    pub fn queue_total(&self) -> usize {
        self.queue_outpatient + self.queue_priority()
    }

    /// Elapsed service time of the first busy server, 0 when idle.
    pub fn elapsed_service(&self) -> f64 {
        self.busy.first().map_or(0.0, |b| b.elapsed)
    }

    pub fn any_idle(&self) -> bool {
        self.busy.len() < self.servers
    }
}

/// Per-station observation of a whole facility.
#[derive(Clone, Debug, PartialEq)]
pub struct FacilityState {
    pub facility: usize,
    pub stations: [SubsystemState; 4],
}

impl FacilityState {
    pub fn get(&self, station: StationId) -> &SubsystemState {
        &self.stations[station.index()]
    }
}
