use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::phc::types::{
    BusyServer, ClassKind, FacilityConfig, FacilityState, PatientId, PatientRecord, StationId,
    StationVisit, SubsystemState,
};
use crate::sim::{RngStreams, SimTime, StreamKey};

/// Events handled by one facility.
#[derive(Clone, Debug)]
pub enum FacilityEvent {
    /// An outpatient reaches the facility after travelling.
    OutpatientArrival { patient: Box<PatientRecord> },
    PriorityArrival { class: ClassKind },
    ServiceEnd { station: StationId, server: usize },
}

impl FacilityEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            FacilityEvent::OutpatientArrival { .. } => "op_arrival",
            FacilityEvent::PriorityArrival { class: ClassKind::Inpatient } => "ip_arrival",
            FacilityEvent::PriorityArrival { .. } => "cbp_arrival",
            FacilityEvent::ServiceEnd { .. } => "service_end",
        }
    }

    pub fn station(&self) -> Option<StationId> {
        match self {
            FacilityEvent::ServiceEnd { station, .. } => Some(*station),
            _ => None,
        }
    }

    pub fn entity(&self) -> Option<u64> {
        match self {
            FacilityEvent::OutpatientArrival { patient } => Some(patient.id),
            _ => None,
        }
    }
}

/// Receives the events a facility wants scheduled.
pub trait Scheduler {
    fn schedule(&mut self, at: SimTime, event: FacilityEvent) -> Result<()>;
}

/// Someone occupying a queue slot or a server.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entity {
    Outpatient(PatientId),
    Priority { id: u64, class: ClassKind, service: f64 },
}

impl Entity {
    pub fn class(&self) -> ClassKind {
        match self {
            Entity::Outpatient(_) => ClassKind::Outpatient,
            Entity::Priority { class, .. } => *class,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct InService {
    entity: Entity,
    start: SimTime,
    end: SimTime,
}

/// One station: a high-priority band served before the normal band, both FIFO.
#[derive(Clone, Debug)]
pub struct Station {
    id: StationId,
    high: VecDeque<Entity>,
    normal: VecDeque<Entity>,
    servers: Vec<Option<InService>>,
}

impl Station {
    pub fn new(id: StationId, servers: usize) -> Self {
        Station {
            id,
            high: VecDeque::new(),
            normal: VecDeque::new(),
            servers: vec![None; servers],
        }
    }

    /// Queues `entity` behind every waiting entity of its band; returns its
    /// zero-based position in the combined queue.
    pub fn enqueue_with_priority(&mut self, entity: Entity) -> usize {
        if entity.class().is_priority() {
            self.high.push_back(entity);
            self.high.len() - 1
        } else {
            self.normal.push_back(entity);
            self.high.len() + self.normal.len() - 1
        }
    }

    /// Waiting entities in service order.
    pub fn queue(&self) -> impl Iterator<Item = &Entity> {
        self.high.iter().chain(self.normal.iter())
    }

    pub fn queue_len(&self) -> usize {
        self.high.len() + self.normal.len()
    }

    pub fn busy_count(&self) -> usize {
        self.servers.iter().filter(|s| s.is_some()).count()
    }

    fn pop_next(&mut self) -> Option<Entity> {
        self.high.pop_front().or_else(|| self.normal.pop_front())
    }

    fn idle_server(&self) -> Option<usize> {
        self.servers.iter().position(Option::is_none)
    }

    fn observe(&self, now: SimTime) -> SubsystemState {
        let mut s = SubsystemState::empty(self.id, self.servers.len(), now);
        for e in self.queue() {
            match e.class() {
                ClassKind::Outpatient => s.queue_outpatient += 1,
                ClassKind::Inpatient => s.queue_inpatient += 1,
                ClassKind::Childbirth => s.queue_childbirth += 1,
            }
        }
        s.busy = self
            .servers
            .iter()
            .flatten()
            .map(|b| BusyServer {
                elapsed: (now - b.start).max(0.0),
                class: b.entity.class(),
            })
            .collect();
        s
    }
}

/// Next station of an outpatient after `completed`, or `None` to leave.
///
/// The laboratory decision is fixed on the record when the patient arrives.
pub fn route(
    patient: &PatientRecord,
    completed: Option<StationId>,
    ncd_age_threshold: f64,
) -> Option<StationId> {
    match completed {
        None if patient.age >= ncd_age_threshold => Some(StationId::NcdNurse),
        None | Some(StationId::NcdNurse) => Some(StationId::Doctor),
        Some(StationId::Doctor) if patient.visits_lab => Some(StationId::Laboratory),
        Some(StationId::Doctor) | Some(StationId::Laboratory) => Some(StationId::Pharmacy),
        Some(StationId::Pharmacy) => None,
    }
}

/// Busy time per station over services that started inside the measured period.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BusyTime {
    pub minutes: [f64; 4],
    pub services: [u64; 4],
}

/// Per-class arrival and exit counts of entities that entered a modelled queue.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassCounts {
    pub arrived: [u64; 3],
    pub exited: [u64; 3],
    /// Priority arrivals outside OPD hours, never queued.
    pub bypassed: [u64; 3],
}

fn class_slot(class: ClassKind) -> usize {
    match class {
        ClassKind::Outpatient => 0,
        ClassKind::Inpatient => 1,
        ClassKind::Childbirth => 2,
    }
}

/// A primary health centre: four stations plus its own inpatient and
/// childbirth arrival processes.
#[derive(Clone, Debug)]
pub struct Facility {
    id: usize,
    config: Arc<FacilityConfig>,
    stations: [Station; 4],
    patients: HashMap<PatientId, PatientRecord>,
    rng: RngStreams,
    next_priority_id: u64,
    stats_from: SimTime,
    arrivals_until: SimTime,
    busy: BusyTime,
    counts: ClassCounts,
    exits: Vec<PatientRecord>,
}

impl Facility {
    /// Priority ids live above this offset so they never collide with outpatients.
    pub const PRIORITY_ID_BASE: u64 = 1 << 62;

    pub fn new(id: usize, config: Arc<FacilityConfig>, seed: u64) -> Result<Self> {
        config.validate()?;
        let stations = StationId::ALL.map(|s| Station::new(s, config.servers.get(s)));
        Ok(Facility {
            id,
            config,
            stations,
            patients: HashMap::new(),
            rng: RngStreams::new(seed),
            next_priority_id: Self::PRIORITY_ID_BASE,
            stats_from: SimTime::ZERO,
            arrivals_until: SimTime::new(f64::MAX),
            busy: BusyTime::default(),
            counts: ClassCounts::default(),
            exits: Vec::new(),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn config(&self) -> &FacilityConfig {
        &self.config
    }

    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id.index()]
    }

    /// Busy time is only accumulated for services starting at or after `t`.
    pub fn set_stats_from(&mut self, t: SimTime) {
        self.stats_from = t;
    }

    /// No priority arrivals are generated after `t`.
    pub fn set_arrivals_until(&mut self, t: SimTime) {
        self.arrivals_until = t;
    }

    pub fn busy_time(&self) -> &BusyTime {
        &self.busy
    }

    pub fn counts(&self) -> &ClassCounts {
        &self.counts
    }

    /// Entities currently queued or in service, per class slot.
    pub fn in_system(&self) -> [u64; 3] {
        let mut n = [0u64; 3];
        for st in &self.stations {
            for e in st.queue() {
                n[class_slot(e.class())] += 1;
            }
            for b in st.servers.iter().flatten() {
                n[class_slot(b.entity.class())] += 1;
            }
        }
        n
    }

    pub fn outpatients_present(&self) -> usize {
        self.patients.len()
    }

    /// Records of outpatients who left since the last call.
    pub fn drain_exits(&mut self) -> std::vec::Drain<'_, PatientRecord> {
        self.exits.drain(..)
    }

    pub fn has_exits(&self) -> bool {
        !self.exits.is_empty()
    }

    /// Schedules the first inpatient and childbirth arrivals after `now`.
    pub fn start(&mut self, now: SimTime, sched: &mut impl Scheduler) -> Result<()> {
        for class in [ClassKind::Inpatient, ClassKind::Childbirth] {
            self.schedule_priority_arrival(now, class, sched)?;
        }
        Ok(())
    }

    fn schedule_priority_arrival(
        &mut self,
        now: SimTime,
        class: ClassKind,
        sched: &mut impl Scheduler,
    ) -> Result<()> {
        let dist = match class {
            ClassKind::Inpatient => self.config.inpatient_interarrival,
            _ => self.config.childbirth_interarrival,
        };
        let key = StreamKey::Arrivals {
            facility: self.id as u16,
            class: class_slot(class) as u8,
        };
        let at = now + dist.sample(self.rng.stream(key));
        if at <= self.arrivals_until {
            sched.schedule(at, FacilityEvent::PriorityArrival { class })?;
        }
        Ok(())
    }

    pub fn observe(&self, now: SimTime) -> FacilityState {
        FacilityState {
            facility: self.id,
            stations: [0, 1, 2, 3].map(|i| self.stations[i].observe(now)),
        }
    }

    pub fn handle(
        &mut self,
        now: SimTime,
        event: FacilityEvent,
        sched: &mut impl Scheduler,
    ) -> Result<()> {
        match event {
            FacilityEvent::OutpatientArrival { patient } => self.admit(now, *patient, sched),
            FacilityEvent::PriorityArrival { class } => {
                self.schedule_priority_arrival(now, class, sched)?;
                if !self.config.in_opd_hours(now) {
                    self.counts.bypassed[class_slot(class)] += 1;
                    return Ok(());
                }
                let key = StreamKey::Service {
                    facility: self.id as u16,
                    station: StationId::Doctor.index() as u8,
                };
                let service = self.config.doctor_service(class).sample(self.rng.stream(key));
                let id = self.next_priority_id;
                self.next_priority_id += 1;
                self.counts.arrived[class_slot(class)] += 1;
                self.enter(now, StationId::Doctor, Entity::Priority { id, class, service }, sched)
            }
            FacilityEvent::ServiceEnd { station, server } => self.finish(now, station, server, sched),
        }
    }

    fn admit(&mut self, now: SimTime, mut patient: PatientRecord, sched: &mut impl Scheduler) -> Result<()> {
        patient.arrival = now.minutes();
        patient.visited = self.id;
        patient.visits_lab = PatientRecord::draws_lab(patient.seed, self.config.lab_visit_prob);
        let id = patient.id;
        let first = route(&patient, None, self.config.ncd_age_threshold)
            .expect("every outpatient visits at least one station");
        if self.patients.insert(id, patient).is_some() {
            return Err(Error::Data(format!("patient {id} admitted twice")));
        }
        self.counts.arrived[0] += 1;
        self.enter(now, first, Entity::Outpatient(id), sched)
    }

    fn enter(&mut self, now: SimTime, station: StationId, entity: Entity, sched: &mut impl Scheduler) -> Result<()> {
        if let Entity::Outpatient(id) = entity {
            let rec = self.patients.get_mut(&id).expect("queued outpatient is present");
            rec.visits[station.index()] = Some(StationVisit {
                enter: now.minutes(),
                start: f64::NAN,
                end: f64::NAN,
            });
        }
        self.stations[station.index()].enqueue_with_priority(entity);
        self.start_services(now, station, sched)
    }

    fn start_services(&mut self, now: SimTime, station: StationId, sched: &mut impl Scheduler) -> Result<()> {
        loop {
            let st = &mut self.stations[station.index()];
            let Some(server) = st.idle_server() else {
                return Ok(());
            };
            let Some(entity) = st.pop_next() else {
                return Ok(());
            };
            let duration = match entity {
                Entity::Priority { service, .. } => service,
                Entity::Outpatient(id) => {
                    let rec = self.patients.get_mut(&id).expect("queued outpatient is present");
                    let visit = rec.visits[station.index()].as_mut().expect("entered station");
                    visit.start = now.minutes();
                    rec.service_requirement(station, self.config.outpatient_service(station))
                }
            };
            let end = now + duration;
            self.stations[station.index()].servers[server] = Some(InService {
                entity,
                start: now,
                end,
            });
            sched.schedule(end, FacilityEvent::ServiceEnd { station, server })?;
        }
    }

    fn finish(&mut self, now: SimTime, station: StationId, server: usize, sched: &mut impl Scheduler) -> Result<()> {
        let done = self.stations[station.index()]
            .servers
            .get_mut(server)
            .and_then(Option::take)
            .ok_or_else(|| Error::Data(format!("service end on idle {station} server {server}")))?;
        if done.start >= self.stats_from {
            self.busy.minutes[station.index()] += done.end - done.start;
            self.busy.services[station.index()] += 1;
        }
        match done.entity {
            Entity::Priority { class, .. } => self.counts.exited[class_slot(class)] += 1,
            Entity::Outpatient(id) => {
                let rec = self.patients.get_mut(&id).expect("served outpatient is present");
                rec.visits[station.index()].as_mut().expect("entered station").end = now.minutes();
                match route(rec, Some(station), self.config.ncd_age_threshold) {
                    Some(next) => self.enter(now, next, Entity::Outpatient(id), sched)?,
                    None => {
                        let mut rec = self.patients.remove(&id).expect("present");
                        rec.exit = Some(now.minutes());
                        self.counts.exited[0] += 1;
                        self.exits.push(rec);
                    }
                }
            }
        }
        self.start_services(now, station, sched)
    }

    /// Busy fraction of scheduled OPD time at `station` over `measured_days`.
    pub fn utilization(&self, station: StationId, measured_days: f64) -> Result<f64> {
        let scheduled = self.config.opd_minutes * measured_days;
        if !(scheduled > 0.0) {
            return Err(Error::Data("utilization over zero scheduled time".into()));
        }
        Ok(self.busy.minutes[station.index()] / scheduled)
    }
}
