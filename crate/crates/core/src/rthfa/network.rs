use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aqt::{predict_facility, AqtParams, LabRoute};
use crate::error::{Error, Result};
use crate::phc::{
    ClassCounts, Facility, FacilityConfig, FacilityEvent, PatientId, PatientRecord, Scheduler,
    StationId,
};
use crate::rthfa::assign::{choose_facility, comply, AssignmentDecision, CandidateScore, PredictorKind};
use crate::rthfa::demand::{draw_outpatient, next_demand_time};
use crate::rthfa::oracle::{actual_los_oracle, SyntheticDemand};
use crate::sim::{Kernel, Model, RngStreams, Scheduled, SimTime, StreamKey, TraceEvent, TraceFields};
use crate::simml::{extract_features, KnnModel};

/// Interarrival estimate used for a facility that received nobody in a window.
pub const MAX_INTERARRIVAL: f64 = 1e9;

/// Online estimation of the arrival rate each facility sees under assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSettings {
    pub window_days: f64,
    /// Convergence tolerance on every interarrival estimate, minutes.
    pub epsilon: f64,
    pub max_windows: usize,
    /// Multiplier on the initial estimate used as the "previous" value of the first window.
    pub init_multiplier: f64,
    /// Estimates freeze after this day; defaults to the end of warm-up.
    pub until_days: Option<f64>,
    /// Weight of the new window estimate; 1 replaces the old value outright.
    pub relaxation: f64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        CalibrationSettings {
            window_days: 90.0,
            epsilon: 0.1,
            max_windows: 8,
            init_multiplier: 2.0,
            until_days: None,
            relaxation: 1.0,
        }
    }
}

/// Everything that defines one network run apart from the seed.
#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub facilities: Vec<FacilityConfig>,
    /// Travel minutes, indexed `[origin][facility]`.
    pub travel: Vec<Vec<f64>>,
    pub predictor: PredictorKind,
    pub compliance: f64,
    pub warmup_days: f64,
    pub horizon_days: f64,
    pub calibration: Option<CalibrationSettings>,
    /// Interarrival times fed to the predictors before any calibration;
    /// defaults to each facility's own catchment demand.
    pub initial_interarrivals: Option<Vec<f64>>,
    pub doctor_departures: bool,
    pub oracle_guard_days: f64,
    /// Store decision-time features and analytical predictions on each record.
    pub collect_features: bool,
    pub collect_decisions: bool,
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let m = self.facilities.len();
        if m == 0 {
            return Err(Error::Config("network needs at least one facility".into()));
        }
        if m > u16::MAX as usize {
            return Err(Error::Config("too many facilities".into()));
        }
        for f in &self.facilities {
            f.validate()?;
        }
        if self.travel.len() != m || self.travel.iter().any(|row| row.len() != m) {
            return Err(Error::Config(format!("travel matrix must be {m} x {m}")));
        }
        if self.travel.iter().flatten().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config("travel times must be finite and non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.compliance) {
            return Err(Error::Config(format!("compliance {} outside [0, 1]", self.compliance)));
        }
        if !(self.warmup_days >= 0.0 && self.horizon_days >= self.warmup_days) {
            return Err(Error::Config("need 0 <= warm-up <= horizon".into()));
        }
        if let Some(c) = &self.calibration {
            if !(c.window_days > 0.0 && c.epsilon > 0.0 && c.max_windows > 0 && c.init_multiplier > 0.0) {
                return Err(Error::Config("calibration needs positive window, epsilon, windows and multiplier".into()));
            }
            if !(c.relaxation > 0.0 && c.relaxation <= 1.0) {
                return Err(Error::Config(format!("relaxation {} outside (0, 1]", c.relaxation)));
            }
        }
        if let Some(l) = &self.initial_interarrivals {
            if l.len() != m || l.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config(format!("need {m} positive initial interarrival times")));
            }
        }
        if !(self.oracle_guard_days > 0.0) {
            return Err(Error::Config("oracle guard must be positive".into()));
        }
        Ok(())
    }

    fn initial_params(&self, facility: usize) -> AqtParams {
        let mut p = AqtParams::from_config(&self.facilities[facility]);
        p.doctor_departures = self.doctor_departures;
        match &self.initial_interarrivals {
            Some(l) => p.with_outpatient_interarrival(l[facility]),
            None => p,
        }
    }
}

/// Length-of-stay source together with any trained state it needs.
#[derive(Clone, Debug)]
pub enum Predictor {
    None,
    Actual,
    Aqt,
    Simml(Arc<KnnModel>),
}

impl Predictor {
    pub fn new(kind: PredictorKind, model: Option<Arc<KnnModel>>) -> Result<Self> {
        Ok(match kind {
            PredictorKind::None => Predictor::None,
            PredictorKind::Actual => Predictor::Actual,
            PredictorKind::Aqt => Predictor::Aqt,
            PredictorKind::Simml => Predictor::Simml(
                model.ok_or_else(|| Error::Config("simml predictor needs a trained model".into()))?,
            ),
        })
    }
}

#[derive(Clone, Debug)]
pub enum NetEvent {
    /// An outpatient of this catchment asks where to go.
    Demand { origin: usize },
    Facility { facility: usize, event: FacilityEvent },
    CalibrationTick,
}

impl TraceEvent for NetEvent {
    fn trace_fields(&self) -> TraceFields {
        match self {
            NetEvent::Demand { origin } => TraceFields {
                kind: "demand",
                entity: None,
                station: None,
                facility: Some(*origin),
            },
            NetEvent::Facility { facility, event } => TraceFields {
                kind: event.kind(),
                entity: event.entity(),
                station: event.station().map(StationId::label),
                facility: Some(*facility),
            },
            NetEvent::CalibrationTick => TraceFields {
                kind: "calibration",
                ..TraceFields::default()
            },
        }
    }
}

struct NetScheduler<'a> {
    kernel: &'a mut Kernel<NetEvent>,
    facility: usize,
}

impl Scheduler for NetScheduler<'_> {
    fn schedule(&mut self, at: SimTime, event: FacilityEvent) -> Result<()> {
        self.kernel
            .schedule(at, NetEvent::Facility { facility: self.facility, event })
            .map(|_| ())
    }
}

/// One completed calibration window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaPoint {
    pub window: usize,
    pub day: f64,
    pub arrivals: Vec<u64>,
    pub interarrivals: Vec<f64>,
    pub max_change: f64,
}

/// Facilities, catchment demand and the assignment policy.
#[derive(Clone, Debug)]
pub struct Network {
    config: Arc<NetworkConfig>,
    predictor: Predictor,
    facilities: Vec<Facility>,
    rng: RngStreams,
    interarrivals: Vec<f64>,
    params: Vec<AqtParams>,
    window_arrivals: Vec<u64>,
    previous: Vec<f64>,
    lambda_trace: Vec<LambdaPoint>,
    converged_at: Option<usize>,
    calibrating: bool,
    next_patient: PatientId,
    decisions_made: u64,
    decisions: Vec<AssignmentDecision>,
    records: Vec<PatientRecord>,
    predictor_failures: u64,
    warmup_end: SimTime,
    horizon: SimTime,
}

impl Network {
    pub fn new(config: Arc<NetworkConfig>, predictor: Predictor, seed: u64) -> Result<Self> {
        config.validate()?;
        let m = config.facilities.len();
        let facilities = (0..m)
            .map(|j| Facility::new(j, Arc::new(config.facilities[j].clone()), seed))
            .collect::<Result<Vec<_>>>()?;
        let params: Vec<AqtParams> = (0..m).map(|j| config.initial_params(j)).collect();
        let interarrivals: Vec<f64> = params.iter().map(|p| p.outpatient_interarrival).collect();
        let multiplier = config.calibration.as_ref().map_or(1.0, |c| c.init_multiplier);
        Ok(Network {
            predictor,
            facilities,
            rng: RngStreams::new(seed),
            previous: interarrivals.iter().map(|l| l * multiplier).collect(),
            interarrivals,
            params,
            window_arrivals: vec![0; m],
            lambda_trace: Vec::new(),
            converged_at: None,
            calibrating: config.calibration.is_some(),
            next_patient: 0,
            decisions_made: 0,
            decisions: Vec::new(),
            records: Vec::new(),
            predictor_failures: 0,
            warmup_end: SimTime::from_days(config.warmup_days),
            horizon: SimTime::from_days(config.horizon_days),
            config,
        })
    }

    /// Seeds the calendar: first demand per catchment, priority arrivals and
    /// the first calibration tick.
    pub fn start(&mut self, kernel: &mut Kernel<NetEvent>) -> Result<()> {
        let now = kernel.now();
        for j in 0..self.facilities.len() {
            let f = &mut self.facilities[j];
            f.set_stats_from(self.warmup_end);
            f.set_arrivals_until(self.horizon);
            f.start(now, &mut NetScheduler { kernel, facility: j })?;
            self.schedule_demand(kernel, j, now)?;
        }
        if let Some(c) = &self.config.calibration {
            kernel.schedule(now + c.window_days * crate::sim::DAY_MINUTES, NetEvent::CalibrationTick)?;
        }
        Ok(())
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    /// Interarrival times the predictors currently assume.
    pub fn interarrivals(&self) -> &[f64] {
        &self.interarrivals
    }

    pub fn lambda_trace(&self) -> &[LambdaPoint] {
        &self.lambda_trace
    }

    pub fn converged_at(&self) -> Option<usize> {
        self.converged_at
    }

    pub fn is_calibrating(&self) -> bool {
        self.calibrating
    }

    pub fn predictor_failures(&self) -> u64 {
        self.predictor_failures
    }

    pub fn take_records(&mut self) -> Vec<PatientRecord> {
        std::mem::take(&mut self.records)
    }

    pub fn take_decisions(&mut self) -> Vec<AssignmentDecision> {
        std::mem::take(&mut self.decisions)
    }

    fn schedule_demand(&mut self, kernel: &mut Kernel<NetEvent>, origin: usize, from: SimTime) -> Result<()> {
        let cfg = &self.config.facilities[origin];
        let rng = self.rng.stream(StreamKey::Arrivals { facility: origin as u16, class: 0 });
        let mean = cfg.outpatient_mean_interarrival();
        if let Some(at) = next_demand_time(from, mean, cfg.opd_minutes, self.horizon, rng) {
            kernel.schedule(at, NetEvent::Demand { origin })?;
        }
        Ok(())
    }

    fn on_demand(&mut self, kernel: &mut Kernel<NetEvent>, origin: usize) -> Result<()> {
        let now = kernel.now();
        self.schedule_demand(kernel, origin, now)?;
        let id = self.next_patient;
        self.next_patient += 1;
        let rng = self.rng.stream(StreamKey::Routing { facility: origin as u16 });
        let mut patient = draw_outpatient(rng, id, origin, &self.config.facilities[origin]);
        patient.decision_time = now.minutes();
        let index = self.decisions_made;
        self.decisions_made += 1;

        let candidates = match self.predictor {
            Predictor::None => Vec::new(),
            _ => (0..self.facilities.len())
                .map(|j| {
                    let travel = self.config.travel[origin][j];
                    let predicted_los = match self.predict(kernel, &patient, j, travel, index) {
                        Ok(l) if l.is_finite() => Some(l),
                        _ => {
                            self.predictor_failures += 1;
                            None
                        }
                    };
                    CandidateScore { facility: j, travel, predicted_los }
                })
                .collect(),
        };
        let chosen = choose_facility(&candidates, origin);
        // Drawn for every decision so the stream stays aligned across policies.
        let (complied, visited) = comply(chosen, origin, self.config.compliance, self.rng.stream(StreamKey::Compliance));
        patient.visited = visited;
        let travel = self.config.travel[origin][visited];
        if self.config.collect_features {
            self.annotate(&mut patient, now, visited, travel)?;
        }
        if self.config.collect_decisions {
            self.decisions.push(AssignmentDecision {
                patient: id,
                time: now.minutes(),
                preferred: origin,
                candidates,
                chosen,
                complied,
                visited,
            });
        }
        kernel.schedule(
            now + travel,
            NetEvent::Facility {
                facility: visited,
                event: FacilityEvent::OutpatientArrival { patient: Box::new(patient) },
            },
        )?;
        Ok(())
    }

    fn predict(
        &self,
        kernel: &Kernel<NetEvent>,
        patient: &PatientRecord,
        facility: usize,
        travel: f64,
        decision: u64,
    ) -> Result<f64> {
        let now = kernel.now();
        let params = &self.params[facility];
        match &self.predictor {
            Predictor::None => Err(Error::Config("no predictor".into())),
            Predictor::Aqt => {
                let state = self.facilities[facility].observe(now);
                Ok(predict_facility(&state, travel, patient.age, LabRoute::Expected, params)?.los.total)
            }
            Predictor::Simml(model) => {
                let state = self.facilities[facility].observe(now);
                let f = extract_features(&state, travel, patient.age, false, params)?;
                let p = params.lab_visit_prob;
                let with_lab = model.predict(&f.with_lab_route(true).0);
                let without = model.predict(&f.with_lab_route(false).0);
                Ok(p * with_lab + (1.0 - p) * without)
            }
            Predictor::Actual => {
                let pending = kernel.pending().filter_map(|item| match &item.event {
                    NetEvent::Facility { facility: j, event } if *j == facility => Some(Scheduled {
                        time: item.time,
                        seq: item.seq,
                        event: event.clone(),
                    }),
                    _ => None,
                });
                let demand = SyntheticDemand {
                    interarrival: self.interarrivals[facility],
                    travel: self.config.travel[facility][facility],
                    until: self.horizon,
                };
                // Other traffic is common to all candidates; the patient's own
                // service times are a fresh sample per candidate.
                let mut target = patient.clone();
                target.seed = self.rng.fork(StreamKey::OracleSample { facility: facility as u16 }, decision).gen();
                actual_los_oracle(
                    &self.facilities[facility],
                    pending,
                    now,
                    kernel.next_seq(),
                    &target,
                    travel,
                    &demand,
                    self.rng.fork(StreamKey::Oracle, decision),
                    self.config.oracle_guard_days,
                )
            }
        }
    }

    /// Attaches decision-time features and the route-aware analytical
    /// prediction for the facility actually visited.
    fn annotate(&self, patient: &mut PatientRecord, now: SimTime, visited: usize, travel: f64) -> Result<()> {
        let params = &self.params[visited];
        let state = self.facilities[visited].observe(now);
        let visits_lab = PatientRecord::draws_lab(patient.seed, self.config.facilities[visited].lab_visit_prob);
        patient.decision_features = Some(extract_features(&state, travel, patient.age, visits_lab, params)?.0);
        let route = if visits_lab { LabRoute::Visits } else { LabRoute::Skips };
        let los = predict_facility(&state, travel, patient.age, route, params)?.los;
        patient.aqt_prediction = Some([0, 1, 2, 3].map(|i| los.stays[i] * los.weights[i]));
        Ok(())
    }

    fn on_calibration_tick(&mut self, kernel: &mut Kernel<NetEvent>) -> Result<()> {
        let Some(settings) = self.config.calibration.clone() else {
            return Ok(());
        };
        if !self.calibrating {
            return Ok(());
        }
        let open_minutes: Vec<f64> = self
            .config
            .facilities
            .iter()
            .map(|f| settings.window_days * f.opd_minutes)
            .collect();
        let estimates: Vec<f64> = self
            .window_arrivals
            .iter()
            .zip(&open_minutes)
            .map(|(&n, &open)| if n == 0 { MAX_INTERARRIVAL } else { (open / n as f64).min(MAX_INTERARRIVAL) })
            .zip(&self.interarrivals)
            .map(|(raw, &current)| current + settings.relaxation * (raw - current))
            .collect();
        let max_change = estimates
            .iter()
            .zip(&self.previous)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let window = self.lambda_trace.len() + 1;
        self.lambda_trace.push(LambdaPoint {
            window,
            day: kernel.now().minutes() / crate::sim::DAY_MINUTES,
            arrivals: self.window_arrivals.clone(),
            interarrivals: estimates.clone(),
            max_change,
        });
        for (j, &l) in estimates.iter().enumerate() {
            self.params[j] = self.params[j].clone().with_outpatient_interarrival(l);
        }
        self.previous = estimates.clone();
        self.interarrivals = estimates;
        self.window_arrivals.iter_mut().for_each(|n| *n = 0);
        if max_change < settings.epsilon {
            self.converged_at = Some(window);
        }
        let until = SimTime::from_days(settings.until_days.unwrap_or(self.config.warmup_days));
        let next = kernel.now() + settings.window_days * crate::sim::DAY_MINUTES;
        self.calibrating = self.converged_at.is_none() && window < settings.max_windows && next <= until;
        if self.calibrating {
            kernel.schedule(next, NetEvent::CalibrationTick)?;
        }
        Ok(())
    }
}

impl Model for Network {
    type Event = NetEvent;

    fn handle(&mut self, kernel: &mut Kernel<NetEvent>, item: Scheduled<NetEvent>) -> Result<()> {
        match item.event {
            NetEvent::Demand { origin } => self.on_demand(kernel, origin),
            NetEvent::CalibrationTick => self.on_calibration_tick(kernel),
            NetEvent::Facility { facility, event } => {
                if matches!(event, FacilityEvent::OutpatientArrival { .. }) {
                    self.window_arrivals[facility] += 1;
                }
                let f = &mut self.facilities[facility];
                f.handle(item.time, event, &mut NetScheduler { kernel, facility })?;
                if f.has_exits() {
                    let warmup_end = self.warmup_end.minutes();
                    self.records.extend(f.drain_exits().filter(|r| r.arrival >= warmup_end));
                }
                Ok(())
            }
        }
    }
}

/// Results of one replication.
#[derive(Clone, Debug)]
pub struct NetworkRun {
    pub records: Vec<PatientRecord>,
    pub decisions: Vec<AssignmentDecision>,
    /// Busy fraction of OPD time per facility and station.
    pub utilization: Vec<[f64; 4]>,
    pub counts: Vec<ClassCounts>,
    /// Interarrival times the predictors started from.
    pub initial_interarrivals: Vec<f64>,
    pub lambda_trace: Vec<LambdaPoint>,
    pub converged_at: Option<usize>,
    pub interarrivals: Vec<f64>,
    pub predictor_failures: u64,
    pub measured_days: f64,
}

/// Runs one replication to the horizon and drains everyone still inside.
pub fn run_network(config: Arc<NetworkConfig>, predictor: Predictor, seed: u64) -> Result<NetworkRun> {
    let mut network = Network::new(config.clone(), predictor, seed)?;
    let initial_interarrivals = network.interarrivals().to_vec();
    let mut kernel = Kernel::new(SimTime::ZERO);
    network.start(&mut kernel)?;
    while let Some(item) = kernel.pop_until(SimTime::new(f64::MAX)) {
        network.handle(&mut kernel, item)?;
    }
    let measured_days = config.horizon_days - config.warmup_days;
    let utilization = network
        .facilities
        .iter()
        .map(|f| {
            if measured_days > 0.0 {
                let mut u = [0.0; 4];
                for s in StationId::ALL {
                    u[s.index()] = f.utilization(s, measured_days)?;
                }
                Ok(u)
            } else {
                Ok([0.0; 4])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut records = network.take_records();
    records.sort_by_key(|r| r.id);
    Ok(NetworkRun {
        records,
        decisions: network.take_decisions(),
        utilization,
        counts: network.facilities.iter().map(|f| *f.counts()).collect(),
        initial_interarrivals,
        lambda_trace: network.lambda_trace.clone(),
        converged_at: network.converged_at,
        interarrivals: network.interarrivals.clone(),
        predictor_failures: network.predictor_failures,
        measured_days,
    })
}
