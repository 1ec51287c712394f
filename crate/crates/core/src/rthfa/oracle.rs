use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::phc::{Facility, FacilityEvent, PatientId, PatientRecord, Scheduler};
use crate::rthfa::demand::{draw_outpatient, next_demand_time};
use crate::sim::{Kernel, Scheduled, SimTime, DAY_MINUTES};

/// Ids of synthetic patients start here.
pub const SYNTHETIC_ID_BASE: PatientId = 1 << 61;

/// Outpatients other than the one being scored, assumed to keep arriving
/// while the clone runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticDemand {
    /// Mean minutes between assigned outpatients; infinite for none.
    pub interarrival: f64,
    pub travel: f64,
    /// No decisions after this instant.
    pub until: SimTime,
}

#[derive(Clone, Debug)]
enum CloneEvent {
    Facility(FacilityEvent),
    Decision,
}

struct CloneScheduler<'a>(&'a mut Kernel<CloneEvent>);

impl Scheduler for CloneScheduler<'_> {
    fn schedule(&mut self, at: SimTime, event: FacilityEvent) -> Result<()> {
        self.0.schedule(at, CloneEvent::Facility(event)).map(|_| ())
    }
}

/// Length of stay `patient` would experience if sent to `facility` now.
///
/// `pending` holds the facility's calendar entries with their original
/// sequence numbers, so the clone replays same-time ties exactly as the
/// live network would.
#[allow(clippy::too_many_arguments)]
pub fn actual_los_oracle(
    facility: &Facility,
    pending: impl IntoIterator<Item = Scheduled<FacilityEvent>>,
    now: SimTime,
    next_seq: u64,
    patient: &PatientRecord,
    delta: f64,
    demand: &SyntheticDemand,
    mut rng: Pcg64,
    guard_days: f64,
) -> Result<f64> {
    let mut clone = facility.clone();
    clone.drain_exits().for_each(drop);
    let mut kernel = Kernel::resume(now, next_seq);
    for item in pending {
        kernel.insert_scheduled(Scheduled {
            time: item.time,
            seq: item.seq,
            event: CloneEvent::Facility(item.event),
        })?;
    }
    let mut target = patient.clone();
    target.visited = facility.id();
    kernel.schedule(
        now + delta,
        CloneEvent::Facility(FacilityEvent::OutpatientArrival { patient: Box::new(target) }),
    )?;
    let cfg = clone.config().clone();
    let schedule_decision = |kernel: &mut Kernel<CloneEvent>, rng: &mut Pcg64, from: SimTime| -> Result<()> {
        if let Some(at) = next_demand_time(from, demand.interarrival, cfg.opd_minutes, demand.until, rng) {
            kernel.schedule(at, CloneEvent::Decision)?;
        }
        Ok(())
    };
    schedule_decision(&mut kernel, &mut rng, now)?;
    let deadline = now + guard_days * DAY_MINUTES;
    let mut synthetic = SYNTHETIC_ID_BASE;
    while let Some(item) = kernel.pop_until(deadline) {
        match item.event {
            CloneEvent::Decision => {
                let other = draw_outpatient(&mut rng, synthetic, facility.id(), &cfg);
                synthetic += 1;
                kernel.schedule(
                    item.time + demand.travel,
                    CloneEvent::Facility(FacilityEvent::OutpatientArrival { patient: Box::new(other) }),
                )?;
                schedule_decision(&mut kernel, &mut rng, item.time)?;
            }
            CloneEvent::Facility(event) => {
                clone.handle(item.time, event, &mut CloneScheduler(&mut kernel))?;
                if clone.has_exits() {
                    if let Some(done) = clone.drain_exits().find(|r| r.id == patient.id) {
                        return done.los().ok_or_else(|| Error::Data("exit without time".into()));
                    }
                }
            }
        }
    }
    Err(Error::OracleGuard { days: guard_days })
}
