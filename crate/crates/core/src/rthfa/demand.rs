use rand::Rng;

use crate::phc::{FacilityConfig, PatientId, PatientRecord};
use crate::sim::{ServiceDistribution, SimTime, DAY_MINUTES};

/// Next outpatient decision after `from` under Poisson demand with mean gap
/// `interarrival`, restricted to the daily outpatient window.
///
/// A gap that runs past closing is discarded and a fresh one is drawn from the
/// next opening. Returns `None` once the draw passes `until`.
pub fn next_demand_time<R: Rng + ?Sized>(
    from: SimTime,
    interarrival: f64,
    opd_minutes: f64,
    until: SimTime,
    rng: &mut R,
) -> Option<SimTime> {
    if !interarrival.is_finite() || opd_minutes <= 0.0 {
        return None;
    }
    let gap = ServiceDistribution::exponential(interarrival);
    let mut t = from + gap.sample(rng);
    while t.time_of_day() >= opd_minutes {
        if t > until {
            return None;
        }
        t = t.day_start() + DAY_MINUTES + gap.sample(rng);
    }
    (t <= until).then_some(t)
}

/// A new outpatient of catchment `origin`: screened-age with the facility's
/// screening fraction, plus a seed fixing all of the patient's own draws.
pub fn draw_outpatient<R: Rng + ?Sized>(
    rng: &mut R,
    id: PatientId,
    origin: usize,
    cfg: &FacilityConfig,
) -> PatientRecord {
    let threshold = cfg.ncd_age_threshold;
    let screened = rng.gen::<f64>() < cfg.ncd_fraction;
    let u = rng.gen::<f64>();
    let age = if screened { threshold + 50.0 * u } else { threshold * u };
    PatientRecord::new(id, age, origin, rng.gen())
}
