use serde::{Deserialize, Serialize};

use crate::aqt::extrapolate::{
    completions_per_server, extrapolate_mgm, future_remaining, net_remaining,
    server_progress, ExtrapolatedState,
};
use crate::error::{Error, Result};
use crate::phc::{ClassKind, FacilityConfig, FacilityState, SubsystemState};
use crate::sim::ServiceDistribution;

/// Inputs of the subsystem predictors for one facility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AqtParams {
    /// Mean interarrival time of outpatients at the facility, minutes.
    pub outpatient_interarrival: f64,
    pub ncd_fraction: f64,
    pub lab_visit_prob: f64,
    pub inpatient_interarrival: f64,
    pub childbirth_interarrival: f64,
    pub ncd_service: ServiceDistribution,
    pub doctor_outpatient: ServiceDistribution,
    pub doctor_inpatient: ServiceDistribution,
    pub doctor_childbirth: ServiceDistribution,
    pub lab_service: ServiceDistribution,
    pub pharmacy_service: ServiceDistribution,
    pub ncd_age_threshold: f64,
    /// Count screened arrivals only while they are ahead of the patient and
    /// let the doctor discharge outpatients during the lookahead.
    pub doctor_departures: bool,
}

impl AqtParams {
    pub fn from_config(cfg: &FacilityConfig) -> Self {
        AqtParams {
            outpatient_interarrival: cfg.outpatient_mean_interarrival(),
            ncd_fraction: cfg.ncd_fraction,
            lab_visit_prob: cfg.lab_visit_prob,
            inpatient_interarrival: cfg.inpatient_interarrival.mean(),
            childbirth_interarrival: cfg.childbirth_interarrival.mean(),
            ncd_service: cfg.ncd_service,
            doctor_outpatient: cfg.doctor_outpatient,
            doctor_inpatient: cfg.doctor_inpatient,
            doctor_childbirth: cfg.doctor_childbirth,
            lab_service: cfg.lab_service,
            pharmacy_service: cfg.pharmacy_service,
            ncd_age_threshold: cfg.ncd_age_threshold,
            doctor_departures: true,
        }
    }

    /// Same facility with a different outpatient interarrival estimate.
    pub fn with_outpatient_interarrival(mut self, interarrival: f64) -> Self {
        self.outpatient_interarrival = interarrival;
        self
    }

    fn doctor_service(&self, class: ClassKind) -> ServiceDistribution {
        match class {
            ClassKind::Outpatient => self.doctor_outpatient,
            ClassKind::Inpatient => self.doctor_inpatient,
            ClassKind::Childbirth => self.doctor_childbirth,
        }
    }

    /// Net interarrival time of inpatients and childbirth patients combined.
    pub fn priority_interarrival(&self) -> f64 {
        1.0 / (1.0 / self.inpatient_interarrival + 1.0 / self.childbirth_interarrival)
    }

    /// Mean doctor time of a priority patient, weighted by arrival rate.
    pub fn priority_service_mean(&self) -> f64 {
        let (ri, rc) = (1.0 / self.inpatient_interarrival, 1.0 / self.childbirth_interarrival);
        if ri + rc <= 0.0 {
            return 0.0;
        }
        (ri * self.doctor_inpatient.mean() + rc * self.doctor_childbirth.mean()) / (ri + rc)
    }

    /// Interarrival time of outpatients who see the doctor without screening.
    fn direct_interarrival(&self) -> f64 {
        self.outpatient_interarrival / (1.0 - self.ncd_fraction)
    }
}

/// Total doctor delay once priority patients arriving during the wait are
/// accounted for.
pub fn geometric_priority_delay(naive: f64, priority_interarrival: f64, priority_service: f64) -> Result<f64> {
    if priority_service >= priority_interarrival {
        return Err(Error::Unstable {
            mu_h: priority_service,
            lambda_h: priority_interarrival,
        });
    }
    if priority_interarrival.is_infinite() {
        return Ok(naive);
    }
    Ok(naive * priority_interarrival / (priority_interarrival - priority_service))
}

/// NCD station projected to the patient's arrival.
pub fn predict_los_ncd(state: &SubsystemState, delta: f64, params: &AqtParams) -> Result<ExtrapolatedState> {
    if params.ncd_fraction <= 0.0 {
        return Ok(ExtrapolatedState::default());
    }
    let interarrival = params.outpatient_interarrival / params.ncd_fraction;
    extrapolate_mgm(state, delta, interarrival, &params.ncd_service)
}

/// Doctor projection including the priority-class terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct DoctorExtrapolation {
    pub horizon: f64,
    pub arrivals_outpatient: f64,
    pub arrivals_inpatient: f64,
    pub arrivals_childbirth: f64,
    pub priority_service_mean: f64,
    pub priority_interarrival: f64,
    pub priority_queue: f64,
    pub outpatient_completions: f64,
    /// Outpatients ahead at the patient's arrival.
    pub outpatient_queue: f64,
    pub elapsed: f64,
    pub remaining: f64,
    pub remaining_now: f64,
    pub naive_delay: f64,
    pub delay: f64,
    pub los: f64,
    /// Priority service outpaces priority arrivals; `delay` is the naive one.
    pub unstable: bool,
}

/// Doctor station at `delta + ncd_los`, given the NCD station observed at the same instant.
pub fn predict_los_doctor(
    state: &SubsystemState,
    ncd_state: &SubsystemState,
    delta: f64,
    ncd_los: f64,
    visits_ncd: bool,
    params: &AqtParams,
) -> Result<DoctorExtrapolation> {
    let ncd_los = if visits_ncd { ncd_los } else { 0.0 };
    let horizon = delta + ncd_los;
    let mean_o = params.doctor_outpatient.mean();

    let mut screened_throughput = 0.0;
    if visits_ncd {
        let ncd_now = net_remaining(&server_progress(ncd_state, |_| params.ncd_service)?);
        screened_throughput = completions_per_server(horizon - ncd_now, params.ncd_service.mean());
        if params.doctor_departures {
            let ahead = ncd_state.queue_total() as f64
                + ncd_state.busy.len() as f64
                + delta * params.ncd_fraction / params.outpatient_interarrival;
            screened_throughput = screened_throughput.min(ahead);
        }
    }
    let direct = if params.ncd_fraction < 1.0 {
        horizon / params.direct_interarrival()
    } else {
        0.0
    };
    let arrivals_outpatient = (direct + screened_throughput - 1.0).max(0.0);
    let arrivals_inpatient = horizon / params.inpatient_interarrival;
    let arrivals_childbirth = horizon / params.childbirth_interarrival;

    let progress = server_progress(state, |c| params.doctor_service(c))?;
    let w_now = net_remaining(&progress);
    let mu_h = params.priority_service_mean();
    let lambda_h = params.priority_interarrival();
    let priority_total = state.queue_priority() as f64 + arrivals_inpatient + arrivals_childbirth;
    let priority_capacity = if mu_h > 0.0 {
        completions_per_server(horizon - w_now, mu_h)
    } else {
        f64::INFINITY
    };
    let priority_queue = (priority_total - priority_capacity).max(0.0);

    let mut outpatient_completions = 0.0;
    if params.doctor_departures {
        let priority_busy = priority_total.min(priority_capacity) * mu_h;
        outpatient_completions = (state.queue_outpatient as f64 + arrivals_outpatient / 2.0)
            .min(completions_per_server(horizon - w_now - priority_busy, mean_o));
    }
    let outpatient_queue =
        (state.queue_outpatient as f64 + arrivals_outpatient - outpatient_completions).max(0.0);

    let pending = state.queue_total() as f64 + arrivals_outpatient + arrivals_inpatient + arrivals_childbirth;
    let (elapsed, remaining) = future_remaining(&progress, horizon, pending, &params.doctor_outpatient)?;
    let naive_delay = outpatient_queue * mean_o + priority_queue * mu_h + remaining;
    let (delay, unstable) = match geometric_priority_delay(naive_delay, lambda_h, mu_h) {
        Ok(d) => (d, false),
        Err(_) => (naive_delay, true),
    };
    Ok(DoctorExtrapolation {
        horizon,
        arrivals_outpatient,
        arrivals_inpatient,
        arrivals_childbirth,
        priority_service_mean: mu_h,
        priority_interarrival: lambda_h,
        priority_queue,
        outpatient_completions,
        outpatient_queue,
        elapsed,
        remaining,
        remaining_now: w_now,
        naive_delay,
        delay,
        los: delay + mean_o,
        unstable,
    })
}

/// Laboratory station at `delta + ncd_los + doctor_los`.
pub fn predict_los_lab(
    state: &SubsystemState,
    delta: f64,
    ncd_los: f64,
    doctor_los: f64,
    doctor_queue: f64,
    params: &AqtParams,
) -> Result<ExtrapolatedState> {
    let service = &params.lab_service;
    let mean = service.mean();
    let horizon = delta + ncd_los + doctor_los;
    let progress = server_progress(state, |_| *service)?;
    let w_now = net_remaining(&progress);
    let servers = progress.len() as f64;

    let arrivals = (params.lab_visit_prob * doctor_queue)
        .min((doctor_los / params.doctor_outpatient.mean()).floor());
    let completions = servers * completions_per_server(horizon - w_now, mean);
    let queue_now = state.queue_total() as f64;
    let queue_len = (queue_now + arrivals - completions).max(0.0);
    let (elapsed, remaining) = future_remaining(&progress, horizon, queue_now + arrivals, service)?;
    let delay = queue_len * mean + remaining;
    Ok(ExtrapolatedState {
        arrivals,
        completions,
        queue_len,
        elapsed,
        remaining,
        delay,
        los: delay + mean,
        remaining_now: w_now,
    })
}

/// Pharmacy station after the doctor and, when `lab_los > 0`, the laboratory.
#[allow(clippy::too_many_arguments)]
pub fn predict_los_pharmacy(
    state: &SubsystemState,
    delta: f64,
    ncd_los: f64,
    doctor_los: f64,
    lab_los: f64,
    doctor_queue: f64,
    lab_queue_now: f64,
    params: &AqtParams,
) -> Result<ExtrapolatedState> {
    let service = &params.pharmacy_service;
    let mean = service.mean();
    let horizon = delta + ncd_los + doctor_los + lab_los;
    let progress = server_progress(state, |_| *service)?;
    let w_now = net_remaining(&progress);
    let servers = progress.len() as f64;

    let throughput = (doctor_los / params.doctor_outpatient.mean()).floor()
        + (lab_los / params.lab_service.mean()).floor();
    let arrivals = (doctor_queue + lab_queue_now).min(throughput);
    let completions = servers * completions_per_server(horizon - w_now, mean);
    let queue_now = state.queue_total() as f64;
    let queue_len = (queue_now + arrivals - completions).max(0.0);
    let (elapsed, remaining) = future_remaining(&progress, horizon, queue_now + arrivals, service)?;
    let delay = queue_len * mean + remaining;
    Ok(ExtrapolatedState {
        arrivals,
        completions,
        queue_len,
        elapsed,
        remaining,
        delay,
        los: delay + mean,
        remaining_now: w_now,
    })
}

/// Subsystem stays, their weights and the weighted total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LosPrediction {
    /// Stays at (ncd, doctor, lab, pharmacy).
    pub stays: [f64; 4],
    pub weights: [f64; 4],
    pub total: f64,
}

/// Weights the subsystem stays: screening counts only at or above the
/// threshold age, the laboratory with its visit probability.
pub fn total_los(age: f64, stays: [f64; 4], params: &AqtParams) -> LosPrediction {
    let screened = age >= params.ncd_age_threshold;
    let stays = [if screened { stays[0] } else { 0.0 }, stays[1], stays[2], stays[3]];
    let weights = [f64::from(u8::from(screened)), 1.0, params.lab_visit_prob, 1.0];
    let total = stays.iter().zip(weights).map(|(s, w)| s * w).sum();
    LosPrediction { stays, weights, total }
}

/// How the laboratory enters a prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabRoute {
    /// Route unknown: laboratory weighted by its visit probability.
    Expected,
    Visits,
    Skips,
}

/// Every intermediate of one facility prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FacilityPrediction {
    pub delta: f64,
    pub visits_ncd: bool,
    pub ncd: ExtrapolatedState,
    pub doctor: DoctorExtrapolation,
    pub lab: ExtrapolatedState,
    pub pharmacy: ExtrapolatedState,
    pub los: LosPrediction,
}

/// Predicted length of stay of a patient of `age` reaching the facility in `delta` minutes.
pub fn predict_facility(
    state: &FacilityState,
    delta: f64,
    age: f64,
    route: LabRoute,
    params: &AqtParams,
) -> Result<FacilityPrediction> {
    use crate::phc::StationId::*;
    let visits_ncd = age >= params.ncd_age_threshold;
    let ncd = if visits_ncd {
        predict_los_ncd(state.get(NcdNurse), delta, params)?
    } else {
        ExtrapolatedState::default()
    };
    let doctor = predict_los_doctor(state.get(Doctor), state.get(NcdNurse), delta, ncd.los, visits_ncd, params)?;
    let lab = if route == LabRoute::Skips {
        ExtrapolatedState::default()
    } else {
        predict_los_lab(state.get(Laboratory), delta, ncd.los, doctor.los, doctor.outpatient_queue, params)?
    };
    let lab_in_path = if route == LabRoute::Skips { 0.0 } else { lab.los };
    let pharmacy = predict_los_pharmacy(
        state.get(Pharmacy),
        delta,
        ncd.los,
        doctor.los,
        lab_in_path,
        doctor.outpatient_queue,
        state.get(Laboratory).queue_total() as f64,
        params,
    )?;
    let mut los = total_los(age, [ncd.los, doctor.los, lab.los, pharmacy.los], params);
    if route != LabRoute::Expected {
        los.weights[2] = if route == LabRoute::Visits { 1.0 } else { 0.0 };
        los.total = los.stays.iter().zip(los.weights).map(|(s, w)| s * w).sum();
    }
    Ok(FacilityPrediction {
        delta,
        visits_ncd,
        ncd,
        doctor,
        lab,
        pharmacy,
        los,
    })
}
