use std::collections::HashMap;
use std::sync::Arc;

use phc_rtlos::aqt::{predict_facility, AqtParams, LabRoute};
use phc_rtlos::phc::{Facility, FacilityConfig, FacilityEvent, PatientRecord, Scheduler};
use phc_rtlos::rthfa::*;
use phc_rtlos::sim::{Kernel, ServiceDistribution, SimTime};
use rand::SeedableRng;
use rand_pcg::Pcg64;

const NEVER: f64 = 1e12;

fn network(facilities: Vec<FacilityConfig>, travel: f64, predictor: PredictorKind) -> NetworkConfig {
    let m = facilities.len();
    NetworkConfig {
        facilities,
        travel: vec![vec![travel; m]; m],
        predictor,
        compliance: 1.0,
        warmup_days: 0.0,
        horizon_days: 20.0,
        calibration: None,
        initial_interarrivals: None,
        doctor_departures: true,
        oracle_guard_days: 10.0,
        collect_features: false,
        collect_decisions: true,
    }
}

/// Every patient follows doctor, laboratory, pharmacy; nobody can overtake.
fn single_route(name: &str, interarrival: f64) -> FacilityConfig {
    FacilityConfig {
        ncd_fraction: 0.0,
        lab_visit_prob: 1.0,
        ..FacilityConfig::with_outpatient_interarrival(name, interarrival)
    }
}

#[test]
fn oracle_prediction_is_unbiased_for_the_realized_stay() {
    let mut cfg = network(vec![single_route("a", 5.0), single_route("b", 4.0)], 15.0, PredictorKind::Actual);
    // Visits must not depend on the scores, or the minimum is selected on noise.
    cfg.compliance = 0.0;
    let run = run_network(Arc::new(cfg), Predictor::Actual, 11).unwrap();
    let realized: HashMap<u64, f64> = run.records.iter().map(|r| (r.id, r.los().unwrap())).collect();
    assert!(run.decisions.len() > 1000);
    let (mut predicted, mut actual) = (0.0, 0.0);
    for d in &run.decisions {
        predicted += d.candidates[d.visited].predicted_los.unwrap();
        actual += realized[&d.patient];
    }
    // The scored patient's own service times are resampled per candidate.
    assert!((predicted / actual - 1.0).abs() < 0.02, "{predicted} vs {actual}");
}

#[test]
fn candidates_do_not_tie_on_the_patients_own_service_times() {
    let cfg = network(vec![single_route("a", 20.0), single_route("b", 20.0)], 15.0, PredictorKind::Actual);
    let run = run_network(Arc::new(cfg), Predictor::Actual, 3).unwrap();
    let ties = run
        .decisions
        .iter()
        .filter(|d| d.candidates[0].predicted_los == d.candidates[1].predicted_los)
        .count();
    assert!(ties * 100 < run.decisions.len(), "{ties} ties in {}", run.decisions.len());
}

struct Calendar(Kernel<FacilityEvent>);

impl Scheduler for Calendar {
    fn schedule(&mut self, at: SimTime, event: FacilityEvent) -> phc_rtlos::Result<()> {
        self.0.schedule(at, event).map(|_| ())
    }
}

fn deterministic_facility() -> FacilityConfig {
    let d = ServiceDistribution::deterministic;
    FacilityConfig {
        outpatient_interarrival: d(NEVER),
        inpatient_interarrival: d(NEVER),
        childbirth_interarrival: d(NEVER),
        doctor_outpatient: d(0.87),
        ncd_service: d(3.5),
        lab_service: d(3.45),
        pharmacy_service: d(2.08),
        ..FacilityConfig::default()
    }
}

#[test]
fn oracle_equals_analytical_prediction_without_randomness_or_competition() {
    let cfg = Arc::new(deterministic_facility());
    let mut facility = Facility::new(0, cfg.clone(), 1).unwrap();
    let mut cal = Calendar(Kernel::new(SimTime::ZERO));
    facility.start(SimTime::ZERO, &mut cal).unwrap();
    let params = AqtParams::from_config(&cfg);
    let demand = SyntheticDemand { interarrival: f64::INFINITY, travel: 0.0, until: SimTime::from_days(1.0) };
    for (id, age) in [(0, 45.0), (1, 12.0)] {
        let patient = PatientRecord::new(id, age, 0, 77 + id);
        let visits_lab = PatientRecord::draws_lab(patient.seed, cfg.lab_visit_prob);
        let route = if visits_lab { LabRoute::Visits } else { LabRoute::Skips };
        let pending: Vec<_> = cal.0.pending().cloned().collect();
        let oracle = actual_los_oracle(
            &facility,
            pending,
            SimTime::ZERO,
            cal.0.next_seq(),
            &patient,
            15.0,
            &demand,
            Pcg64::seed_from_u64(0),
            10.0,
        )
        .unwrap();
        let state = facility.observe(SimTime::ZERO);
        let aqt = predict_facility(&state, 15.0, age, route, &params).unwrap().los.total;
        assert!((oracle - aqt).abs() < 1e-6, "age {age}: oracle {oracle} vs analytical {aqt}");
    }
}

#[test]
fn oracle_is_deterministic_and_guards_runaway_clones() {
    let cfg = Arc::new(FacilityConfig::default());
    let facility = Facility::new(0, cfg, 3).unwrap();
    let patient = PatientRecord::new(5, 40.0, 0, 99);
    let demand = SyntheticDemand { interarrival: 9.0, travel: 15.0, until: SimTime::from_days(5.0) };
    let run = |rng_seed| {
        actual_los_oracle(&facility, Vec::new(), SimTime::ZERO, 0, &patient, 15.0, &demand, Pcg64::seed_from_u64(rng_seed), 10.0)
    };
    assert_eq!(run(1).unwrap(), run(1).unwrap());
    let err = actual_los_oracle(
        &facility,
        Vec::new(),
        SimTime::ZERO,
        0,
        &patient,
        20.0,
        &demand,
        Pcg64::seed_from_u64(1),
        0.01,
    )
    .unwrap_err();
    assert!(matches!(err, phc_rtlos::Error::OracleGuard { .. }));
}

#[test]
fn initial_interarrivals_reach_the_predictors() {
    let facilities = vec![FacilityConfig::with_outpatient_interarrival("a", 9.0), FacilityConfig::with_outpatient_interarrival("b", 2.0)];
    let mut cfg = network(facilities, 15.0, PredictorKind::Aqt);
    cfg.initial_interarrivals = Some(vec![3.0, 3.5]);
    let net = Network::new(Arc::new(cfg.clone()), Predictor::Aqt, 0).unwrap();
    assert_eq!(net.interarrivals(), &[3.0, 3.5]);
    cfg.initial_interarrivals = Some(vec![3.0]);
    assert!(Network::new(Arc::new(cfg), Predictor::Aqt, 0).is_err());
}

#[test]
fn empty_facility_oracle_is_the_sum_of_own_service_draws() {
    let cfg = Arc::new(FacilityConfig {
        inpatient_interarrival: ServiceDistribution::deterministic(NEVER),
        childbirth_interarrival: ServiceDistribution::deterministic(NEVER),
        lab_visit_prob: 0.0,
        ..FacilityConfig::default()
    });
    let facility = Facility::new(0, cfg.clone(), 3).unwrap();
    let patient = PatientRecord::new(5, 20.0, 0, 99);
    let demand = SyntheticDemand { interarrival: f64::INFINITY, travel: 0.0, until: SimTime::ZERO };
    let los = actual_los_oracle(&facility, Vec::new(), SimTime::ZERO, 0, &patient, 15.0, &demand, Pcg64::seed_from_u64(1), 10.0)
        .unwrap();
    use phc_rtlos::phc::StationId::*;
    let expected = patient.service_requirement(Doctor, &cfg.doctor_outpatient)
        + patient.service_requirement(Pharmacy, &cfg.pharmacy_service);
    assert!((los - expected).abs() < 1e-9);
}

#[test]
fn no_compliance_means_no_diversion() {
    let mut cfg = network(
        vec![FacilityConfig::with_outpatient_interarrival("a", 9.0), FacilityConfig::with_outpatient_interarrival("b", 2.0)],
        15.0,
        PredictorKind::Aqt,
    );
    cfg.compliance = 0.0;
    let run = run_network(Arc::new(cfg), Predictor::Aqt, 2).unwrap();
    assert!(run.records.iter().all(|r| r.visited == r.preferred));
    assert!(run.decisions.iter().all(|d| !d.complied));
}

#[test]
fn assignment_reroutes_without_creating_patients() {
    let facilities = vec![FacilityConfig::with_outpatient_interarrival("a", 9.0), FacilityConfig::with_outpatient_interarrival("b", 2.0)];
    let totals = |kind: PredictorKind, predictor: Predictor| -> Vec<f64> {
        (0..6)
            .map(|seed| {
                let mut cfg = network(facilities.clone(), 15.0, kind);
                cfg.collect_decisions = false;
                run_network(Arc::new(cfg), predictor.clone(), seed).unwrap().records.len() as f64
            })
            .collect()
    };
    let base = totals(PredictorKind::None, Predictor::None);
    let assigned = totals(PredictorKind::Aqt, Predictor::Aqt);
    // Same seeds draw the same demand, so totals agree run by run.
    assert_eq!(base, assigned);
}

#[test]
fn symmetric_network_converges_to_equal_rates() {
    let facilities = vec![FacilityConfig::with_outpatient_interarrival("a", 4.0), FacilityConfig::with_outpatient_interarrival("b", 4.0)];
    let cfg = network(facilities, 15.0, PredictorKind::Actual);
    let settings = CalibrationSettings::default();
    let cal = effective_lambda(&cfg, settings.clone(), Predictor::Actual, 8).unwrap();
    assert!(cal.converged, "{:?}", cal.trace);
    assert!(cal.trace.len() <= settings.max_windows);
    assert!(cal.trace.iter().flat_map(|p| &p.interarrivals).all(|l| l.is_finite()));
    assert!((cal.lambda_eff[0] - cal.lambda_eff[1]).abs() < settings.epsilon, "{:?}", cal.lambda_eff);
    let total_rate: f64 = cal.lambda_eff.iter().map(|l| 1.0 / l).sum();
    assert!((total_rate * 4.0 / 2.0 - 1.0).abs() < 0.05, "{:?}", cal.lambda_eff);
}

#[test]
fn calibration_without_compliance_recovers_the_original_rates() {
    let facilities = vec![FacilityConfig::with_outpatient_interarrival("a", 9.0), FacilityConfig::with_outpatient_interarrival("b", 2.0)];
    let mut cfg = network(facilities, 15.0, PredictorKind::Aqt);
    cfg.compliance = 0.0;
    let cal = effective_lambda(&cfg, CalibrationSettings::default(), Predictor::Aqt, 4).unwrap();
    // Truncation at closing shortens open time by about one gap per day.
    for (eff, orig) in cal.lambda_eff.iter().zip([9.0, 2.0]) {
        assert!((eff / orig - 1.0).abs() < 0.05, "{eff} vs {orig}");
    }
}

#[test]
fn silent_facility_gets_the_capped_interarrival() {
    let mut quiet = FacilityConfig::with_outpatient_interarrival("quiet", NEVER);
    quiet.name = "quiet".into();
    let cfg = network(vec![quiet], 15.0, PredictorKind::Aqt);
    let settings = CalibrationSettings { window_days: 5.0, max_windows: 3, ..CalibrationSettings::default() };
    let cal = effective_lambda(&cfg, settings, Predictor::Aqt, 1).unwrap();
    assert_eq!(cal.lambda_eff, vec![MAX_INTERARRIVAL]);
    assert_eq!(cal.trace[0].arrivals, vec![0]);
}

#[test]
fn replications_are_reproducible() {
    let facilities = vec![FacilityConfig::with_outpatient_interarrival("a", 9.0), FacilityConfig::with_outpatient_interarrival("b", 2.0)];
    let cfg = Arc::new(network(facilities, 15.0, PredictorKind::Actual));
    let a = run_network(cfg.clone(), Predictor::Actual, 5).unwrap();
    let b = run_network(cfg, Predictor::Actual, 5).unwrap();
    assert_eq!(a.decisions, b.decisions);
    assert_eq!(a.records.len(), b.records.len());
}

#[test]
fn invalid_networks_are_rejected() {
    let mut cfg = network(vec![FacilityConfig::default()], 15.0, PredictorKind::Aqt);
    cfg.compliance = 1.5;
    assert!(Network::new(Arc::new(cfg.clone()), Predictor::Aqt, 0).is_err());
    cfg.compliance = 1.0;
    cfg.travel = vec![vec![1.0, 2.0]];
    assert!(Network::new(Arc::new(cfg), Predictor::Aqt, 0).is_err());
    assert!(Predictor::new(PredictorKind::Simml, None).is_err());
}
