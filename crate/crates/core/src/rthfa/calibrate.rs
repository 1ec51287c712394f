use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rthfa::network::{CalibrationSettings, LambdaPoint, NetEvent, Network, NetworkConfig, Predictor};
use crate::sim::{Kernel, Model, SimTime};

/// Trace of the effective-interarrival iteration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LambdaCalibration {
    pub settings: CalibrationSettings,
    pub initial: Vec<f64>,
    pub trace: Vec<LambdaPoint>,
    pub converged: bool,
    /// Last estimate per facility, converged or not.
    pub lambda_eff: Vec<f64>,
}

/// Runs assignment window by window, refitting each facility's interarrival
/// time from its arrivals, until successive estimates differ by less than
/// epsilon or the window cap is reached.
pub fn effective_lambda(
    config: &NetworkConfig,
    settings: CalibrationSettings,
    predictor: Predictor,
    seed: u64,
) -> Result<LambdaCalibration> {
    if settings.window_days < 1.0 {
        return Err(Error::Config("calibration window must be at least one day".into()));
    }
    let horizon = settings.window_days * settings.max_windows as f64;
    let mut settings = settings;
    settings.until_days = Some(horizon);
    let cfg = NetworkConfig {
        warmup_days: horizon,
        horizon_days: horizon,
        calibration: Some(settings.clone()),
        collect_features: false,
        collect_decisions: false,
        ..config.clone()
    };
    let mut network = Network::new(Arc::new(cfg), predictor, seed)?;
    let initial = network.interarrivals().to_vec();
    let mut kernel: Kernel<NetEvent> = Kernel::new(SimTime::ZERO);
    network.start(&mut kernel)?;
    while network.is_calibrating() {
        let Some(item) = kernel.pop_until(SimTime::new(f64::MAX)) else {
            break;
        };
        network.handle(&mut kernel, item)?;
    }
    Ok(LambdaCalibration {
        settings,
        initial,
        trace: network.lambda_trace().to_vec(),
        converged: network.converged_at().is_some(),
        lambda_eff: network.interarrivals().to_vec(),
    })
}

/// One row per window and facility.
pub fn write_lambda_trace<W: Write>(out: W, calibration: &LambdaCalibration) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["window", "day", "facility", "arrivals", "interarrival", "max_change", "converged"])?;
    let last = calibration.trace.len();
    for j in 0..calibration.initial.len() {
        w.write_record(["0", "0", &j.to_string(), "", &calibration.initial[j].to_string(), "", "0"])?;
    }
    for p in &calibration.trace {
        for j in 0..p.interarrivals.len() {
            let converged = calibration.converged && p.window == last;
            w.write_record([
                p.window.to_string(),
                p.day.to_string(),
                j.to_string(),
                p.arrivals[j].to_string(),
                p.interarrivals[j].to_string(),
                p.max_change.to_string(),
                u8::from(converged).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
