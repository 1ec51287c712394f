use serde::Serialize;

use crate::aqt::remaining::remaining_service_time;
use crate::error::Result;
use crate::phc::SubsystemState;
use crate::sim::ServiceDistribution;

/// Expected state of a station at the instant a patient joins it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ExtrapolatedState {
    /// Expected arrivals ahead of the patient during the lookahead.
    pub arrivals: f64,
    /// Expected service completions during the lookahead.
    pub completions: f64,
    pub queue_len: f64,
    pub elapsed: f64,
    pub remaining: f64,
    pub delay: f64,
    pub los: f64,
    /// Remaining service of the station at observation time.
    pub remaining_now: f64,
}

/// Progress of one server at observation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ServerProgress {
    pub elapsed: f64,
    pub remaining: f64,
}

/// Per-server progress at observation time; idle servers are `None`.
pub fn server_progress(
    state: &SubsystemState,
    service_of: impl Fn(crate::phc::ClassKind) -> ServiceDistribution,
) -> Result<Vec<Option<ServerProgress>>> {
    let mut out: Vec<Option<ServerProgress>> = state
        .busy
        .iter()
        .map(|b| {
            remaining_service_time(&service_of(b.class), b.elapsed).map(|remaining| {
                Some(ServerProgress {
                    elapsed: b.elapsed,
                    remaining,
                })
            })
        })
        .collect::<Result<_>>()?;
    out.resize(state.servers.max(out.len()).max(1), None);
    Ok(out)
}

/// Net remaining service of a station: the earliest server to free up, 0 if any is idle.
pub fn net_remaining(progress: &[Option<ServerProgress>]) -> f64 {
    progress
        .iter()
        .map(|p| p.map_or(0.0, |p| p.remaining))
        .reduce(f64::min)
        .unwrap_or(0.0)
}

/// Elapsed and remaining service at `horizon` minutes after observation.
///
/// A server still busy with the same entity continues its countdown; otherwise
/// the elapsed time wraps modulo the mean service time. An idle server counts
/// as busy with probability `min(pending_work, 1)`, where `pending_work` is the
/// expected number of entities that reach it within the horizon.
pub fn future_remaining(
    progress: &[Option<ServerProgress>],
    horizon: f64,
    pending_work: f64,
    service: &ServiceDistribution,
) -> Result<(f64, f64)> {
    let mean = service.mean();
    let mut best: Option<(f64, f64)> = None;
    for p in progress {
        let candidate = match p {
            Some(p) if horizon <= p.remaining => (p.elapsed + horizon, p.remaining - horizon),
            Some(p) => {
                let x = (horizon - p.remaining).abs() % mean;
                (x, remaining_service_time(service, x)?)
            }
            None if pending_work > 0.0 && horizon > 0.0 => {
                let x = horizon % mean;
                (x, pending_work.min(1.0) * remaining_service_time(service, x)?)
            }
            None => (0.0, 0.0),
        };
        if best.is_none_or(|b| candidate.1 < b.1) {
            best = Some(candidate);
        }
    }
    Ok(best.unwrap_or((0.0, 0.0)))
}

/// Expected arrivals in `horizon` minutes excluding the patient under consideration.
pub fn expected_arrivals(horizon: f64, interarrival: f64) -> f64 {
    if interarrival.is_finite() && interarrival > 0.0 {
        (horizon / interarrival - 1.0).max(0.0)
    } else {
        0.0
    }
}

/// Services each server can complete in `span` minutes after its current one.
pub fn completions_per_server(span: f64, mean: f64) -> f64 {
    (span / mean).floor().max(0.0)
}

/// Projects an M/G/m station `delta` minutes ahead and returns the expected
/// delay and length of stay of a patient joining it then.
pub fn extrapolate_mgm(
    state: &SubsystemState,
    delta: f64,
    interarrival: f64,
    service: &ServiceDistribution,
) -> Result<ExtrapolatedState> {
    let progress = server_progress(state, |_| *service)?;
    let mean = service.mean();
    let queue_now = state.queue_total() as f64;
    let w_now = net_remaining(&progress);
    let servers = progress.len() as f64;

    let arrivals = expected_arrivals(delta, interarrival);
    let completions = (queue_now + arrivals / 2.0).min(servers * completions_per_server(delta - w_now, mean));
    let queue_len = (queue_now + arrivals - completions).max(0.0);
    let (elapsed, remaining) = future_remaining(&progress, delta, queue_now + arrivals, service)?;
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
