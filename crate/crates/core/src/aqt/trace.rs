use std::io::Write;

use serde::Serialize;

use crate::aqt::predictors::FacilityPrediction;
use crate::error::Result;

/// One flattened prediction, every intermediate as its own column.
#[derive(Debug, Serialize)]
struct TraceRow {
    patient: u64,
    facility: usize,
    time: f64,
    delta: f64,
    visits_ncd: bool,
    ncd_arrivals: f64,
    ncd_completions: f64,
    ncd_queue: f64,
    ncd_elapsed: f64,
    ncd_remaining: f64,
    ncd_delay: f64,
    ncd_los: f64,
    doc_horizon: f64,
    doc_arrivals_op: f64,
    doc_arrivals_ip: f64,
    doc_arrivals_cbp: f64,
    doc_priority_service_mean: f64,
    doc_priority_interarrival: f64,
    doc_priority_queue: f64,
    doc_op_completions: f64,
    doc_op_queue: f64,
    doc_elapsed: f64,
    doc_remaining: f64,
    doc_naive_delay: f64,
    doc_delay: f64,
    doc_los: f64,
    doc_unstable: bool,
    lab_arrivals: f64,
    lab_completions: f64,
    lab_queue: f64,
    lab_elapsed: f64,
    lab_remaining: f64,
    lab_delay: f64,
    lab_los: f64,
    phar_arrivals: f64,
    phar_completions: f64,
    phar_queue: f64,
    phar_elapsed: f64,
    phar_remaining: f64,
    phar_delay: f64,
    phar_los: f64,
    total: f64,
}

/// Writes prediction intermediates as CSV for offline comparison.
pub struct PredictionTraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> PredictionTraceWriter<W> {
    pub fn new(out: W) -> Self {
        PredictionTraceWriter {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, patient: u64, facility: usize, time: f64, p: &FacilityPrediction) -> Result<()> {
        let (n, d, l, ph) = (&p.ncd, &p.doctor, &p.lab, &p.pharmacy);
        self.inner.serialize(TraceRow {
            patient,
            facility,
            time,
            delta: p.delta,
            visits_ncd: p.visits_ncd,
            ncd_arrivals: n.arrivals,
            ncd_completions: n.completions,
            ncd_queue: n.queue_len,
            ncd_elapsed: n.elapsed,
            ncd_remaining: n.remaining,
            ncd_delay: n.delay,
            ncd_los: n.los,
            doc_horizon: d.horizon,
            doc_arrivals_op: d.arrivals_outpatient,
            doc_arrivals_ip: d.arrivals_inpatient,
            doc_arrivals_cbp: d.arrivals_childbirth,
            doc_priority_service_mean: d.priority_service_mean,
            doc_priority_interarrival: d.priority_interarrival,
            doc_priority_queue: d.priority_queue,
            doc_op_completions: d.outpatient_completions,
            doc_op_queue: d.outpatient_queue,
            doc_elapsed: d.elapsed,
            doc_remaining: d.remaining,
            doc_naive_delay: d.naive_delay,
            doc_delay: d.delay,
            doc_los: d.los,
            doc_unstable: d.unstable,
            lab_arrivals: l.arrivals,
            lab_completions: l.completions,
            lab_queue: l.queue_len,
            lab_elapsed: l.elapsed,
            lab_remaining: l.remaining,
            lab_delay: l.delay,
            lab_los: l.los,
            phar_arrivals: ph.arrivals,
            phar_completions: ph.completions,
            phar_queue: ph.queue_len,
            phar_elapsed: ph.elapsed,
            phar_remaining: ph.remaining,
            phar_delay: ph.delay,
            phar_los: ph.los,
            total: p.los.total,
        })?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
