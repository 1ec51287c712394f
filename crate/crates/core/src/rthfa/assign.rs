use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::phc::PatientId;

/// Source of the length-of-stay estimate used to rank facilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    /// No assignment: every patient visits the preferred facility.
    None,
    /// Forward simulation of a clone of each candidate facility.
    Actual,
    Aqt,
    Simml,
}

impl std::str::FromStr for PredictorKind {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PredictorKind::None),
            "actual" => Ok(PredictorKind::Actual),
            "aqt" => Ok(PredictorKind::Aqt),
            "simml" => Ok(PredictorKind::Simml),
            other => Err(crate::error::Error::Config(format!("unknown predictor `{other}`"))),
        }
    }
}

/// One facility's entry in a decision.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateScore {
    pub facility: usize,
    pub travel: f64,
    /// `None` when the predictor failed for this facility.
    pub predicted_los: Option<f64>,
}

impl CandidateScore {
    pub fn score(&self) -> Option<f64> {
        self.predicted_los.map(|l| self.travel + l)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentDecision {
    pub patient: PatientId,
    pub time: f64,
    pub preferred: usize,
    pub candidates: Vec<CandidateScore>,
    pub chosen: usize,
    pub complied: bool,
    pub visited: usize,
}

/// Facility with the lowest travel-plus-stay score, ties to the lower index.
/// Falls back to `preferred` when no candidate has a prediction.
pub fn choose_facility(candidates: &[CandidateScore], preferred: usize) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for c in candidates {
        if let Some(s) = c.score() {
            let better = match best {
                None => true,
                Some((bs, bf)) => s < bs || (s == bs && c.facility < bf),
            };
            if better {
                best = Some((s, c.facility));
            }
        }
    }
    best.map_or(preferred, |(_, f)| f)
}

/// Bernoulli compliance: returns `(complied, visited)`.
pub fn comply<R: Rng + ?Sized>(chosen: usize, preferred: usize, rate: f64, rng: &mut R) -> (bool, usize) {
    let complied = rng.gen::<f64>() < rate;
    (complied, if complied { chosen } else { preferred })
}

/// Audit log with one row per decision.
pub fn write_decisions<W: Write>(out: W, decisions: &[AssignmentDecision], facilities: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["patient", "time", "preferred"].iter().map(|s| s.to_string()).collect();
    for j in 0..facilities {
        header.extend([format!("travel_{j}"), format!("predicted_los_{j}"), format!("score_{j}")]);
    }
    header.extend(["chosen", "complied", "visited"].iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for d in decisions {
        let mut row = vec![d.patient.to_string(), d.time.to_string(), d.preferred.to_string()];
        for j in 0..facilities {
            match d.candidates.iter().find(|c| c.facility == j) {
                Some(c) => row.extend([c.travel.to_string(), opt(c.predicted_los), opt(c.score())]),
                None => row.extend([String::new(), String::new(), String::new()]),
            }
        }
        row.extend([d.chosen.to_string(), u8::from(d.complied).to_string(), d.visited.to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
