use std::io::Write;

use crate::error::Result;
use crate::phc::types::{PatientRecord, StationId};

/// Writes one CSV row per outpatient; unvisited stations leave their cells empty.
pub fn write_patient_records<W: Write>(out: W, records: &[PatientRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = [
        "id", "class", "age", "preferred", "visited", "decision_time", "arrival",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for st in StationId::ALL {
        for col in ["enter", "start", "end"] {
            header.push(format!("{}_{col}", st.label()));
        }
    }
    header.extend(["exit".to_string(), "los".to_string()]);
    w.write_record(&header)?;

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.id.to_string(),
            "outpatient".to_string(),
            r.age.to_string(),
            r.preferred.to_string(),
            r.visited.to_string(),
            r.decision_time.to_string(),
            r.arrival.to_string(),
        ];
        for st in StationId::ALL {
            let v = r.visit(st);
            row.push(opt(v.map(|v| v.enter)));
            row.push(opt(v.map(|v| v.start)));
            row.push(opt(v.map(|v| v.end)));
        }
        row.push(opt(r.exit));
        row.push(opt(r.los()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
