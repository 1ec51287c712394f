use std::fs;
use std::path::Path;
use std::process::Command;

use phc_rtlos::experiments::OutcomeStats;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_phc-rtlos"))
}

fn write_scenario(dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("tiny.cfg");
    fs::write(
        &path,
        format!(
            "name = \"tiny\"\nhorizon_days = 8\nwarmup_days = 3\nreplications = 2\nseed = 5\n\
             travel = [[15.0, 15.0], [15.0, 15.0]]\n{extra}\n\
             [[facility]]\nname = \"PHC1\"\n\n[[facility]]\nname = \"PHC2\"\n\
             outpatient_interarrival = {{ kind = \"exponential\", mean = 2.0 }}\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_tables_that_aggregate_the_raw_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "");
    let out = dir.path().join("run");
    let status = cli().arg("--config").arg(&cfg).arg("--out").arg(&out).arg("simulate").status().unwrap();
    assert!(status.success());
    let mut raw = csv::Reader::from_path(out.join("outcomes.csv")).unwrap();
    let names: Vec<String> = raw.headers().unwrap().iter().skip(2).map(String::from).collect();
    let rows: Vec<Vec<f64>> = raw
        .records()
        .map(|r| r.unwrap().iter().skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let recomputed = OutcomeStats::from_rows(names, &rows).unwrap();
    let mut summary = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    for (i, rec) in summary.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[0], recomputed.names[i]);
        assert_eq!(rec[1].parse::<f64>().unwrap(), recomputed.mean[i]);
        assert_eq!(rec[2].parse::<f64>().unwrap(), recomputed.sd[i]);
    }
    assert!(fs::read_to_string(out.join("summary.md")).unwrap().contains("| los |"));
}

#[test]
fn assign_writes_the_audit_and_dataset_round_trips_through_train_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_scenario(dir.path(), "predictor = \"aqt\"");
    let out = dir.path().join("assign");
    let status = cli()
        .args(["--reps", "1", "--jobs", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["assign", "--compliance", "0.5"])
        .status()
        .unwrap();
    assert!(status.success());
    let audit = fs::read_to_string(out.join("assignments.csv")).unwrap();
    assert!(audit.starts_with("patient,time,preferred,travel_0"));
    assert!(audit.lines().count() > 100);

    let data = dir.path().join("data");
    assert!(cli().arg("--config").arg(&cfg).arg("--out").arg(&data).arg("dataset").status().unwrap().success());
    let status = cli()
        .arg("--out")
        .arg(&data)
        .arg("train-eval")
        .arg("--dataset")
        .arg(data.join("dataset.csv"))
        .status()
        .unwrap();
    assert!(status.success());
    let mape = fs::read_to_string(data.join("mape.csv")).unwrap();
    assert!(mape.starts_with("predictor,stratum,key,mape_pct"));
    assert!(data.join("model.json").exists());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "replications = \"many\"").unwrap();
    assert_eq!(cli().arg("--config").arg(&bad).arg("simulate").status().unwrap().code(), Some(1));
    assert_eq!(cli().arg("--no-such-flag").arg("simulate").status().unwrap().code(), Some(1));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(cli().arg("--config").arg(&missing).arg("simulate").status().unwrap().code(), Some(1));
    let cfg = write_scenario(dir.path(), "");
    let no_data = dir.path().join("nothing.csv");
    assert_eq!(
        cli().arg("--config").arg(&cfg).arg("train-eval").arg("--dataset").arg(&no_data).status().unwrap().code(),
        Some(2)
    );
}

#[test]
fn report_merges_run_directories() {
    let dir = tempfile::tempdir().unwrap();
    for (name, beta) in [("a", "0"), ("b", "49.5")] {
        let run = dir.path().join(name);
        fs::create_dir_all(&run).unwrap();
        fs::write(run.join("summary.csv"), format!("metric,mean,sd\nbeta,{beta},0.1\n")).unwrap();
    }
    let out = cli().arg("report").arg(dir.path().join("a")).arg(dir.path().join("b")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("| beta | 0.000 (0.100) | 49.500 (0.100) |"), "{text}");
}
