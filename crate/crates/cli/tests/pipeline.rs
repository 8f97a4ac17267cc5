use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use condrecip::event_store::EventLog;
use condrecip::nulls::{NullConfig, NullDistribution, NullModel};
use condrecip::pedigree_geo::KinshipMatrix;
use condrecip::reciprocity::{short_window_stat, PairClassSel};

const SCENARIO: &str = "n_families = 20\nn_days = 56\n\n[kin]\nclans = 3\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_condrecip"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}");
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

/// synth → fit-null → calibrate → envelope → reciprocity → glmm in `dir`.
fn chain(dir: &Path, threads: &str) {
    let scen = dir.join("scenario_in.toml");
    fs::write(&scen, SCENARIO).unwrap();
    let t = ["--seed", "11", "--threads", threads];
    let d = |n| p(dir, n);
    ok(&[&["synth", "--scenario", &scen.display().to_string(), "--out-dir", &d("")][..], &t].concat());
    ok(&[&["fit-null", "--log", &d("log.json"), "--kinship", &d("kinship.csv"), "--level", "kin", "-o", &d("null.json")][..], &t].concat());
    ok(&[&["calibrate", "--null", &d("null.json"), "--log", &d("log.json"), "--reps", "200", "--report", &d("calibration.json"), "-o", &d("null_cal.json")][..], &t].concat());
    let null = ["--log", &d("log.json"), "--null", &d("null_cal.json"), "--kinship", &d("kinship.csv"), "--reps", "120"];
    ok(&[&["envelope"][..], &null, &["-o", &d("envelope.csv")], &t].concat());
    ok(&[&["reciprocity"][..], &null, &["--class", "not_close_kin", "--pairs", &d("pairs.csv"), "-o", &d("stat.csv")], &t].concat());
    ok(&[&["glmm", "--log", &d("log.json"), "--kinship", &d("kinship.csv"), "--model", "A", "--model", "D", "--out-dir", &d("glmm")][..], &t].concat());
}

const NUMERICAL: [&str; 12] = [
    "log.json",
    "truth.json",
    "kinship.csv",
    "pedigree.csv",
    "null.json",
    "null_cal.json",
    "calibration.json",
    "envelope.csv",
    "stat.csv",
    "pairs.csv",
    "glmm/table.csv",
    "glmm/fit_D.json",
];

#[test]
fn pipeline_is_byte_identical_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    chain(a.path(), "1");
    chain(b.path(), "4");
    for f in NUMERICAL {
        let x = fs::read(a.path().join(f)).unwrap();
        let y = fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between thread counts");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    let runs = manifest["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 5);
    assert!(runs.iter().all(|r| r["seed"] == 11 && r["status"] == "ok"));
    assert!(a.path().join("glmm/manifest.json").exists());

    // Composability: the CLI statistic equals the in-process computation.
    let dir = a.path();
    let log = EventLog::from_json(&fs::read_to_string(dir.join("log.json")).unwrap()).unwrap();
    let kin = KinshipMatrix::read_csv(fs::File::open(dir.join("kinship.csv")).unwrap())
        .unwrap()
        .aligned_to(log.families())
        .unwrap();
    let model = NullModel::from_json(&fs::read_to_string(dir.join("null_cal.json")).unwrap()).unwrap();
    let mut cfg = NullConfig::new(120, 11);
    cfg.window = 3;
    let dist = NullDistribution::build(&model, log.mask(), &kin, cfg).unwrap();
    let curves = dist.observed_curves(&log).unwrap();
    let class = PairClassSel::NotCloseKin;
    let s = short_window_stat(&curves, 3, class, &kin, dist.means(), Some(dist.window_null(class)));
    let text = fs::read_to_string(dir.join("stat.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "not_close_kin");
    assert_eq!(row[2], s.mean.map(|v| v.to_string()).unwrap_or_default());
    assert_eq!(row[6], s.p_value.map(|v| v.to_string()).unwrap_or_default());
    let env = dist.evaluate(&log).unwrap();
    let mut buf = Vec::new();
    env.write_csv(&mut buf).unwrap();
    assert_eq!(buf, fs::read(dir.join("envelope.csv")).unwrap());
}

#[test]
fn report_matches_the_chained_commands() {
    let a = tempfile::tempdir().unwrap();
    chain(a.path(), "2");
    let d = |n| p(a.path(), n);
    let rep = a.path().join("report");
    ok(&[
        "report", "--log", &d("log.json"), "--null", &d("null_cal.json"), "--kinship", &d("kinship.csv"), "--reps", "120",
        "--model", "A", "--model", "D", "--out-dir", &rep.display().to_string(), "--seed", "11",
    ]);
    assert_eq!(fs::read(rep.join("envelope.csv")).unwrap(), fs::read(a.path().join("envelope.csv")).unwrap());
    assert_eq!(fs::read(rep.join("table.csv")).unwrap(), fs::read(a.path().join("glmm/table.csv")).unwrap());
    let window = fs::read_to_string(rep.join("window.csv")).unwrap();
    let stat = fs::read_to_string(a.path().join("stat.csv")).unwrap();
    assert!(window.contains(stat.lines().nth(1).unwrap()));
    for f in ["pair_curves.csv", "weekly.csv", "summary.json", "window_pairs.csv", "manifest.json"] {
        assert!(rep.join(f).exists(), "{f}");
    }
    let weekly = fs::read_to_string(rep.join("weekly.csv")).unwrap();
    assert_eq!(weekly.lines().count(), 1 + 8);
}

#[test]
fn ingest_reconciles_interviews() {
    let dir = tempfile::tempdir().unwrap();
    let fam = dir.path().join("families.csv");
    let int = dir.path().join("interviews.csv");
    fs::write(&fam, "id,head_mean_age,size,lat,lon\nA,40,5,-14.80,-66.80\nB,35.5,3,-14.81,-66.81\nC,60,2,-14.82,-66.80\n").unwrap();
    fs::write(
        &int,
        "reporter_id,interview_date,covered_date,host_id,guest_id,role\n\
         A,2007-05-03,2007-05-01,A,B,as_host\n\
         A,2007-05-03,2007-05-02,,,\n\
         B,2007-05-03,2007-05-02,A,B,as_guest\n\
         B,2007-05-03,2007-05-01,,,\n\
         C,2007-05-03,2007-05-02,A,C,as_host\n",
    )
    .unwrap();
    let out = dir.path().join("log.json");
    ok(&[
        "ingest", "--interviews", &int.display().to_string(), "--families", &fam.display().to_string(), "--seed", "7",
        "--rejected", &p(dir.path(), "rejected.csv"), "-o", &out.display().to_string(),
    ]);
    let log = EventLog::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(log.n_families(), 3);
    assert!(log.event_count() >= 1);
    let rejected = fs::read_to_string(dir.path().join("rejected.csv")).unwrap();
    assert_eq!(rejected.lines().count(), 2);
    assert!(dir.path().join("manifest.json").exists());
}

fn code(args: &[&str]) -> Option<i32> {
    run(args).status.code()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["envelope", "--log"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["fit-null", "--log", "/nonexistent/log.json", "-o", &p(dir.path(), "n.json")]), Some(2));
    assert_eq!(
        code(&["ingest", "--interviews", "a.csv", "--families", "b.csv", "--kinship-out", "k.csv", "-o", "x.json"]),
        Some(1)
    );
    fs::write(dir.path().join("s.toml"), SCENARIO).unwrap();
    ok(&["synth", "--scenario", &p(dir.path(), "s.toml"), "--out-dir", &p(dir.path(), "")]);
    fs::write(dir.path().join("bad.toml"), "name = \"bad\"\nfixed = [\"shoe_size\"]\n").unwrap();
    assert_eq!(
        code(&["glmm", "--log", &p(dir.path(), "log.json"), "--model", &p(dir.path(), "bad.toml"), "--out-dir", &p(dir.path(), "g")]),
        Some(2)
    );
    // Kinship covariate without a kinship table.
    assert_eq!(
        code(&["glmm", "--log", &p(dir.path(), "log.json"), "--model", "D", "--out-dir", &p(dir.path(), "g")]),
        Some(2)
    );
    assert_eq!(code(&["synth", "--scenario", &p(dir.path(), "bad.toml")]), Some(2));
}

#[test]
fn dump_scenario_roundtrips() {
    let out = run(&["synth", "--dump-scenario"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let s = condrecip::synth::Scenario::from_toml(&text).unwrap();
    assert_eq!(s, condrecip::synth::Scenario::default());
}
