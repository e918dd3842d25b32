use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn wattline() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wattline"));
    c.env_remove("WATTLINE_SESSION_DIR").env_remove("SOURCE_DATE_EPOCH");
    c
}

fn run(args: &[&str]) -> Output {
    wattline().args(args).output().unwrap()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    wattline().env("WATTLINE_SESSION_DIR", dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A running `wattline simulate`; killed on drop.
struct Sim {
    child: Child,
    endpoint: String,
}

impl Sim {
    fn start(dir: &Path, profile: &str) -> Self {
        let path = dir.join("profile.json");
        std::fs::write(&path, profile).unwrap();
        let mut child = wattline()
            .args(["simulate", "--profile", path.to_str().unwrap()])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let endpoint = line.trim().rsplit(' ').next().unwrap().to_string();
        assert!(endpoint.starts_with("http://"), "{line}");
        Sim { child, endpoint }
    }

    fn host_port(&self) -> &str {
        self.endpoint.trim_start_matches("http://")
    }
}

impl Drop for Sim {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

const CONSTANT_116: &str = r#"{"start_ts_ms": 0, "segments": [{"duration_ms": 600000, "watts": 116}]}"#;

#[test]
fn estimate_reproduces_reference_chain() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("estimate.json");
    let o = run(&[
        "estimate", "--models", "7", "--datasets", "3", "--configs", "16", "--per-run-kwh", "0.45", "--overhead", "40",
        "--factor", "481", "--submissions", "269", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("2,909.088 kg"), "{text}");
    assert!(text.contains("782,544.672 kg"), "{text}");
    assert!(text.contains("782.5 tCO₂e"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!((v["per_paper_g"].as_f64().unwrap() - 2_909_088.0).abs() < 1.0);
    assert!((v["event_g"].as_f64().unwrap() - 782_544_672.0).abs() < 1.0);
    let names: Vec<&str> = v["assumptions"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"overhead") && names.contains(&"submissions"));
}

#[test]
fn estimate_from_measured_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let analysis = dir.path().join("analysis.json");
    std::fs::write(
        &analysis,
        r#"{"session_id":"m","interval_ms":500,"offset_corrected":true,"baseline":null,"sample_count":3,"epochs":1,
"total_kwh":0.5,"phases":[{"label":"train","start_ms":0,"end_ms":1000,"gross_kwh":0.3,"net_kwh":null,"duration_s":1.0},
{"label":"eval","start_ms":1000,"end_ms":2000,"gross_kwh":0.15,"net_kwh":null,"duration_s":1.0}],
"stats":{"all_phases":null,"by_label":{}},"warnings":[]}"#,
    )
    .unwrap();
    let a = analysis.to_str().unwrap();
    let o = run(&["estimate", "--models", "7", "--datasets", "3", "--configs", "16", "--analysis", a, "--submissions", "269"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pipeline: 151.2 kWh"), "{}", stdout(&o));
    let o = run(&[
        "estimate", "--models", "1", "--datasets", "1", "--configs", "1", "--analysis", a, "--label", "train",
        "--submissions", "1",
    ]);
    assert!(stdout(&o).contains("pipeline: 0.3 kWh"), "{}", stdout(&o));
}

#[test]
fn carbon_of_zero_energy() {
    let o = run(&["carbon", "--kwh", "0", "--region", "world", "--year", "2023"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("emissions: 0 gCO₂e"), "{}", stdout(&o));
}

#[test]
fn missing_factor_row_is_a_lookup_failure() {
    let o = run(&["carbon", "--kwh", "1", "--region", "atlantis", "--year", "2023"]);
    assert_eq!(o.status.code(), Some(4));
    let err = stderr(&o);
    assert!(err.contains("atlantis") && err.contains("world/2023"), "{err}");
}

#[test]
fn carbon_flags_offset_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("carbon.json");
    let o = run(&[
        "carbon", "--usage", "6100@gothenburg:2023", "--usage", "500@germany", "--offset-trees", "42", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("446.5 kgCO₂e"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["total_g"].as_f64().unwrap(), 446_500.0);
    assert_eq!(v["deviations"][0]["published"].as_f64().unwrap(), 11.0);
}

#[test]
fn simulate_with_missing_profile() {
    let o = run(&["simulate", "--profile", "/definitely/not/here.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/definitely/not/here.json"), "{}", stderr(&o));
}

#[test]
fn simulate_with_negative_watts() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"start_ts_ms": 0, "segments": [{"duration_ms": 1000, "watts": -5}]}"#).unwrap();
    let o = run(&["simulate", "--profile", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("invalid trace profile"), "{}", stderr(&o));
}

#[test]
fn simulated_plug_serves_status() {
    let dir = tempfile::tempdir().unwrap();
    let sim = Sim::start(dir.path(), CONSTANT_116);
    let mut s = TcpStream::connect(sim.host_port()).unwrap();
    s.write_all(b"GET /status HTTP/1.0\r\nHost: x\r\n\r\n").unwrap();
    let mut resp = String::new();
    s.read_to_string(&mut resp).unwrap();
    assert!(resp.starts_with("HTTP/1.0 200") || resp.starts_with("HTTP/1.1 200"), "{resp}");
    let body: serde_json::Value = serde_json::from_str(resp.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["power_w"], 116.0);
    assert!(body["energy_wh_total"].as_f64().unwrap() >= 0.0);
}

#[test]
fn mark_appends_marker_lines() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["mark", "training", "begin"]).status.success());
    assert!(run_in(dir.path(), &["mark", "training", "end"]).status.success());
    let text = std::fs::read_to_string(dir.path().join("markers.jsonl")).unwrap();
    let lines: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["label"], "training");
    assert_eq!(lines[0]["kind"], "begin");
    assert_eq!(lines[1]["kind"], "end");
    assert!(lines[0]["ts_ms"].as_i64().unwrap() <= lines[1]["ts_ms"].as_i64().unwrap());
}

#[test]
fn mark_validates_kind_and_needs_a_session() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_in(dir.path(), &["mark", "training", "middle"]).status.code(), Some(2));
    assert_eq!(run(&["mark", "training", "begin"]).status.code(), Some(2));
}

#[test]
fn meter_against_nothing_is_a_transport_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["meter", "--endpoint", "127.0.0.1:9", "--duration-s", "2", "--probes", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let o = run_in(dir.path(), &["meter", "--endpoint", "127.0.0.1:9", "--probes", "0", "--failure-limit", "3", "--interval-ms", "100"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn meter_interval_below_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["meter", "--endpoint", "127.0.0.1:9", "--interval-ms", "50", "--probes", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn baseline_meter_mark_analyze_report() {
    let dir = tempfile::tempdir().unwrap();
    let sim = Sim::start(dir.path(), CONSTANT_116);
    let session = dir.path().join("session");
    let ep = sim.endpoint.as_str();

    let o = run_in(&session, &["baseline", "--endpoint", ep, "--window-s", "1.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(session.join("session.json")).unwrap()).unwrap();
    assert_eq!(manifest["baseline"]["mean_w"].as_f64().unwrap(), 116.0);
    assert!(manifest["baseline"]["stddev_w"].as_f64().unwrap() < 1e-9);

    let meter = wattline()
        .env("WATTLINE_SESSION_DIR", &session)
        .args(["meter", "--endpoint", ep, "--duration-s", "3"])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    std::thread::sleep(std::time::Duration::from_millis(700));
    assert!(run_in(&session, &["mark", "train", "begin"]).status.success());
    std::thread::sleep(std::time::Duration::from_millis(1200));
    assert!(run_in(&session, &["mark", "train", "end"]).status.success());
    let o = meter.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let samples = std::fs::read_to_string(session.join("samples.jsonl")).unwrap().lines().count();
    assert!((5..=7).contains(&samples), "{samples} samples");

    assert!(run_in(&session, &["annotate", "hardware=test rig", "location=lab"]).status.success());
    let o = run_in(&session, &["analyze"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(session.join("analysis.json")).unwrap()).unwrap();
    let phase = &a["phases"][0];
    let secs = phase["duration_s"].as_f64().unwrap();
    let kwh = phase["gross_kwh"].as_f64().unwrap();
    assert!((kwh - 116.0 * secs / 3.6e6).abs() < 1e-9, "{kwh} for {secs} s");
    assert!(phase["net_kwh"].as_f64().unwrap() < 1e-9);

    let c = session.join("carbon.json");
    assert!(run_in(&session, &["carbon", "--analysis", session.join("analysis.json").to_str().unwrap(), "--out", c.to_str().unwrap()])
        .status
        .success());
    let o = run_in(&session, &["report", "--generated-at-ms", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = std::fs::read_to_string(session.join("report.md")).unwrap();
    assert!(md.contains("test rig") && md.contains("## Documentation checklist"), "{md}");
    assert_eq!(md.matches("\n19. ").count(), 1);
}

#[test]
fn analyze_rejects_unpaired_markers() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path();
    std::fs::write(
        s.join("session.json"),
        r#"{"session_id":"x","clock_offset":null,"baseline":null,"annotations":{},"epochs":[]}"#,
    )
    .unwrap();
    std::fs::write(
        s.join("samples.jsonl"),
        "{\"ts_ms\":0,\"watts\":10.0,\"wh_total\":0.0}\n{\"ts_ms\":1000,\"watts\":10.0,\"wh_total\":0.01}\n",
    )
    .unwrap();
    std::fs::write(s.join("markers.jsonl"), "{\"ts_ms\":500,\"label\":\"t\",\"kind\":\"end\"}\n").unwrap();
    let o = run_in(s, &["analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pairing"), "{}", stderr(&o));
}

#[test]
fn ingest_markers_from_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.log.jsonl");
    std::fs::write(&log, "{\"ts_ms\":20,\"label\":\"eval\",\"kind\":\"end\"}\n{\"ts_ms\":10,\"label\":\"eval\",\"kind\":\"begin\"}\n").unwrap();
    let session = dir.path().join("s");
    let o = run_in(&session, &["ingest-markers", log.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(session.join("markers.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(run_in(&session, &["ingest-markers", "/no/such/log"]).status.code(), Some(2));
}

#[test]
fn report_rejects_unknown_format() {
    let dir = tempfile::tempdir().unwrap();
    let est = dir.path().join("estimate.json");
    run(&[
        "estimate", "--models", "1", "--datasets", "1", "--configs", "1", "--per-run-kwh", "1", "--submissions", "1",
        "--out", est.to_str().unwrap(),
    ]);
    let o = run(&["report", "--estimate", est.to_str().unwrap(), "--format", "pdf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pdf"));
    let o = run(&["report", "--estimate", est.to_str().unwrap(), "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("section,label,quantity,value,unit\n"));
}

#[test]
fn reference_tables() {
    let o = run(&["reference", "stats"]);
    assert!(stdout(&o).contains("DGCF^RB,recommender,1.4553,1.2913,0.0046,6.5861"));
    let o = run(&["reference", "hardware"]);
    assert!(stdout(&o).contains("Modern Workstation I,2023,116,2.03,547"));
    assert_eq!(run(&["reference", "nope"]).status.code(), Some(2));
}
