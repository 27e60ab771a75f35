/*
Copyright 2026 The Inchworm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

use std::io::ErrorKind;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::process::{Command as Process, Output, Stdio};
use std::time::{Duration, Instant};

use inchworm_sim::protocol::{
    read_frame, write_frame, ClientMessage, ServerMessage, PROTOCOL_VERSION,
};
use inchworm_sim::{Metrics, Scenario, Trace};

fn inchworm(args: &[&str]) -> Output {
    Process::new(env!("CARGO_BIN_EXE_inchworm"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn shipped(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn mockup_prints_the_built_in_scenario() {
    let out = inchworm(&["mockup"]);
    assert!(out.status.success());
    let printed = Scenario::from_json_str(&stdout(&out)).unwrap();
    assert_eq!(printed, Scenario::mockup());
}

#[test]
fn check_reports_validity_and_feasibility() {
    let out = inchworm(&["check", &shipped("mockup.json"), "--json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["interfaces"], 8);
    assert_eq!(report["blocks"], 14);
    assert_eq!(report["gait"].as_array().unwrap().len(), 2);

    let wall = shipped("wall_extended.json");
    let relaxed = inchworm(&["check", &wall]);
    assert!(relaxed.status.success());
    assert!(stdout(&relaxed).contains("INFEASIBLE"));
    let strict = inchworm(&["check", &wall, "--strict"]);
    assert!(!strict.status.success());
}

#[test]
fn check_names_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&Scenario::mockup().to_json_string()).unwrap();
    doc["blocks"][3]["half_extents"] = serde_json::json!([0.1, -0.1, 0.1]);
    std::fs::write(&path, doc.to_string()).unwrap();
    let out = inchworm(&["check", path.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(
        stderr(&out).contains("blocks[3].half_extents"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn plan_writes_metrics_and_a_trace_that_plots() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("plan.jsonl");
    let metrics_path = dir.path().join("metrics.json");
    let out = inchworm(&[
        "plan",
        &shipped("mockup.json"),
        "--end",
        "E",
        "--to",
        "F3",
        "--seed",
        "2",
        "--budget-s",
        "1",
        "--duration-s",
        "3",
        "--trace",
        trace_path.to_str().unwrap(),
        "--metrics",
        metrics_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed: Metrics = serde_json::from_str(&stdout(&out)).unwrap();
    let saved: Metrics =
        serde_json::from_str(&std::fs::read_to_string(&metrics_path).unwrap()).unwrap();
    assert_eq!(printed, saved);
    assert_eq!(printed.steps.len(), 1);
    assert!(printed.steps[0].success);
    assert_eq!(printed.steps[0].iterations, Some(2000));

    let trace = Trace::read_jsonl(std::io::BufReader::new(
        std::fs::File::open(&trace_path).unwrap(),
    ))
    .unwrap();
    trace.validate().unwrap();
    assert_eq!(trace.header.seed, 2);

    let csv = inchworm(&[
        "trace",
        trace_path.to_str().unwrap(),
        "--plot",
        "--format",
        "csv",
    ]);
    assert!(csv.status.success());
    let text = stdout(&csv);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,label,moved_end,sample,x,y,z"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("0,Regular,E,")));

    let summary = inchworm(&["trace", trace_path.to_str().unwrap()]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&summary)).unwrap();
    assert_eq!(doc["records"], trace.records.len());
}

#[test]
fn plan_to_the_current_interface_fails() {
    let out = inchworm(&["plan", &shipped("mockup.json"), "--end", "E", "--to", "F1"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("rejected"), "{}", stderr(&out));
}

#[test]
fn walk_follows_a_script() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("steps.json");
    std::fs::write(
        &script,
        r#"[{"moved_end": "E", "target": "F3", "duration": 3.0}]"#,
    )
    .unwrap();
    let out = inchworm(&[
        "walk",
        &shipped("mockup.json"),
        "--script",
        script.to_str().unwrap(),
        "--budget-s",
        "1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m: Metrics = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(m.steps.len(), 1);
    assert_eq!(m.steps[0].target, "F3");

    std::fs::write(&script, r#"[{"moved_end": "E", "target": "F3"}]"#).unwrap();
    let bad = inchworm(&[
        "walk",
        &shipped("mockup.json"),
        "--script",
        script.to_str().unwrap(),
    ]);
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("duration"), "{}", stderr(&bad));
}

#[test]
fn run_replays_a_command_file() {
    let dir = tempfile::tempdir().unwrap();
    let commands = dir.path().join("commands.json");
    std::fs::write(
        &commands,
        r#"[
            {"t": 0.0, "command": {"op": "undock", "end": "E"}},
            {"t": 2.5, "command": {"op": "jog", "wrench": [0, 0, 1, 0, 0, 0]}},
            {"t": 3.0, "command": {"op": "stop"}}
        ]"#,
    )
    .unwrap();
    let trace_path = dir.path().join("run.jsonl");
    let out = inchworm(&[
        "run",
        &shipped("mockup.json"),
        "--commands",
        commands.to_str().unwrap(),
        "--min-duration-s",
        "3.5",
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = Trace::read_jsonl(std::io::BufReader::new(
        std::fs::File::open(&trace_path).unwrap(),
    ))
    .unwrap();
    assert_eq!(trace.records.len(), 351);
    let lifted =
        trace.records.last().unwrap().tip.translation.z - trace.records[0].tip.translation.z;
    assert!(lifted > 0.0);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn serve_listens_on_the_port_from_the_environment() {
    let port = free_port();
    let mut child = Process::new(env!("CARGO_BIN_EXE_inchworm"))
        .args(["serve", &shipped("mockup.json")])
        .env("INCHWORM_PORT", port.to_string())
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let stream = loop {
        match TcpStream::connect(("127.0.0.1", port)) {
            Ok(s) => break Some(s),
            Err(e) if e.kind() == ErrorKind::ConnectionRefused && Instant::now() < deadline => {
                std::thread::sleep(Duration::from_millis(50))
            }
            Err(_) => break None,
        }
    };
    let welcome = stream.map(|mut s| {
        s.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
        write_frame(
            &mut s,
            &ClientMessage::Hello {
                protocol: PROTOCOL_VERSION.into(),
                client: None,
            },
        )
        .unwrap();
        let body = read_frame(&mut s).unwrap().unwrap();
        serde_json::from_slice::<ServerMessage>(&body).unwrap()
    });
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(
        matches!(welcome, Some(ServerMessage::Welcome { .. })),
        "{welcome:?}"
    );
}
