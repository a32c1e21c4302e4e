use std::net::TcpListener;
use std::process::{Child, Command, Output, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::Value;

use splitplan::baselines::{run_baseline, BaselineKind};
use splitplan::objective::Scenario;
use splitplan::optimizer::enumerate_space;
use splitplan::profile::builtin_profile;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splitplan"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_str(stdout(out).trim()).unwrap()
}

#[test]
fn plan_reports_selection() {
    let v = json(&run(&["plan", "--model", "alexnet"]));
    for key in ["x1", "f1_s", "f2_bytes", "strategy"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
    assert_eq!(v["strategy"], "knee");
    assert_eq!(v["total_layers"], 21);
}

#[test]
fn min_latency_plan_equals_loa() {
    let v = json(&run(&[
        "plan",
        "--model",
        "vgg19",
        "--strategy",
        "min-latency",
    ]));
    let profile = builtin_profile("vgg19").unwrap();
    let space = enumerate_space(&profile, &Scenario::default()).unwrap();
    let loa = run_baseline(BaselineKind::Loa, &space, 44).unwrap();
    assert_eq!(v["x1"], loa.x1());
}

#[test]
fn memory_maximal_strategy_matches_front() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    std::fs::write(
        &scenario,
        r#"{"bandwidth_mbps": 50, "edge": {"storage_mb": 16000}}"#,
    )
    .unwrap();
    let s = scenario.to_str().unwrap();
    let v = json(&run(&[
        "plan",
        "--model",
        "vgg16",
        "--scenario",
        s,
        "--strategy",
        "paper",
    ]));
    let front = run(&["front", "--model", "vgg16", "--scenario", s]);
    let best = stdout(&front)
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .max_by_key(|m| m["f2_bytes"].as_u64().unwrap())
        .unwrap();
    assert_eq!(v["x1"], best["x1"]);
}

#[test]
fn compare_emits_five_rows() {
    let out = run(&["compare", "--model", "alexnet"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "approach,model,x1,f1_s,f2_bytes");
    let approaches: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(approaches, ["lmos", "loa", "eco", "sco", "rs"]);
    assert_eq!(text, stdout(&run(&["compare", "--model", "alexnet"])));
}

#[test]
fn generated_profile_plans_like_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let p = path.to_str().unwrap();
    assert!(run(&["gen-profile", "--model", "vgg13", "--out", p])
        .status
        .success());
    let from_file = json(&run(&["plan", "--profile", p]));
    let builtin = json(&run(&["plan", "--model", "vgg13"]));
    assert_eq!(from_file, builtin);
}

#[test]
fn sweep_writes_csv() {
    let out = run(&["sweep", "--param", "bandwidth", "--model", "vgg16"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("parameter,value,x1,fraction,f1_s,f2_bytes,strategy")
    );
    assert_eq!(lines.count(), 8);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = run(&[
        "sweep",
        "--param",
        "edge-storage",
        "--values",
        "256,16000",
        "--model",
        "vgg16",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(path).unwrap().lines().count(), 3);
}

#[test]
fn curve_has_a_row_per_split() {
    let out = run(&["curve", "--model", "alexnet"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("x1,t_edge_s,t_tx_s,t_server_s,total_s\n"));
    assert_eq!(text.lines().count(), 23);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["plan"]).status.code(), Some(1));
    assert_eq!(
        run(&["plan", "--model", "nosuchnet"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["plan", "--model", "alexnet", "--strategy", "bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&[
            "sweep",
            "--param",
            "bandwidth",
            "--values",
            "500",
            "--model",
            "vgg16"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    let infeasible = run(&["plan", "--model", "alexnet", "--storage-mb", "0"]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert!(infeasible.stdout.is_empty());
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_edge_without_server_is_a_network_error() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let out = run(&[
        "run-edge", "--server", &addr, "--model", "alexnet", "--x1", "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

struct Reaper(Child);

impl Drop for Reaper {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

#[test]
fn serve_and_run_edge_round_trip() {
    let port = TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let server = bin()
        .args([
            "serve",
            "--listen",
            &addr,
            "--model",
            "synthetic-6",
            "--sessions",
            "1",
        ])
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut server = Reaper(server);

    let deadline = Instant::now() + Duration::from_secs(10);
    let out = loop {
        let out = run(&[
            "run-edge",
            "--server",
            &addr,
            "--model",
            "synthetic-6",
            "--x1",
            "2",
            "--bandwidth-mbps",
            "100",
        ]);
        if out.status.code() != Some(3) || Instant::now() > deadline {
            break out;
        }
        thread::sleep(Duration::from_millis(50));
    };
    let v = json(&out);
    assert_eq!(v["match"], true);
    assert_eq!(v["x1"], 2);
    assert_eq!(v["digest"], v["expected_digest"]);
    assert!(server.0.wait().unwrap().success());
}
