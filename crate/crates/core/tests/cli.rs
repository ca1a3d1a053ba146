use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use bridge_pinn::vision::render::{reference_designs, render};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bridge-pinn"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn bridge-pinn")
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

/// Synthesized 15-row source and its 100-row augmentation.
fn datasets(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let src = dir.join("source.csv");
    let aug = dir.join("aug.csv");
    json_stdout(&run(&["synthesize", "--out", p(&src), "--seed", "42"]));
    json_stdout(&run(&["augment", "--in", p(&src), "--out", p(&aug), "--count", "100", "--seed", "42"]));
    (src, aug)
}

#[test]
fn augment_counts_reproducibility_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (src, aug) = datasets(dir.path());
    assert_eq!(csv_rows(&src), 15);
    assert_eq!(csv_rows(&aug), 100);

    let again = dir.path().join("again.csv");
    let out = json_stdout(&run(&["augment", "--in", p(&src), "--out", p(&again), "--count", "100", "--seed", "42"]));
    assert_eq!(out["source_rows"], 15);
    assert_eq!(out["output_rows"], 100);
    assert_eq!(std::fs::read(&aug).unwrap(), std::fs::read(&again).unwrap());

    let shrink = run(&["augment", "--in", p(&src), "--out", p(&dir.path().join("x.csv")), "--count", "10"]);
    assert_eq!(shrink.status.code(), Some(2));
    assert!(shrink.stdout.is_empty());

    assert_eq!(run(&["augment", "--in", "missing.csv", "--out", "x.csv"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn train_evaluate_predict_report() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aug) = datasets(dir.path());
    let model = dir.path().join("pinn.json");
    let history = dir.path().join("history.csv");
    let out = json_stdout(&run(&["train", "--data", p(&aug), "--arch", "pinn", "--out", p(&model), "--history", p(&history)]));
    assert!(model.is_file());
    let epochs = out["epochs_run"].as_u64().unwrap() as usize;
    assert!(epochs > 0 && epochs <= 200);
    assert_eq!(csv_rows(&history), epochs);

    let report = dir.path().join("report");
    let args = ["evaluate", "--model", p(&model), "--data", p(&aug), "--report", p(&report), "--history", p(&history), "--test-fraction", "0.2"];
    let out = json_stdout(&run(&args));
    assert!(out["metrics"]["r2"].as_f64().unwrap() >= 0.90, "{out}");
    let mut files: Vec<String> = std::fs::read_dir(&report).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["error_distribution.csv", "metrics.json", "physics_contribution.csv", "range_breakdown.csv", "sensitivity.csv"]);

    let missing = run(&["evaluate", "--model", p(&dir.path().join("nope.json")), "--data", p(&aug), "--report", p(&report)]);
    assert_eq!(missing.status.code(), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,height_mm\nx,3\n").unwrap();
    let wrong = run(&["evaluate", "--model", p(&model), "--data", p(&bad), "--report", p(&report)]);
    assert_eq!(wrong.status.code(), Some(1));
    assert!(!wrong.stderr.is_empty());

    let mut child = bin().args(["predict", "--model", p(&model)]).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(br#"{"beam_count": 30, "mean_length_mm": 80, "mean_angle_deg": 45}"#).unwrap();
    let out = json_stdout(&child.wait_with_output().unwrap());
    assert!(out["weight_g"].as_f64().unwrap().is_finite());
    assert_eq!(out["arch"], "pinn");

    let mut child = bin().args(["predict", "--model", p(&model)]).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(br#"{"beam_count": 0, "mean_length_mm": 80, "mean_angle_deg": 45}"#).unwrap();
    assert_eq!(child.wait_with_output().unwrap().status.code(), Some(2));

    let plots = dir.path().join("plots");
    let out = json_stdout(&run(&["report", "--history", p(&history), "--out", p(&plots)]));
    assert_eq!(out["epochs"].as_u64().unwrap() as usize, epochs);
    assert_eq!(csv_rows(&plots.join("loss_curves.csv")), epochs);
    assert!(plots.join("physics_contribution.csv").is_file());
}

#[test]
fn train_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (_, aug) = datasets(dir.path());
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let model = dir.path().join(format!("{tag}.json"));
        let history = dir.path().join(format!("{tag}.csv"));
        json_stdout(&run(&["train", "--data", p(&aug), "--arch", "pikan", "--epochs", "5", "--out", p(&model), "--history", p(&history)]));
        outputs.push((std::fs::read(model).unwrap(), std::fs::read(history).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn extract_matches_render_and_writes_stages() {
    let dir = tempfile::tempdir().unwrap();
    let design = &reference_designs()[2];
    let png = dir.path().join("truss.png");
    render(design, 4.0).save(&png).unwrap();
    let stages = dir.path().join("stages");
    let out = json_stdout(&run(&["extract", "--image", p(&png), "--scale", "0.5", "--stages", p(&stages)]));
    assert_eq!(out["beam_count"].as_u64().unwrap() as usize, design.members.len());
    let total: f64 = design.member_lengths_px().iter().sum::<f64>() * 0.5;
    assert!((out["total_length_mm"].as_f64().unwrap() - total).abs() / total < 0.05);
    assert_eq!(std::fs::read_dir(&stages).unwrap().count(), 7);

    assert_eq!(run(&["extract", "--image", p(&png), "--scale", "0"]).status.code(), Some(2));
    let junk = dir.path().join("junk.png");
    std::fs::write(&junk, b"not an image").unwrap();
    assert_eq!(run(&["extract", "--image", p(&junk), "--scale", "0.5"]).status.code(), Some(1));
}

fn http_get(addr: &str, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(addr).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").ok()?;
    let mut response = String::new();
    stream.read_to_string(&mut response).ok()?;
    Some(response)
}

#[test]
fn serve_answers_models() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = bin().args(["serve"]).env("BRIDGE_BIND", &addr).env_remove("BRIDGE_MODEL_PATH").stdout(Stdio::null()).stderr(Stdio::null()).spawn().unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let response = loop {
        if let Some(r) = http_get(&addr, "/api/models") {
            break r;
        }
        assert!(Instant::now() < deadline, "server did not come up");
        std::thread::sleep(Duration::from_millis(100));
    };
    let missing = http_get(&addr, "/api/unknown").unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains(r#"{"models":[]}"#), "{response}");
    assert!(missing.starts_with("HTTP/1.1 404"), "{missing}");
}
