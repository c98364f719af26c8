use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn vigil(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_vigil"));
    c.args(args);
    c.env_remove("RUST_LOG");
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("VIGIL_")) {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str]) -> Output {
    vigil(args).output().expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &Path, extra: &[&str]) {
    let mut args = vec!["gen-fixtures", "--out", s(dir), "--seed", "7"];
    args.extend_from_slice(extra);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const EVENTS: [&str; 8] = [
    "--event", "cam-0:20:10:0", "--event", "cam-1:0:10:1", "--event", "cam-2:40:10:2", "--event", "cam-2:10:10:0",
];

#[test]
fn help_version_and_bad_args() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["capacity-plan", "--throughput", "abc", "--hourly-price", "1"]).status.code(), Some(1));
}

#[test]
fn capacity_plan_matches_reference() {
    let v = json_of(&run(&["--json", "capacity-plan", "--throughput", "3.96", "--chunk-s", "10", "--hourly-price", "3.06"]));
    assert_eq!(v["clients"], 39);
    assert!((v["monthly_cost"].as_f64().unwrap() - 2203.2).abs() < 1e-9);
    let human = run(&["capacity-plan", "--throughput", "3.96", "--hourly-price", "3.06"]);
    let text = String::from_utf8(human.stdout).unwrap();
    assert!(text.contains("39") && text.contains("$2203.20") && text.contains("$55.64"), "{text}");
    assert_eq!(run(&["capacity-plan", "--throughput", "0", "--hourly-price", "3"]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("vigil.toml");
    std::fs::write(&cfg, "window_s = 10\nmystery = 1\n").unwrap();
    let out = run(&["--config", s(&cfg), "capacity-plan", "--throughput", "1", "--hourly-price", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
    let out = vigil(&["capacity-plan", "--throughput", "1", "--hourly-price", "1"])
        .env("VIGIL_WINDOW_S", "-1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = vigil(&["--json", "capacity-plan", "--throughput", "3.96", "--hourly-price", "3.06"])
        .env("VIGIL_WINDOW_S", "5")
        .output()
        .unwrap();
    assert_eq!(json_of(&out)["clients"], 19);
}

#[test]
fn gen_fixtures_rejects_overlap_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gen-fixtures", "--out", s(dir.path()), "--event", "cam-0:0:10:0", "--event", "cam-0:5:10:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
    assert_eq!(run(&["gen-fixtures", "--out", s(dir.path()), "--event", "cam-0:0"]).status.code(), Some(1));

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    gen(&a, &EVENTS);
    gen(&b, &EVENTS);
    for f in ["cam-0.svf", "cam-1.svf", "cam-2.svf", "ground_truth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn prepare_dataset_writes_split_annotation_files() {
    let dir = tempfile::tempdir().unwrap();
    let v = json_of(&run(&["--json", "prepare-dataset", "--out", s(dir.path()), "--class-sizes", "948,948,948,3200"]));
    assert_eq!(v["class_counts"]["train"], serde_json::json!([712, 712, 712, 2400]));
    assert_eq!(v["class_counts"]["val"], serde_json::json!([118, 118, 118, 400]));
    assert_eq!(v["class_counts"]["test"], serde_json::json!([118, 118, 118, 400]));
    let test = std::fs::read_to_string(dir.path().join("test.txt")).unwrap();
    assert_eq!(test.lines().count(), 754);
    assert!(test.lines().all(|l| l.rsplit_once(' ').is_some_and(|(_, c)| ["0", "1", "2", "3"].contains(&c))));

    // re-splitting an annotation file
    let again = dir.path().join("again");
    let v = json_of(&run(&[
        "--json", "prepare-dataset", "--out", s(&again), "--annotations", s(&dir.path().join("train.txt")),
        "--train", "0.5", "--val", "0.25", "--test", "0.25",
    ]));
    assert_eq!(v["class_counts"]["test"], serde_json::json!([178, 178, 178, 600]));

    let out = run(&["prepare-dataset", "--out", s(dir.path()), "--class-sizes", "3,948,948,3200"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["prepare-dataset", "--out", s(dir.path())]).status.code(), Some(1));
}

#[test]
fn simulate_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    gen(&fx, &EVENTS);
    let out = run(&["--json", "simulate", "--fixtures", s(&fx), "--ephemeral"]);
    let report = json_of(&out);
    assert_eq!(report["chunks_processed"], 18);
    assert_eq!(report["alerts_raised"], 4);
    assert_eq!(report["notifications_sent"], 4);
    assert_eq!(String::from_utf8_lossy(&out.stderr).matches("ALERT ").count(), 4);

    let report_path = dir.path().join("report.json");
    std::fs::write(&report_path, &out.stdout).unwrap();
    let v = json_of(&run(&["--json", "evaluate", "--predictions", s(&report_path), "--truth", s(&fx)]));
    assert_eq!(v["evaluated"], 18);
    assert_eq!(v["macro"]["recall"], 100.0);

    // persistent mode writes the configured store and database
    let out = vigil(&["simulate", "--fixtures", s(&fx)])
        .env("VIGIL_STORE_ROOT", s(&dir.path().join("chunks")))
        .env("VIGIL_DATABASE", s(&dir.path().join("db/vigil.db")))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("alerts raised        4"));
    assert!(dir.path().join("db/vigil.db").exists());
    assert!(dir.path().join("chunks/cam-0/0000000000.svf").exists());
}

#[test]
fn evaluate_jsonl_log_with_misclassification() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    gen(&fx, &["--streams", "1", "--event", "cam-0:0:10:0", "--event", "cam-0:10:10:3:6"]);
    let log = dir.path().join("log.jsonl");
    // the "throw" chunk predicted as a fall, everything else right
    let lines = [
        r#"{"chunk_id":"cam-0-0000000000","label":0}"#,
        r#"{"chunk_id":"cam-0-0000010000","label":0}"#,
        r#"{"chunk_id":"cam-0-0000020000","label":3}"#,
        r#"{"chunk_id":"elsewhere-0000000000","label":3}"#,
    ];
    std::fs::write(&log, lines.join("\n")).unwrap();
    let v = json_of(&run(&["--json", "evaluate", "--predictions", s(&log), "--truth", s(&fx.join("ground_truth.json"))]));
    assert_eq!(v["evaluated"], 3);
    assert_eq!(v["missing"].as_array().unwrap().len(), 3);
    assert_eq!(v["unmatched_predictions"], 1);
    assert_eq!(v["normal_misclassified_as"]["Falling"], serde_json::json!([["throw", 1]]));
    let human = run(&["evaluate", "--predictions", s(&log), "--truth", s(&fx)]);
    assert!(String::from_utf8_lossy(&human.stdout).contains("throw (1)"));

    std::fs::write(&log, "{not json").unwrap();
    assert_eq!(run(&["evaluate", "--predictions", s(&log), "--truth", s(&fx)]).status.code(), Some(1));
}

#[test]
fn bench_and_tradeoffs() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    gen(&fx, &[]);
    let v = json_of(&run(&["--json", "bench-throughput", "--fixtures", s(&fx)]));
    assert_eq!(v["samples"], 18);
    assert!(v["samples_per_second"].as_f64().unwrap() > 0.0);
    assert_eq!(run(&["bench-throughput", "--fixtures", s(&fx), "--samples", "5"]).status.code(), Some(1));

    let out = dir.path().join("report");
    let text = run(&["report-tradeoffs", "--out", s(&out)]);
    assert!(text.status.success());
    let csv = std::fs::read_to_string(out.join("tradeoffs.csv")).unwrap();
    assert!(csv.contains("TimeSformer (divided),95.49,3.96,121,196,18.15"), "{csv}");
    assert!(out.join("tradeoffs.md").exists() && out.join("metric_vs_params.csv").exists());
    let macros = dir.path().join("macros.json");
    std::fs::write(&macros, r#"{"nope": {"macro_recall": 0.9, "macro_precision": 0.9, "macro_f1": 0.9}}"#).unwrap();
    assert_eq!(run(&["report-tradeoffs", "--macros", s(&macros)]).status.code(), Some(1));
}

#[test]
fn train_toy_then_simulate_with_it() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    gen(&fx, &EVENTS);
    let model = dir.path().join("toy.json");
    let v = json_of(&run(&["--json", "train-toy", "--fixtures", s(&fx), "--out", s(&model), "--epochs", "50"]));
    assert_eq!(v["samples"], 18);
    let out = vigil(&["--json", "simulate", "--fixtures", s(&fx), "--ephemeral"])
        .env("VIGIL_CLASSIFIER__KIND", "toy")
        .env("VIGIL_CLASSIFIER__MODEL_PATH", s(&model))
        .output()
        .unwrap();
    let report = json_of(&out);
    assert_eq!(report["inferences"], 18);
    // toy without a model is a config error
    let out = vigil(&["simulate", "--fixtures", s(&fx)]).env("VIGIL_CLASSIFIER__KIND", "toy").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

struct Child(std::process::Child);

impl Drop for Child {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn spawn_serve(args: &[&str], envs: &[(&str, &str)]) -> (Child, String) {
    let mut cmd = vigil(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let mut child = Child(cmd.stdout(Stdio::piped()).stderr(Stdio::null()).spawn().unwrap());
    let mut line = String::new();
    BufReader::new(child.0.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let url = line.trim().strip_prefix("listening on ").expect("announces its address").to_string();
    (child, url)
}

#[test]
fn serve_api_and_model_server_against_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let fx = dir.path().join("fx");
    gen(&fx, &EVENTS);
    let store = dir.path().join("chunks");
    let db = dir.path().join("vigil.db");
    let envs = [("VIGIL_STORE_ROOT", s(&store)), ("VIGIL_DATABASE", s(&db))];
    let mut sim = vigil(&["simulate", "--fixtures", s(&fx)]);
    sim.envs(envs);
    assert!(sim.output().unwrap().status.success());

    let mut with_token = envs.to_vec();
    with_token.push(("VIGIL_API_TOKEN", "secret"));
    let (_api, url) = spawn_serve(&["serve", "--bind", "127.0.0.1:0"], &with_token);
    let client = reqwest::blocking::Client::new();
    let denied = client.get(format!("{url}/v1/alerts")).send().unwrap();
    assert_eq!(denied.status().as_u16(), 401);
    let alerts: Value =
        client.get(format!("{url}/v1/alerts?state=pending")).bearer_auth("secret").send().unwrap().json().unwrap();
    assert_eq!(alerts["total"], 4);

    let (_models, murl) = spawn_serve(&["serve", "--model-server", "--bind", "127.0.0.1:0"], &envs);
    let resp: Value = client
        .post(format!("{murl}/v1/classify"))
        .json(&serde_json::json!({"chunk_key": "cam-0/0000020000.svf"}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(resp["label"], 0);
    assert_eq!(resp["model_id"], "stub-majority");

    // simulate through the model server
    let out = vigil(&["--json", "simulate", "--fixtures", s(&fx), "--ephemeral"])
        .env("VIGIL_CLASSIFIER__KIND", "remote")
        .env("VIGIL_CLASSIFIER__ENDPOINT", &murl)
        .output()
        .unwrap();
    // the model server reads the persistent store filled by the first run
    let report = json_of(&out);
    assert_eq!(report["alerts_raised"], 4);
    assert_eq!(report["chunk_failures"], 0);
    assert!(report["chunks"][0]["error"].is_null());
}
