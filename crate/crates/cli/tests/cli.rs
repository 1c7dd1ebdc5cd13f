use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use serde_json::{json, Value};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_agreements"));
    cmd.env_remove("AE_DB");
    cmd
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn seed_then_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["seed", "--demo", "scarce", "--db", "db.json"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), "scarce-1");
    let o = run(&["seed", "--demo", "tsc", "--db", "db.json"], dir.path());
    assert_eq!(stdout(&o), "tsc-1");
    let o = run(
        &["seed", "--demo", "tsc", "--partial", "--db", "db.json"],
        dir.path(),
    );
    assert_eq!(stdout(&o), "tsc-2");

    let o = run(
        &["inspect", "scarce", "scarce-1", "--db", "db.json"],
        dir.path(),
    );
    let inst: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(inst["status"]["outcome"], "fulfilled");
    assert_eq!(inst["data_model"]["data"]["total"], 550);

    // AE_DB stands in for --db.
    let o = bin()
        .args(["inspect", "tsc"])
        .env("AE_DB", dir.path().join("db.json"))
        .output()
        .unwrap();
    let list: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(list[0]["outcome"], "upheld");
    assert_eq!(list[1]["active_process"], "DisputeResolution");

    let o = run(&["inspect", "tsc", "tsc-9", "--db", "db.json"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no agreement tsc-9"));
    let o = run(&["inspect", "nope", "--db", "db.json"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn replay_reproduces_and_detects_divergence() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &["seed", "--demo", "scarce", "--partial", "--db", "db.json"],
        dir.path(),
    );
    run(&["seed", "--demo", "tsc", "--db", "db.json"], dir.path());
    let o = run(
        &[
            "replay",
            "--log",
            "db.events.jsonl",
            "--db-out",
            "out.json",
            "--compare",
            "db.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(dir.path().join("out.json")).unwrap(),
        std::fs::read(dir.path().join("db.json")).unwrap()
    );

    let o = run(
        &[
            "replay",
            "--log",
            "db.events.jsonl",
            "--db-out",
            "bad.json",
            "--id-seed",
            "3",
        ],
        dir.path(),
    );
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("replay diverged at event 0"));
}

#[test]
fn lint_reports_per_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["lint", "--paths", "tsc"], dir.path());
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(report.get("tsc").is_some() && report.get("scarce").is_none());
    let o = run(&["lint", "--paths", "ghost"], dir.path());
    assert!(!o.status.success());
}

/// Starts `serve` on an ephemeral port and returns the child and base URL.
fn serve(dir: &Path) -> (Child, String) {
    let mut child = bin()
        .args([
            "serve",
            "--bind",
            "127.0.0.1:0",
            "--db",
            "db.json",
            "--fixed-clock",
        ])
        .current_dir(dir)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .expect("listening line")
        .to_string();
    (child, format!("http://{addr}"))
}

async fn post(client: &reqwest::Client, url: &str, body: Value) -> Value {
    client
        .post(url)
        .json(&body)
        .send()
        .await
        .unwrap()
        .json()
        .await
        .unwrap()
}

fn pledge(who: &str, amount: i64) -> Value {
    json!({
        "source": "web-form",
        "kind": "pledge",
        "actor": { "platform": "web", "handle": who },
        "payload": { "author": "authorA", "topic": "tides", "amount": amount },
    })
}

#[tokio::test]
async fn killed_server_resumes_mid_flow() {
    let dir = tempfile::tempdir().unwrap();
    let client = reqwest::Client::new();
    let (mut child, base) = serve(dir.path());
    for (who, amount) in [("s1", 200), ("s2", 250), ("s3", 100)] {
        post(&client, &format!("{base}/scarce"), pledge(who, amount)).await;
    }
    let url = format!("{base}/scarce/agreements/scarce-1");
    let before: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(before["status"]["active_process"], "AuthorApproval");
    child.kill().unwrap();
    child.wait().unwrap();

    let (mut child, base) = serve(dir.path());
    let url = format!("{base}/scarce/agreements/scarce-1");
    let after: Value = client.get(&url).send().await.unwrap().json().await.unwrap();
    assert_eq!(after, before);

    let accept = json!({
        "source": "social",
        "kind": "dm",
        "actor": { "platform": "social", "handle": "authorA" },
        "payload": { "text": "accept" },
    });
    let out = post(&client, &format!("{base}/scarce"), accept).await;
    assert_eq!(out["disposition"], "delivered");
    assert_eq!(out["active_process"], "EssaySubmission");
    child.kill().unwrap();
    child.wait().unwrap();
}
