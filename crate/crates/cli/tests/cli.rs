use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn logscope(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logscope"))
        .current_dir(cwd)
        .env_remove("LOGSCOPE_WORKSPACE")
        .args(args)
        .output()
        .unwrap()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let out = logscope(cwd, args);
    assert!(
        out.status.success(),
        "{:?}: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Rows of a TSV report keyed by header name.
fn rows(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split('\t').map(String::from).collect();
    lines
        .map(|l| header.iter().cloned().zip(l.split('\t').map(String::from)).collect())
        .collect()
}

fn planted_workspace(dir: &Path) {
    ok(dir, &["synth", "--profile", "planted", "--out", "logs", "--bot-queries", "200", "--mortals", "10"]);
    ok(
        dir,
        &["--workspace", "ws", "init", "--http-logs", "logs/http.log", "--sql-logs", "logs/sql.log"],
    );
}

#[test]
fn pipeline_and_suggest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    planted_workspace(d);
    let out = ok(d, &["--workspace", "ws", "run"]);
    assert!(out.contains("classify\tsessionclass\t"));
    let status = ok(d, &["--workspace", "ws", "status"]);
    assert_eq!(status.matches("\tcurrent").count(), 5);

    let sessions = rows(&d.join("ws/reports/sessions.tsv"));
    let truth: std::collections::HashMap<_, _> = rows(&d.join("logs/truth.tsv"))
        .into_iter()
        .map(|r| (r["client_ip"].clone(), r["label"].clone()))
        .collect();
    assert!(!sessions.is_empty());
    for s in &sessions {
        assert_eq!(truth[&s["client_ip"]], s["classification"]);
    }

    fs::write(d.join("broken.sql"), "SELECT TOP 5 objID, ra FROM PhotoObjAll WHERE ra >> 10").unwrap();
    let out = ok(d, &["--corpus", "ws", "suggest", "--file", "broken.sql", "--top-k", "2"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "rank\tsimilarity\ttemplate_id\texample");
    assert_eq!(lines.len(), 3);
    let top: Vec<&str> = lines[1].split('\t').collect();
    assert_eq!(top[0], "1");
    assert_eq!(top[1].split('.').nth(1).unwrap().len(), 4);
    assert!(top[3].contains("FROM PhotoObjAll WHERE ra >"));

    let mut child = Command::new(env!("CARGO_BIN_EXE_logscope"))
        .current_dir(d)
        .env("LOGSCOPE_WORKSPACE", "ws")
        .args(["suggest", "--stdin", "--top-k", "2"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"SELECT TOP 99 objID, ra FROM PhotoObjAll WHERE ra >> 77")
        .unwrap();
    let piped = child.wait_with_output().unwrap();
    assert!(piped.status.success());
    assert_eq!(String::from_utf8(piped.stdout).unwrap(), out);
}

#[test]
fn flags_override_without_saving() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    planted_workspace(d);
    ok(d, &["--workspace", "ws", "run"]);
    let config = fs::read_to_string(d.join("ws/config.txt")).unwrap();
    assert!(config.contains("gap_seconds = 1800"));

    let status = ok(d, &["--workspace", "ws", "status", "--gap-seconds", "900"]);
    assert!(status.contains("ingest\tcurrent") && status.contains("sessionize\tstale"));
    let refused = logscope(d, &["--workspace", "ws", "run", "--stages", "report", "--gap-seconds", "900"]);
    assert_eq!(code(&refused), 2);
    assert!(String::from_utf8_lossy(&refused.stderr).contains("sessionize"));

    let out = ok(d, &["--workspace", "ws", "run", "--gap-seconds", "900"]);
    assert!(out.contains("ingest\tcurrent\tskipped"));
    assert!(out.contains("sessionize\tsession\t"));
    assert_eq!(fs::read_to_string(d.join("ws/config.txt")).unwrap(), config);
    // file setting is 1800 again, so sessionize is stale under it
    assert!(ok(d, &["--workspace", "ws", "status"]).contains("sessionize\tstale"));

    ok(d, &["--workspace", "ws", "run", "--gap-seconds", "900", "--save"]);
    assert!(fs::read_to_string(d.join("ws/config.txt")).unwrap().contains("gap_seconds = 900"));
    assert_eq!(ok(d, &["--workspace", "ws", "status"]).matches("\tcurrent").count(), 5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&logscope(d, &["frobnicate"])), 1);
    assert_eq!(code(&logscope(d, &["run"])), 1);
    assert_eq!(code(&logscope(d, &["--workspace", "nowhere", "run"])), 2);
    assert_eq!(code(&logscope(d, &["--help"])), 0);
    planted_workspace(d);
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "run", "--gap-seconds", "soon"])), 1);
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "run", "--stages", "bake"])), 1);
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "report", "--kind", "sessions"])), 2);
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "suggest"])), 1);
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "init"])), 2);

    fs::write(d.join("ws/.lock"), "1\n").unwrap();
    let locked = logscope(d, &["--workspace", "ws", "run"]);
    assert_eq!(code(&locked), 2);
    assert!(String::from_utf8_lossy(&locked.stderr).contains("locked"));
    fs::remove_file(d.join("ws/.lock")).unwrap();

    fs::remove_file(d.join("logs/sql.log")).unwrap();
    assert_eq!(code(&logscope(d, &["--workspace", "ws", "ingest"])), 2);
}

#[test]
fn traffic_by_suffix_counts_no_gif_page_views() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let agent = "Mozilla/4.0 (compatible; MSIE 6.0)";
    let log = [
        ("/images/a.gif", 200),
        ("/images/b.gif", 200),
        ("/en/default.asp", 200),
    ]
    .iter()
    .enumerate()
    .map(|(i, (stem, status))| {
        format!("2004-05-01T10:00:0{}Z\t10.0.0.1\tGET\t{}\t-\t{}\t{}\t-\n", i, stem, status, agent)
    })
    .collect::<String>();
    fs::write(d.join("http.log"), log).unwrap();
    ok(d, &["--workspace", "ws", "init", "--http-logs", "http.log"]);
    ok(d, &["--workspace", "ws", "ingest"]);
    ok(d, &["--workspace", "ws", "report", "--kind", "traffic", "--out", "out"]);
    let suffix = rows(&d.join("out/traffic_suffix.tsv"));
    let gif = suffix.iter().find(|r| r["suffix"] == "gif").unwrap();
    assert_eq!((gif["hits"].as_str(), gif["page_views"].as_str()), ("2", "0"));
    let asp = suffix.iter().find(|r| r["suffix"] == "asp").unwrap();
    assert_eq!((asp["hits"].as_str(), asp["page_views"].as_str()), ("1", "1"));
}

#[test]
fn fits_report_recovers_synthetic_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--profile", "powerlaw", "--alpha", "2.0", "--clients", "50", "--gaps", "4000", "--out", "logs"],
    );
    ok(d, &["--workspace", "ws", "init", "--http-logs", "logs/http.log", "--think-fit", "0..10"]);
    ok(d, &["--workspace", "ws", "run", "--stages", "ingest,fingerprint,sessionize"]);
    ok(d, &["--workspace", "ws", "report", "--kind", "fits"]);
    let text = fs::read_to_string(d.join("ws/reports/fits/fits.txt")).unwrap();
    let block = text.split("\n\n").find(|b| b.starts_with("[think_time]")).unwrap();
    let value = |key: &str| -> f64 {
        block
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{} = ", key)))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("slope") + 1.0).abs() < 0.05, "{}", block);
    assert!((value("implied_alpha") - 2.0).abs() < 0.05, "{}", block);
    assert!(value("r_squared") >= 0.98, "{}", block);
    assert!(d.join("ws/reports/fits/think_time.plot.tsv").exists());
}
