use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use logscope::synth::{planted, Planted};
use logscope::workspace::{StageState, LOCK_FILE, MANIFEST_FILE};
use logscope::{Config, ReportKind, Stage, Workspace, WorkspaceError};

fn fixture() -> Planted {
    Planted {
        spiders: 6,
        bots: 2,
        bot_queries: 300,
        mortals: 12,
        others: 8,
        admins: 1,
        ..Planted::default()
    }
}

fn setup(root: &Path) -> Workspace {
    planted(&fixture()).write(&root.join("logs")).unwrap();
    let mut config = Config::default();
    config.set("http_logs", "logs/http.log").unwrap();
    config.set("sql_logs", "logs/sql.log").unwrap();
    Workspace::init(root, &config).unwrap()
}

/// Relative path to bytes for every file under `dir`.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn states(ws: &Workspace) -> Vec<StageState> {
    ws.status().unwrap().into_iter().map(|(_, s)| s).collect()
}

#[test]
fn full_run_recovers_planted_labels() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path());
    let summary = ws.run(&Stage::ALL, false).unwrap();
    assert_eq!(summary.executed, Stage::ALL);
    assert!(states(&ws).iter().all(|s| *s == StageState::Current));

    let truth: HashMap<_, _> = planted(&fixture()).truth.into_iter().collect();
    let sessions = ws.sessions().unwrap();
    assert!(!sessions.is_empty());
    for s in &sessions {
        assert_eq!(Some(&s.classification), truth.get(&s.client_ip), "{:?}", s);
    }
    for name in ["fits.txt", "sessions.tsv", "traffic_month.tsv", "terms_per_template.tsv"] {
        assert!(ws.reports_dir().join(name).exists(), "{}", name);
    }
    assert!(!dir.path().join(LOCK_FILE).exists());
}

#[test]
fn reruns_are_byte_identical_and_skipped() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let wa = setup(a.path());
    let wb = setup(b.path());
    wa.run(&Stage::ALL, false).unwrap();
    wb.run(&Stage::ALL, false).unwrap();
    assert_eq!(snapshot(&wa.tables_dir()), snapshot(&wb.tables_dir()));
    assert_eq!(snapshot(&wa.reports_dir()), snapshot(&wb.reports_dir()));
    assert_eq!(
        fs::read(a.path().join(MANIFEST_FILE)).unwrap(),
        fs::read(b.path().join(MANIFEST_FILE)).unwrap()
    );

    let before = snapshot(&wa.tables_dir());
    let again = wa.run(&Stage::ALL, false).unwrap();
    assert!(again.executed.is_empty());
    assert_eq!(again.skipped, Stage::ALL);
    let forced = wa.run(&Stage::ALL, true).unwrap();
    assert_eq!(forced.executed, Stage::ALL);
    assert_eq!(snapshot(&wa.tables_dir()), before);
}

#[test]
fn gap_change_rebuilds_downstream_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = setup(dir.path());
    ws.run(&Stage::ALL, false).unwrap();
    let manifest = ws.manifest().unwrap();
    let weblog = fs::read(ws.tables_dir().join("weblog.tsv")).unwrap();
    let sessions_before = ws.sessions().unwrap().len();

    let mut config = ws.config().clone();
    config.set("gap_seconds", "900").unwrap();
    ws.set_config(config).unwrap();
    assert_eq!(
        states(&ws),
        [
            StageState::Current,
            StageState::Current,
            StageState::Stale,
            StageState::Stale,
            StageState::Stale
        ]
    );

    // report alone is refused while sessionize is stale
    match ws.run(&[Stage::Report], false) {
        Err(WorkspaceError::NotCurrent { stage, state, .. }) => {
            assert_eq!(stage, Stage::Sessionize);
            assert_eq!(state, StageState::Stale);
        }
        other => panic!("expected refusal, got {:?}", other),
    }
    assert!(ws.write_report(ReportKind::Fits, &dir.path().join("adhoc")).is_err());
    assert!(ws.write_report(ReportKind::Traffic, &dir.path().join("adhoc")).is_ok());

    let summary = ws.run(&Stage::ALL, false).unwrap();
    assert_eq!(summary.skipped, [Stage::Ingest, Stage::Fingerprint]);
    assert_eq!(summary.executed, [Stage::Sessionize, Stage::Classify, Stage::Report]);
    let after = ws.manifest().unwrap();
    for stage in [Stage::Ingest, Stage::Fingerprint] {
        assert_eq!(after.fingerprint(stage), manifest.fingerprint(stage));
    }
    assert_ne!(after.fingerprint(Stage::Sessionize), manifest.fingerprint(Stage::Sessionize));
    assert_eq!(fs::read(ws.tables_dir().join("weblog.tsv")).unwrap(), weblog);
    // mortal sessions six minutes apart stay whole; a day apart stay split
    assert_eq!(ws.sessions().unwrap().len(), sessions_before);
}

#[test]
fn tampered_table_and_changed_input_are_stale() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path());
    ws.run(&Stage::ALL, false).unwrap();

    let path = ws.tables_dir().join("session.tsv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert_eq!(states(&ws)[2], StageState::Stale);
    assert_eq!(states(&ws)[1], StageState::Current);
    let summary = ws.run(&[Stage::Sessionize], false).unwrap();
    assert_eq!(summary.executed, [Stage::Sessionize]);
    assert_eq!(fs::read_to_string(&path).unwrap(), text);

    let log = dir.path().join("logs/http.log");
    let mut http = fs::read_to_string(&log).unwrap();
    http.push_str("not a log line\n");
    fs::write(&log, http).unwrap();
    assert!(states(&ws).iter().all(|s| *s == StageState::Stale));
}

#[test]
fn lock_and_missing_stages() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path());
    match ws.run(&[Stage::Classify], false) {
        Err(WorkspaceError::NotCurrent { stage, state, .. }) => {
            assert_eq!(stage, Stage::Ingest);
            assert_eq!(state, StageState::Missing);
        }
        other => panic!("expected refusal, got {:?}", other),
    }
    assert!(matches!(ws.suggest_index(3), Err(WorkspaceError::NotCurrent { .. })));

    fs::write(dir.path().join(LOCK_FILE), "1\n").unwrap();
    assert!(matches!(ws.run(&Stage::ALL, false), Err(WorkspaceError::Locked(_))));
    fs::remove_file(dir.path().join(LOCK_FILE)).unwrap();
    ws.run(&Stage::ALL, false).unwrap();
    assert!(!ws.suggest_index(3).unwrap().is_empty());

    assert!(matches!(
        Workspace::init(dir.path(), &Config::default()),
        Err(WorkspaceError::AlreadyInitialized(_))
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(Workspace::open(empty.path()), Err(WorkspaceError::NotInitialized(_))));
}
