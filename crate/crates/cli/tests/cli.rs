use std::path::PathBuf;
use std::process::{Command, Output};

fn tiba(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tiba")).args(args).env("RUST_LOG", "off").output().unwrap()
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// The key=value metric lines of a command's output.
fn metric_lines(o: &Output) -> Vec<String> {
    stdout(o)
        .lines()
        .filter(|l| ["cross_track", "stem_collisions", "distance", "completion", "energy"].iter().any(|k| l.starts_with(k)))
        .map(str::to_owned)
        .collect()
}

#[test]
fn size_prints_the_chain() {
    let o = tiba(&["size"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("feasible=true"));
    assert!(out.contains("max_linear_speed_kmh=4.52"));
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("h1.ndjson");
    let ok = tiba(&["run", "--scenario", &scenario("h1.cfg"), "--log", log.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(stdout(&ok).contains("completion=true"));

    let narrow = tiba(&["run", "--scenario", &scenario("h3_narrow.cfg"), "--no-log"]);
    assert_eq!(narrow.status.code(), Some(1));

    let missing = tiba(&["run", "--scenario", "does/not/exist.cfg", "--no-log"]);
    assert_eq!(missing.status.code(), Some(2));

    let empty = dir.path().join("empty.ndjson");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(tiba(&["metrics", empty.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tiba(&["replay", empty.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn logged_and_unlogged_runs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.ndjson"), dir.path().join("b.ndjson"));
    let args = |log: &str| vec!["run".to_owned(), "--scenario".into(), scenario("h2.cfg"), "--nav".into(), "lidar".into(), "--log".into(), log.into()];
    let ra = Command::new(env!("CARGO_BIN_EXE_tiba")).args(args(a.to_str().unwrap())).output().unwrap();
    let rb = Command::new(env!("CARGO_BIN_EXE_tiba")).args(args(b.to_str().unwrap())).output().unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let bare = tiba(&["run", "--scenario", &scenario("h2.cfg"), "--nav", "lidar", "--no-log"]);
    assert_eq!(metric_lines(&ra), metric_lines(&bare));
    assert_eq!(metric_lines(&ra), metric_lines(&rb));

    let scored = tiba(&["metrics", a.to_str().unwrap()]);
    assert_eq!(scored.status.code(), Some(0));
    assert_eq!(metric_lines(&scored), metric_lines(&ra));

    let out = dir.path().join("replayed.ndjson");
    let replay = tiba(&["replay", a.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(replay.status.code(), Some(0));
    assert!(stdout(&replay).contains("identical=true"));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn flags_override_the_scenario() {
    let o = tiba(&["run", "--scenario", &scenario("h1.cfg"), "--duration", "1", "--no-log"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("outcome=timeout"));
    assert!(stdout(&o).contains("completion=false"));
}
