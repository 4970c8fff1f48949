use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use handgest::stream::source::encode_raw_frame;

fn handgest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handgest"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        None,
        Some("run"),
        Some("offline"),
        Some("simulate"),
        Some("eval"),
        Some("bench"),
    ] {
        let mut args: Vec<&str> = sub.into_iter().collect();
        args.push("--help");
        let out = handgest(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        assert!(stdout(&out).contains("Usage"), "{args:?}");
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(handgest(&[]).status.code(), Some(1));
    assert_eq!(handgest(&["dance"]).status.code(), Some(1));
    assert_eq!(handgest(&["run", "--source", "webcam"]).status.code(), Some(1));
}

#[test]
fn simulate_run_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let out = handgest(&["simulate", "--out", p(&sim), "--videos", "5", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let truth = sim.join("truth.csv");
    assert_eq!(std::fs::read_to_string(&truth).unwrap().lines().count(), 5);

    let source = format!("scenario:{}", p(&sim));
    let events = [dir.path().join("a.jsonl"), dir.path().join("b.jsonl")];
    for e in &events {
        let out = handgest(&["run", "--source", &source, "--events", p(e)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(stdout(&out).contains("Detection"));
    }
    let a = std::fs::read(&events[0]).unwrap();
    assert_eq!(a, std::fs::read(&events[1]).unwrap());
    for line in String::from_utf8(a).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["video", "frame", "label", "kind", "max1", "margin"] {
            assert!(v.get(key).is_some(), "{line}");
        }
    }

    let out = handgest(&["eval", "--events", p(&events[0]), "--truth", p(&truth)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("pooled Levenshtein accuracy: 100.00%"),
        "{}",
        stdout(&out)
    );

    let offline = dir.path().join("offline.jsonl");
    let proposals = dir.path().join("proposals.jsonl");
    let out = handgest(&[
        "offline",
        "--source",
        &source,
        "--events",
        p(&offline),
        "--proposals",
        p(&proposals),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&proposals).unwrap().lines().count(), 20);
    let out = handgest(&["eval", "--events", p(&offline), "--truth", p(&truth), "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pooled_accuracy"], 100.0);
}

#[test]
fn events_go_to_stdout_without_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    handgest(&["simulate", "--out", p(&sim), "--videos", "1"]);
    let out = handgest(&[
        "run",
        "--source",
        &format!("scenario:{}", p(&sim.join("video_00.toml"))),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<_> = stdout(&out).lines().map(str::to_owned).collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.contains("\"video\":\"video_00\"")));
    assert!(String::from_utf8_lossy(&out.stderr).contains("total: 1 videos"));
}

#[test]
fn missing_config_exits_one() {
    let out = handgest(&["run", "--config", "/nonexistent/config.toml", "--source", "stdin"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_windows = 4\n").unwrap();
    assert_eq!(handgest(&["bench", "--config", p(&bad)]).status.code(), Some(1));
}

#[test]
fn unreachable_backend_exits_two() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let dir = tempfile::tempdir().unwrap();
    handgest(&["simulate", "--out", p(dir.path()), "--videos", "1"]);
    let out = handgest(&[
        "run",
        "--source",
        &format!("scenario:{}", p(dir.path())),
        "--classifier",
        &format!("tcp:{addr}"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&addr.to_string()));
}

#[test]
fn missing_source_exits_three() {
    let out = handgest(&["run", "--source", "frames:/nonexistent/videos"]);
    assert_eq!(out.status.code(), Some(3));
    let out = handgest(&["offline", "--source", "scenario:/nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn raw_frames_on_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_handgest"))
        .args(["run", "--source", "stdin"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        for i in 0..40u8 {
            stdin
                .write_all(&encode_raw_frame(64, 48, &vec![i; 64 * 48 * 3]))
                .unwrap();
        }
    }
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stdin: 40 frames, 0 events"));
}

#[test]
fn truncated_stdin_exits_three() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_handgest"))
        .args(["run", "--source", "stdin"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    {
        use std::io::Write;
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(&encode_raw_frame(8, 8, &[0; 192])).unwrap();
        stdin.write_all(&encode_raw_frame(8, 8, &[0; 192])[..50]).unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    let rows: Vec<String> = (0..20)
        .map(|i| format!("v{i:02};Thumb Up,Stop Sign,Swiping Left,Thumb Down"))
        .collect();
    std::fs::write(&truth, rows.join("\n") + "\n").unwrap();
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = handgest(&["eval", "--events", p(&empty), "--truth", p(&truth)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(
        stdout(&out).contains("pooled Levenshtein accuracy: 0.00% (80 gestures"),
        "{}",
        stdout(&out)
    );

    // 8 targets, distance 5: two deletions in a, three substitutions in b.
    let small = dir.path().join("small.csv");
    std::fs::write(
        &small,
        "a;Thumb Up,Stop Sign,Swiping Left,Thumb Down\nb;Thumb Up,Stop Sign,Swiping Left,Thumb Down\n",
    )
    .unwrap();
    let events = dir.path().join("events.jsonl");
    let line = |v: &str, f: u64, l: &str| {
        format!("{{\"video\":\"{v}\",\"frame\":{f},\"label\":\"{l}\",\"kind\":\"late\",\"max1\":0.3,\"margin\":0.1}}\n")
    };
    let text = [
        line("a", 10, "Thumb Up"),
        line("a", 50, "Stop Sign"),
        line("b", 5, "Thumb Up"),
        line("b", 10, "Shaking Hand"),
        line("b", 40, "Shaking Hand"),
        line("b", 90, "Shaking Hand"),
    ]
    .concat();
    std::fs::write(&events, text).unwrap();
    let out = handgest(&["eval", "--events", p(&events), "--truth", p(&small)]);
    assert!(stdout(&out).contains("37.50%"), "{}", stdout(&out));

    std::fs::write(&events, "{not json\n").unwrap();
    assert_eq!(
        handgest(&["eval", "--events", p(&events), "--truth", p(&small)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn bench_reports_stage_table() {
    let out = handgest(&["bench", "--frames", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("no rounds recorded"));
    let out = handgest(&["bench", "--frames", "1000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Detection") && text.contains("Classification"), "{text}");
    let fps: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("sustained ingest: "))
        .and_then(|l| l.trim_end_matches(" fps").parse().ok())
        .unwrap();
    assert!(fps >= 30.0, "{fps}");
}
