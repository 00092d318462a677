use std::process::Command;

use serde_json::Value;

#[test]
fn sim_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let logs = dir.path().join("logs");
    let status = Command::new(env!("CARGO_BIN_EXE_storychat-sim"))
        .args([
            "--profile",
            concat!(env!("CARGO_MANIFEST_DIR"), "/configs/scenario.json"),
        ])
        .args([
            "--engine-config",
            concat!(env!("CARGO_MANIFEST_DIR"), "/configs/engine.json"),
        ])
        .arg("--out")
        .arg(&report)
        .arg("--log-dir")
        .arg(&logs)
        .status()
        .unwrap();
    assert!(status.success());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["timeline"].as_array().unwrap().len(), 6);
    assert_eq!(report["seed"], 42);

    let session = logs.join("sim-42.jsonl");
    let labels = dir.path().join("sim-42.labels.jsonl");
    let stats_out = dir.path().join("stats.json");
    let first = storychat_core::session_log::load(&session).unwrap();
    let mut overlay = storychat_core::session_log::LabelOverlay::default();
    for r in &first.records {
        if let storychat_core::session_log::RecordBody::Comment { message, .. } = &r.body {
            overlay.insert(
                message.id.clone(),
                storychat_core::session_log::ManualLabel::Prosocial,
            );
        }
    }
    overlay
        .write_to(std::fs::File::create(&labels).unwrap())
        .unwrap();

    let status = Command::new(env!("CARGO_BIN_EXE_storychat-stats"))
        .arg(&session)
        .arg("--labels")
        .arg(&labels)
        .args(["--surge", "ghost_present", "--out"])
        .arg(&stats_out)
        .status()
        .unwrap();
    assert!(status.success());
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(&stats_out).unwrap()).unwrap();
    let total = stats["stats"]["total"].as_u64().unwrap();
    assert_eq!(total, report["counts"]["messages"].as_u64().unwrap());
    assert_eq!(
        total,
        stats["stats"]["negative"].as_u64().unwrap()
            + stats["stats"]["neutral"].as_u64().unwrap()
            + stats["stats"]["prosocial"].as_u64().unwrap()
    );
    assert_eq!(stats["timeline"].as_array().unwrap().len(), 6);
    assert_eq!(stats["surge"]["entries"], 1);
}

#[test]
fn stats_rejects_a_missing_file() {
    let out = Command::new(env!("CARGO_BIN_EXE_storychat-stats"))
        .args(["/nonexistent/session.jsonl", "--out", "/dev/null"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("storychat-stats:"));
}
