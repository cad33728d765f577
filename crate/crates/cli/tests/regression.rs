//! Pins the committed checkpoint/report pair: rebuilding the fixture dataset
//! and re-running eval must reproduce the committed report to 1e-9.

use std::path::{Path, PathBuf};
use std::process::Command;

use bargebench::metrics::EvalReport;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/regression")
        .join(name)
}

fn close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= 1e-9, "{what}: {a} vs {b}");
}

#[test]
fn committed_checkpoint_reproduces_the_committed_report() {
    let tmp = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bargebench");

    let data = tmp.path().join("data");
    let sim = Command::new(bin)
        .args(["simulate", "--config"])
        .arg(fixture("config.toml"))
        .arg("--out")
        .arg(&data)
        .output()
        .unwrap();
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));

    let eval_dir = tmp.path().join("eval");
    let eval = Command::new(bin)
        .args(["eval", "--checkpoint"])
        .arg(fixture("checkpoint.json"))
        .arg("--manifest")
        .arg(data.join("manifest.jsonl"))
        .arg("--out")
        .arg(&eval_dir)
        .output()
        .unwrap();
    assert!(eval.status.success(), "{}", String::from_utf8_lossy(&eval.stderr));

    let got = EvalReport::from_json(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap())
        .unwrap();
    let want =
        EvalReport::from_json(&std::fs::read_to_string(fixture("report.json")).unwrap()).unwrap();

    assert_eq!(got.kinds.len(), want.kinds.len());
    for (g, w) in got.kinds.iter().zip(&want.kinds) {
        assert_eq!(g.kind, w.kind);
        assert_eq!(g.n, w.n);
        assert_eq!(g.auc.is_some(), w.auc.is_some(), "{:?}", g.kind);
        assert_eq!(g.eer.is_some(), w.eer.is_some(), "{:?}", g.kind);
        let name = g.kind.as_str();
        if let (Some(ga), Some(wa)) = (g.auc, w.auc) {
            close(ga, wa, &format!("{name} auc"));
        }
        if let (Some(ge), Some(we)) = (g.eer, w.eer) {
            close(ge, we, &format!("{name} eer"));
        }
        if let (Some(gt), Some(wt)) = (g.eer_threshold, w.eer_threshold) {
            close(gt, wt, &format!("{name} eer threshold"));
        }
        close(g.mae, w.mae, &format!("{name} mae"));
        assert_eq!(g.roc.len(), w.roc.len(), "{name} roc length");
        for ((gx, gy), (wx, wy)) in g.roc.iter().zip(&w.roc) {
            close(*gx, *wx, &format!("{name} roc x"));
            close(*gy, *wy, &format!("{name} roc y"));
        }
    }
}
