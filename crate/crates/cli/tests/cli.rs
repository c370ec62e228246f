use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const TS: &str = "02/02 10:00:00";

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn lexforge(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexforge")).args(args).current_dir(cwd).output().unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn derive_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&lexforge(&["derive", "comprar"], dir.path()));
    let golden = std::fs::read_to_string(data("golden/derive_comprar.tsv")).unwrap();
    assert_eq!(out, golden);
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = lexforge(&["derive"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert_eq!(lexforge(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(lexforge(&["derive", "comprar", "--mode", "sideways"], dir.path()).status.code(), Some(2));

    let o = lexforge(&["derive", "comprar", "--lexicon", "missing.jsonl"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.jsonl"));
    assert_eq!(lexforge(&["derive", "nosuchverb"], dir.path()).status.code(), Some(1));
    assert_eq!(lexforge(&["apply", "comprar-V1", "no_such_rule"], dir.path()).status.code(), Some(1));
}

/// Recomputes the acquisition report from the per-candidate run log and
/// the seed lexicon file.
#[test]
fn acquire_report_matches_recount() {
    let dir = tempfile::tempdir().unwrap();
    let verbs_path = data("sample_verbs.txt");
    let o = lexforge(
        &["acquire", "--verbs", verbs_path.to_str().unwrap(), "--log", "run.log", "--timestamp", TS],
        dir.path(),
    );
    let report: Value = serde_json::from_str(&ok(&o)).unwrap();

    let verbs: BTreeSet<String> = std::fs::read_to_string(&verbs_path)
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let seed = std::fs::read_to_string(data("seed_lexicon.jsonl")).unwrap();
    let senses: BTreeSet<String> = seed
        .lines()
        .skip(1)
        .map(|l| serde_json::from_str::<Value>(l).unwrap())
        .filter(|r| r["lang"] == "es" && r["cat"] == "V" && verbs.contains(r["citation"].as_str().unwrap()))
        .map(|r| r["sense_id"].as_str().unwrap().to_string())
        .collect();

    let log = std::fs::read_to_string(dir.path().join("run.log")).unwrap();
    let rows: Vec<Vec<&str>> = log.lines().filter(|l| !l.starts_with('#')).map(|l| l.split('\t').collect()).collect();
    let mut status: BTreeMap<&str, u64> = BTreeMap::new();
    for r in &rows {
        assert_eq!(r.len(), 6, "{r:?}");
        assert!(senses.contains(r[2]), "candidate from unexpected sense {}", r[2]);
        *status.entry(r[3]).or_default() += 1;
    }

    assert_eq!(report["verbs_processed"], verbs.len());
    assert_eq!(report["senses_processed"], senses.len());
    assert_eq!(report["candidates_generated"], rows.len());
    let mean = rows.len() as f64 / senses.len() as f64;
    assert!((report["per_sense_mean"].as_f64().unwrap() - mean).abs() < 1e-9);
    for s in ["accepted", "deferred", "rejected"] {
        assert_eq!(report["partition_counts"][s], status.get(s).copied().unwrap_or(0), "{s}");
    }
    let pending = report["pending_review"].as_u64().unwrap();
    assert!(pending <= status["accepted"] + status.get("deferred").copied().unwrap_or(0));
}

#[test]
fn acquire_with_no_verbs_reports_zero() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("none.txt"), "").unwrap();
    let report: Value = serde_json::from_str(&ok(&lexforge(&["acquire", "--verbs", "none.txt"], dir.path()))).unwrap();
    for k in ["verbs_processed", "senses_processed", "candidates_generated", "pending_review", "admitted"] {
        assert_eq!(report[k], 0, "{k}");
    }
    assert_eq!(report["per_sense_mean"], 0.0);
}

#[test]
fn auto_admitted_entries_are_saved() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("v.txt"), "comprar\n").unwrap();
    let report: Value = serde_json::from_str(&ok(&lexforge(
        &["acquire", "--verbs", "v.txt", "--auto-admit-accepted", "--save", "out.jsonl", "--timestamp", TS],
        dir.path(),
    )))
    .unwrap();
    assert_eq!(report["admitted"], 17);
    let hits = ok(&lexforge(&["lookup", "compraventa", "--lexicon", "out.jsonl"], dir.path()));
    assert!(hits.lines().all(|l| l.split('\t').nth(2) == Some("auto-admitted")), "{hits}");
    assert!(!hits.is_empty());
}

#[test]
fn validate_emits_four_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&lexforge(&["validate", "comprar"], dir.path()));
    let rows: Vec<Vec<&str>> = out.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 39);
    assert!(rows.iter().all(|r| r.len() == 4));
    let accepted = rows.iter().filter(|r| r[2] == "accepted").count();
    assert_eq!(accepted, 18);
    assert!(rows.iter().any(|r| r[0] == "supercompra" && r[2] == "deferred" && r[3].ends_with("corpus=2")));
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["derive", "beber", "--format", "structured"][..],
        &["validate", "comprar", "tratar", "--format", "structured"][..],
        &["export", "--expand", "--timestamp", TS][..],
        &["stats", "--timestamp", TS][..],
        &["apply", "comprar-V1", "lr2event8b", "--timestamp", TS][..],
    ] {
        let a = ok(&lexforge(args, dir.path()));
        let b = ok(&lexforge(args, dir.path()));
        assert!(!a.is_empty(), "{args:?}");
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn english_bank_blocks_and_suppletes() {
    let dir = tempfile::tempdir().unwrap();
    let read = ok(&lexforge(&["lookup", "legible", "--lang", "en"], dir.path()));
    assert!(read.starts_with("legible-ADJ1\tadj\tephemeral"), "{read}");
    assert!(ok(&lexforge(&["lookup", "killable", "--lang", "en"], dir.path())).is_empty());
    let o = lexforge(&["apply", "kill-V1", "able_rule", "--lang", "en", "--surface", "killable"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("blocked"));
}

#[test]
fn stats_prints_comparison_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&lexforge(&["stats"], dir.path()));
    let last = out.lines().last().unwrap();
    assert!(last.starts_with("# comparison only"), "{last}");
    assert!(out.lines().any(|l| l.starts_with("total\t")));
}
