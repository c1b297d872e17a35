use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use veriprop_core::checks::VerificationReport;
use veriprop_core::lora::decode_checkpoint;
use veriprop_core::metrics::MetricReport;
use veriprop_core::Label;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_veriprop"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VERIPROP_KB")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn corpus(dir: &Path, faults: &str, docs: &str) {
    fs::write(dir.join("faults.json"), faults).unwrap();
    let o = run(&["gen-corpus", "--seed", "3", "--docs", docs, "--faults", "faults.json", "-o", "corpus"], dir);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn faithful_pair_verifies_clean() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "[]", "2");
    let o = run(
        &[
            "verify",
            "--summary",
            "corpus/summary/doc0001.json",
            "--ehr",
            "corpus/ehr/doc0001.json",
            "-o",
            "report.json",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: VerificationReport = serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(!r.verdicts.is_empty());
    assert!(r.verdicts.iter().all(|v| v.label == Label::Supported));
    assert!(r.omissions.is_empty());
    assert_eq!(r.params.embedder, "hashed-4096-v1");
}

#[test]
fn gen_corpus_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let faults = r#"[{"kind":"negation_flip","rate":"1/2","seed":4}]"#;
    corpus(a.path(), faults, "6");
    corpus(b.path(), faults, "6");
    for part in ["manifest.json", "ehr/doc0005.json", "summary/doc0005.json", "gold/doc0005.json"] {
        assert_eq!(
            fs::read(a.path().join("corpus").join(part)).unwrap(),
            fs::read(b.path().join("corpus").join(part)).unwrap(),
            "{part}"
        );
    }
}

#[test]
fn gen_corpus_refuses_non_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "[]", "1");
    let before = fs::read(tmp.path().join("corpus/manifest.json")).unwrap();
    let o = run(&["gen-corpus", "--seed", "4", "--docs", "1", "--faults", "faults.json", "-o", "corpus"], tmp.path());
    assert_eq!(code(&o), 2);
    assert_eq!(fs::read(tmp.path().join("corpus/manifest.json")).unwrap(), before);
}

#[test]
fn evaluate_table_and_json_agree() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), r#"[{"kind":"fabrication","rate":"1","seed":8}]"#, "4");
    assert_eq!(code(&run(&["verify", "--corpus", "corpus", "-o", "r.json"], tmp.path())), 0);
    let o = run(&["evaluate", "--report", "r.json", "--gold", "corpus/gold", "-o", "m.json"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: MetricReport = serde_json::from_slice(&fs::read(tmp.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(m.confusion.tn, 4);
    assert_eq!((m.confusion.fp, m.confusion.fn_), (0, 0));
    let o = run(&["evaluate", "--report", "r.json", "--gold", "corpus/gold", "--format", "table"], tmp.path());
    assert_eq!(code(&o), 0);
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("TN") && l.trim_end().ends_with(" 4")), "{table}");
}

#[test]
fn config_file_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    corpus(tmp.path(), "[]", "1");
    fs::write(tmp.path().join("cfg.json"), r#"{"tau_match": 0.7, "tau_num": 0.001}"#).unwrap();
    let args = |extra: &[&'static str]| {
        let mut v = vec![
            "verify",
            "--summary",
            "corpus/summary/doc0000.json",
            "--ehr",
            "corpus/ehr/doc0000.json",
            "--config",
            "cfg.json",
            "-o",
            "r.json",
        ];
        v.extend_from_slice(extra);
        v
    };
    assert_eq!(code(&run(&args(&[]), tmp.path())), 0);
    let r: VerificationReport = serde_json::from_slice(&fs::read(tmp.path().join("r.json")).unwrap()).unwrap();
    assert_eq!((r.params.tau_match, r.params.tau_num), (0.7, 0.001));
    assert_eq!(code(&run(&args(&["--tau-match", "0.6"]), tmp.path())), 0);
    let r: VerificationReport = serde_json::from_slice(&fs::read(tmp.path().join("r.json")).unwrap()).unwrap();
    assert_eq!((r.params.tau_match, r.params.tau_num), (0.6, 0.001));
    let o = run(&args(&["--tau-match", "1.5"]), tmp.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn data_errors_name_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("doc.json"), "{\n  \"doc_id\": \"d\",\n  \"kind\": \"sideways\"\n}\n").unwrap();
    let o = run(&["extract", "doc.json", "-o", "props.json"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("doc.json:3"), "{}", stderr(&o));
    assert!(!tmp.path().join("props.json").exists());
}

#[test]
fn kb_directory_errors_point_at_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let kb = tmp.path().join("kb");
    fs::create_dir(&kb).unwrap();
    let builtin = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/kb");
    for f in ["synonyms.tsv", "classes.tsv", "implications.tsv", "exclusivity.tsv", "units.tsv"] {
        fs::copy(builtin.join(f), kb.join(f)).unwrap();
    }
    fs::write(tmp.path().join("doc.json"), r#"{"doc_id":"d","kind":"summary","text":"Fever."}"#).unwrap();
    let o = run(&["extract", "doc.json", "--kb", "kb", "-o", "p.json"], tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut units = fs::read_to_string(kb.join("units.tsv")).unwrap();
    units.push_str("furlong\tlength\n");
    fs::write(kb.join("units.tsv"), units).unwrap();
    let o = run(&["extract", "doc.json", "--kb", "kb", "-o", "q.json"], tmp.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("units.tsv:"), "{}", stderr(&o));
    assert!(!tmp.path().join("q.json").exists());
}

#[test]
fn embeddings_file_drives_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("s.json"), r#"{"doc_id":"s","kind":"summary","text":"Fever on day 2."}"#).unwrap();
    fs::write(
        d.join("e.json"),
        r#"{"doc_id":"e","kind":"ehr","structured":[{"entity":"fever","attribute":"status","time":"day 2"}]}"#,
    )
    .unwrap();
    fs::write(d.join("emb.jsonl"), "{\"id\":[\"s\",0],\"vector\":[1,0]}\n\n{\"id\":[\"e\",0],\"vector\":[0,1]}\n")
        .unwrap();
    let o = run(&["verify", "--summary", "s.json", "--ehr", "e.json", "--embeddings", "emb.jsonl", "-o", "r.json"], d);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r: VerificationReport = serde_json::from_slice(&fs::read(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r.params.embedder, "precomputed");
    assert_eq!(r.verdicts[0].label, Label::NotSupported);
    fs::write(d.join("emb.jsonl"), "{\"id\":[\"s\",0],\"vector\":[1,0]}\n{\"id\":[\"e\",0],\"vector\":[0,1,2]}\n").unwrap();
    let o = run(&["verify", "--summary", "s.json", "--ehr", "e.json", "--embeddings", "emb.jsonl", "-o", "r2.json"], d);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("emb.jsonl:2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one_and_print_grammar() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["frobnicate"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"));
    let o = run(&["verify", "--summary", "a.json", "-o", "x.json"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
    assert_eq!(code(&run(&["--help"], tmp.path())), 0);
}

#[test]
fn lora_demo_writes_trace_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "lora-demo", "--d", "8", "--k", "8", "--r", "2", "--alpha", "4", "--steps", "50", "--init", "gauss", "--seed",
        "3", "--checkpoint", "a.bin", "-o", "t.json",
    ];
    let o = run(&args, tmp.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = fs::read(tmp.path().join("t.json")).unwrap();
    let t: serde_json::Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(t["trace"].as_array().unwrap().len(), 50);
    assert!(t["final_loss"].as_f64().unwrap() < t["initial_loss"].as_f64().unwrap());
    assert_eq!(t["param_counts"]["lora"], 32);
    let adapter = decode_checkpoint(&fs::read(tmp.path().join("a.bin")).unwrap()).unwrap();
    assert_eq!(adapter.rank(), 2);
    assert_eq!(code(&run(&args, tmp.path())), 0);
    assert_eq!(fs::read(tmp.path().join("t.json")).unwrap(), first);
    let o = run(&["lora-demo", "--d", "4", "--k", "4", "--r", "9", "--alpha", "1", "--steps", "1", "-o", "u.json"], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(!tmp.path().join("u.json").exists());
}
