use std::fs;

use veriprop::bundle::{read_bundle, read_manifest, write_bundle, Manifest};
use veriprop::io::{read_golds, read_json_list, write_atomic, write_json};
use veriprop_core::kb::KnowledgeBase;
use veriprop_core::rational;
use veriprop_core::simcorpus::{generate_corpus, FaultKind, FaultSpec, SizeParams};

#[test]
fn single_value_or_array() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("x.json");
    fs::write(&p, "[1, 2, 3]").unwrap();
    assert_eq!(read_json_list::<u32>(&p).unwrap(), vec![1, 2, 3]);
    fs::write(&p, "7").unwrap();
    assert_eq!(read_json_list::<u32>(&p).unwrap(), vec![7]);
}

#[test]
fn atomic_write_replaces_whole_file() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("out.json");
    write_json(&p, &vec![1, 2]).unwrap();
    write_atomic(&p, b"short").unwrap();
    assert_eq!(fs::read(&p).unwrap(), b"short");
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 1);
    assert!(write_atomic(&tmp.path().join("missing/out.json"), b"x").is_err());
}

#[test]
fn bundle_round_trip() {
    let kb = KnowledgeBase::builtin();
    let faults = [FaultSpec::new(FaultKind::Omission, rational::int(1), 5)];
    let docs = generate_corpus(11, 3, &faults, &kb, SizeParams::default()).unwrap();
    let manifest = Manifest::new(11, &faults, SizeParams::default(), &docs);
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bundle");
    write_bundle(&dir, &manifest, &docs).unwrap();
    assert_eq!(read_manifest(&dir).unwrap(), manifest);
    let back = read_bundle(&dir).unwrap();
    assert_eq!(back.len(), 3);
    for (b, d) in back.iter().zip(&docs) {
        assert_eq!(b.ehr, d.ehr);
        assert_eq!(b.summary, d.summary);
        assert_eq!(b.gold, d.gold);
    }
    assert_eq!(manifest.documents[0].id, "doc0000");
    assert_eq!(manifest.documents[0].applied, vec![FaultKind::Omission]);
    let golds = read_golds(&dir.join("gold")).unwrap();
    assert_eq!(golds.len(), 3);
    assert_eq!(golds[2].doc_id, "doc0002-summary");
}
