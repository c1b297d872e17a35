use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use super::*;
use crate::extract::extract_propositions;
use crate::kb::KbSources;
use crate::pipeline::{verify_documents, VerifyParams};
use crate::propmodel::Proposition;

fn kb() -> KnowledgeBase {
    KnowledgeBase::builtin()
}

fn key(p: &Proposition) -> String {
    format!("{}|{}|{}|{}|{}", p.entity, p.attribute.kind, value_phrase(&p.value), p.time, p.negated)
}

fn line_keys(lines: &[Line]) -> Vec<String> {
    lines
        .iter()
        .filter(|l| !l.removed)
        .flat_map(|l| {
            l.values
                .iter()
                .map(move |v| format!("{}|{}|{}|{}|{}", l.entity, l.kind, value_phrase(v), l.time, l.negated))
        })
        .collect()
}

fn fact_keys(facts: &[Fact]) -> Vec<String> {
    facts
        .iter()
        .flat_map(|f| {
            f.values
                .iter()
                .map(move |v| format!("{}|{}|{}|{}|false", f.entity, f.kind, value_phrase(v), f.time))
        })
        .collect()
}

#[test]
fn same_seed_same_pair() {
    let kb = kb();
    for seed in [0, 1, 42, u64::MAX] {
        let a = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let b = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        assert_eq!(a.documents(), b.documents());
    }
    let a = generate_patient(1, &kb, SizeParams::default()).unwrap();
    let b = generate_patient(2, &kb, SizeParams::default()).unwrap();
    assert_ne!(a.ehr().structured, b.ehr().structured);
}

#[test]
fn record_size_within_bounds() {
    let kb = kb();
    for (min, max) in [(10, 40), (6, 8), (30, 30)] {
        let size = SizeParams {
            min_props: min,
            max_props: max,
        };
        for seed in 0..40 {
            let p = generate_patient(seed, &kb, size).unwrap();
            let n = extract_propositions(&p.ehr(), &kb).unwrap().items.len();
            assert_eq!(n, p.record_props());
            assert!((min..=max).contains(&n), "seed {seed}: {n} not in {min}..={max}");
        }
    }
}

#[test]
fn bad_size_bounds_are_rejected() {
    let kb = kb();
    let size = SizeParams {
        min_props: 9,
        max_props: 3,
    };
    assert!(matches!(generate_patient(0, &kb, size), Err(GenError::InvalidSize { .. })));
}

#[test]
fn documents_extract_to_the_planned_propositions() {
    let kb = kb();
    for seed in 0..60 {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let (ehr, summary) = p.documents();
        let e: Vec<String> = extract_propositions(&ehr, &kb).unwrap().items.iter().map(key).collect();
        assert_eq!(e, fact_keys(&p.record), "seed {seed} record");
        let s: Vec<String> = extract_propositions(&summary, &kb).unwrap().items.iter().map(key).collect();
        assert_eq!(s, line_keys(&p.lines), "seed {seed} summary: {}", summary.text.as_deref().unwrap());
    }
}

#[test]
fn record_respects_rules() {
    let kb = kb();
    for seed in 0..60 {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        for (i, a) in p.record.iter().enumerate() {
            for b in &p.record[i + 1..] {
                assert_ne!(a.entity, b.entity, "seed {seed}");
                assert!(!kb.are_exclusive(&a.entity, &b.entity), "seed {seed}");
            }
            for r in kb.implications() {
                if kb.is_member(&a.entity, &r.antecedent) {
                    assert!(p.record.iter().any(|f| kb.is_member(&f.entity, &r.consequent)), "seed {seed}");
                }
            }
        }
        for f in p.record.iter().filter(|f| f.kind.is_key()) {
            assert!(p.lines.iter().any(|l| l.entity == f.entity), "seed {seed}: {} missing", f.entity);
        }
    }
}

fn verify(pair: &InjectedPair, kb: &KnowledgeBase) -> crate::checks::VerificationReport {
    verify_documents(&pair.summary, &pair.ehr, kb, None, &VerifyParams::default()).unwrap()
}

#[test]
fn faithful_pairs_verify_clean() {
    let kb = kb();
    for seed in 0..60 {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let inj = inject_faults(&p, &[], &kb).unwrap();
        assert!(inj.gold.labels.iter().all(|l| l.gold == Label::Supported));
        assert!(inj.gold.expected.is_empty());
        let r = verify(&inj, &kb);
        let bad: Vec<_> = r.verdicts.iter().filter(|v| v.label != Label::Supported).collect();
        assert!(bad.is_empty(), "seed {seed}: {bad:?}\n{}", inj.summary.text.as_deref().unwrap());
        assert!(r.omissions.is_empty(), "seed {seed}: {:?}", r.omissions);
        assert!(r.warnings.is_empty(), "seed {seed}: {:?}", r.warnings);
        assert_eq!(r.verdicts.len(), inj.gold.labels.len());
    }
}

/// Runs one fault over many seeds: every expected code at every site,
/// no other failing proposition, and exactly the expected omissions.
fn single_fault(kind: FaultKind, seeds: u64) -> usize {
    let kb = kb();
    let mut injected = 0;
    for seed in 0..seeds {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let spec = FaultSpec::new(kind, rational::int(1), seed);
        let inj = match inject_faults(&p, &[spec], &kb) {
            Ok(i) => i,
            Err(GenError::NoEligibleSite(k)) => {
                assert_eq!(k, kind);
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        injected += 1;
        let text = inj.summary.text.clone().unwrap_or_default();
        let r = verify(&inj, &kb);
        let expected = &inj.gold.expected[0];
        assert_eq!(expected.code, kind.expected_code());
        for v in &r.verdicts {
            let site = expected.sites.contains(&v.proposition_id);
            if site {
                assert!(v.failure_codes.contains(&expected.code), "seed {seed} {kind}: {v:?}\n{text}");
            } else {
                assert_eq!(v.label, Label::Supported, "seed {seed} {kind}: spurious {v:?}\n{text}");
            }
        }
        let got: Vec<&PropositionId> = r.omissions.iter().map(|o| &o.ehr_id).collect();
        let want: Vec<&PropositionId> = expected.omissions.iter().collect();
        assert_eq!(got, want, "seed {seed} {kind}\n{text}");
        for (label, v) in inj.gold.labels.iter().zip(&r.verdicts) {
            assert_eq!(label.id, v.proposition_id);
            assert_eq!(label.gold, v.label, "seed {seed} {kind}");
        }
    }
    injected
}

#[test]
fn value_perturb_is_caught() {
    assert!(single_fault(FaultKind::ValuePerturb, 40) >= 35);
}

#[test]
fn unit_swap_is_caught() {
    assert!(single_fault(FaultKind::UnitSwap, 40) >= 30);
}

#[test]
fn negation_flip_is_caught() {
    assert_eq!(single_fault(FaultKind::NegationFlip, 40), 40);
}

#[test]
fn temporal_swap_is_caught() {
    assert!(single_fault(FaultKind::TemporalSwap, 40) >= 30);
}

#[test]
fn exclusivity_insert_is_caught() {
    assert!(single_fault(FaultKind::ExclusivityInsert, 40) >= 30);
}

#[test]
fn fabrication_is_caught() {
    assert_eq!(single_fault(FaultKind::Fabrication, 40), 40);
}

#[test]
fn omission_is_caught() {
    assert_eq!(single_fault(FaultKind::Omission, 40), 40);
}

#[test]
fn implication_break_is_caught() {
    assert!(single_fault(FaultKind::ImplicationBreak, 40) >= 30);
}

#[test]
fn negation_flip_marks_one_site() {
    let kb = kb();
    let p = generate_patient(7, &kb, SizeParams::default()).unwrap();
    let inj = inject_faults(&p, &[FaultSpec::new(FaultKind::NegationFlip, rational::int(1), 3)], &kb).unwrap();
    let bad: Vec<&GoldLabel> = inj.gold.labels.iter().filter(|l| l.gold == Label::NotSupported).collect();
    assert_eq!(bad.len(), 1);
    assert_eq!(inj.gold.expected[0].sites, vec![bad[0].id.clone()]);
    assert_eq!(inj.gold.expected[0].code, FailureCode::Negation);
}

#[test]
fn omission_expects_a_presence_failure() {
    let kb = kb();
    let p = generate_patient(11, &kb, SizeParams::default()).unwrap();
    let inj = inject_faults(&p, &[FaultSpec::new(FaultKind::Omission, rational::int(1), 0)], &kb).unwrap();
    let e = &inj.gold.expected[0];
    assert_eq!(e.code, FailureCode::Presence);
    assert!(e.sites.is_empty());
    assert!(!e.omissions.is_empty());
    assert!(inj.gold.labels.iter().all(|l| l.gold == Label::Supported));
}

#[test]
fn value_perturbation_uses_coarse_factors() {
    let kb = kb();
    for seed in 0..20 {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let spec = FaultSpec::new(FaultKind::ValuePerturb, rational::int(1), seed);
        let inj = inject_faults(&p, &[spec], &kb).unwrap();
        let before = extract_propositions(&p.summary(), &kb).unwrap();
        let after = extract_propositions(&inj.summary, &kb).unwrap();
        let site = &inj.gold.expected[0].sites[0];
        let (Value::Quantity { magnitude: a, unit: ua }, Value::Quantity { magnitude: b, unit: ub }) =
            (&before.get(site).unwrap().value, &after.get(site).unwrap().value)
        else {
            panic!("not a quantity");
        };
        assert_eq!(ua, ub);
        let factors: Vec<Rational> = PERTURB_FACTORS.iter().map(|(n, d)| Rational::new(*n, *d)).collect();
        assert!(factors.contains(&(b / a)), "{a} -> {b}");
    }
}

#[test]
fn multiple_faults_use_disjoint_sites() {
    let kb = kb();
    let faults = [
        FaultSpec::new(FaultKind::NegationFlip, rational::int(0), 1),
        FaultSpec::new(FaultKind::ValuePerturb, rational::int(0), 2),
        FaultSpec::new(FaultKind::Fabrication, rational::int(0), 3),
    ];
    for seed in 0..20 {
        let p = generate_patient(seed, &kb, SizeParams::default()).unwrap();
        let Ok(inj) = inject_faults(&p, &faults, &kb) else { continue };
        let mut seen = BTreeSet::new();
        for e in &inj.gold.expected {
            for s in &e.sites {
                assert!(seen.insert(s.clone()), "seed {seed}: {s} reused");
            }
        }
        assert_eq!(inj.gold.expected.len(), 3);
    }
}

#[test]
fn rates_are_validated() {
    let half = Rational::new(1, 2);
    let ok = [
        FaultSpec::new(FaultKind::Omission, half, 0),
        FaultSpec::new(FaultKind::Fabrication, half, 0),
    ];
    assert!(validate_faults(&ok).is_ok());
    let over = [
        FaultSpec::new(FaultKind::Omission, half, 0),
        FaultSpec::new(FaultKind::Fabrication, Rational::new(2, 3), 0),
    ];
    assert!(matches!(validate_faults(&over), Err(GenError::InvalidRates(_))));
    let negative = [FaultSpec::new(FaultKind::Omission, Rational::new(-1, 2), 0)];
    assert!(validate_faults(&negative).is_err());
}

#[test]
fn corpus_is_deterministic_and_honours_rates() {
    let kb = kb();
    let faults = [FaultSpec::new(FaultKind::NegationFlip, rational::int(1), 9)];
    let a = generate_corpus(5, 12, &faults, &kb, SizeParams::default()).unwrap();
    let b = generate_corpus(5, 12, &faults, &kb, SizeParams::default()).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|d| d.applied == vec![FaultKind::NegationFlip]));
    assert_eq!(a[3].summary.doc_id, "doc0003-summary");
    assert_eq!(a[3].gold.doc_id, "doc0003-summary");
    let clean = generate_corpus(5, 12, &[], &kb, SizeParams::default()).unwrap();
    assert!(clean.iter().all(|d| d.applied.is_empty() && d.gold.expected.is_empty()));
    assert_eq!(clean[0].ehr, a[0].ehr);
}

#[test]
fn fault_spec_json_shape() {
    let spec = FaultSpec::new(FaultKind::UnitSwap, Rational::new(1, 4), 17);
    let v = serde_json::to_value(&spec).unwrap();
    assert_eq!(v, serde_json::json!({"kind": "unit_swap", "rate": "0.25", "seed": 17}));
    let back: FaultSpec = serde_json::from_value(v).unwrap();
    assert_eq!(back, spec);
}

fn tiny_kb(exclusivity: &str) -> KnowledgeBase {
    KnowledgeBase::from_sources(KbSources {
        synonyms: "",
        classes: "pneumonia\tdiagnosis\ngout\tdiagnosis\ncreatinine\tlab\nbronchoscopy\tprocedure\nfever\tstatus\nroom_air\tstatus\n",
        implications: "",
        exclusivity,
        units: KbSources::BUILTIN.units,
        cues: None,
    })
    .unwrap()
}

#[test]
fn small_vocabulary_is_reported() {
    let kb = tiny_kb("");
    assert!(matches!(
        generate_patient(0, &kb, SizeParams::default()),
        Err(GenError::KbTooSmall { .. })
    ));
    let empty = KnowledgeBase::from_sources(KbSources {
        synonyms: "",
        classes: "creatinine\tlab\n",
        implications: "",
        exclusivity: "",
        units: KbSources::BUILTIN.units,
        cues: None,
    })
    .unwrap();
    assert!(matches!(
        generate_patient(0, &empty, SizeParams::default()),
        Err(GenError::KbTooSmall { .. })
    ));
}

#[test]
fn missing_sites_are_reported() {
    let kb = tiny_kb("");
    let size = SizeParams {
        min_props: 3,
        max_props: 6,
    };
    let p = generate_patient(0, &kb, size).unwrap();
    for kind in [FaultKind::ExclusivityInsert, FaultKind::ImplicationBreak] {
        let spec = FaultSpec::new(kind, rational::int(1), 0);
        assert_eq!(inject_faults(&p, &[spec], &kb), Err(GenError::NoEligibleSite(kind)));
    }
}
