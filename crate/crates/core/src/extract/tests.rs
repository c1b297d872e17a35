use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use proptest::prelude::*;

use super::*;
use crate::kb::KbSources;
use crate::propmodel::{normalize_token, Anchor};

fn kb() -> KnowledgeBase {
    KnowledgeBase::builtin()
}

fn summary(text: &str) -> Document {
    Document::from_text("s", DocKind::Summary, text)
}

/// `entity|kind|value|time|negated` for every proposition of `text`.
fn rows(text: &str, kb: &KnowledgeBase) -> Vec<String> {
    extract_propositions(&summary(text), kb)
        .unwrap()
        .items
        .iter()
        .map(|p| {
            format!(
                "{}|{}|{}|{}|{}",
                p.entity.as_str(),
                p.attribute.kind.as_str(),
                value_phrase(&p.value),
                p.time,
                p.negated
            )
        })
        .collect()
}

const FIXTURES: &[(&str, &[&str])] = &[
    ("Creatinine 1.2 mg/dL on day 2.", &["creatinine|lab_value|1.2 mg/dL|day_2|false"]),
    (
        "Started lisinopril 20 mg daily.",
        &["lisinopril|dosage|20 mg|unknown|false", "lisinopril|dosage|daily|unknown|false"],
    ),
    ("Antibiotics were not prescribed.", &["antibiotics|treatment|present|unknown|true"]),
    ("No evidence of pneumonia on admission.", &["pneumonia|diagnosis|present|admission|true"]),
    ("Diagnosed with community-acquired pneumonia.", &["pneumonia|diagnosis|present|unknown|false"]),
    ("BP 120/80 on admission.", &["blood_pressure|lab_value|120/80 mmHg|admission|false"]),
    ("Denies dyspnea but reports fever.", &["fever|status|present|unknown|false"]),
    ("Fever resolved by day 3.", &["fever|status|resolved|day_3|false"]),
    (
        "Hemoglobin 8.2 g/dL, potassium 4.1 mmol/L.",
        &["hemoglobin|lab_value|8.2 g/dL|unknown|false", "potassium|lab_value|4.1 mmol/L|unknown|false"],
    ),
    (
        "Metoprolol 25 mg b.i.d. continued.",
        &["metoprolol|dosage|25 mg|unknown|false", "metoprolol|dosage|twice daily|unknown|false"],
    ),
    ("Received IV ceftriaxone from day 1 to day 5.", &["ceftriaxone|treatment|present|[1,5]|false"]),
    ("Blood cultures negative.", &["blood_culture|lab_value|negative|unknown|false"]),
    ("Negative for DVT.", &["deep_vein_thrombosis|diagnosis|present|unknown|true"]),
    ("Heart rate 88 bpm at discharge.", &["heart_rate|lab_value|88 bpm|discharge|false"]),
    (
        "Furosemide 40 mg IV twice daily.",
        &["furosemide|dosage|40 mg|unknown|false", "furosemide|dosage|twice daily|unknown|false"],
    ),
    ("Underwent bronchoscopy on day 4.", &["bronchoscopy|procedure|present|day_4|false"]),
    ("Pulmonary embolism was ruled out.", &["pulmonary_embolism|diagnosis|present|unknown|true"]),
    (
        "Home medications include aspirin 81 mg daily and atorvastatin.",
        &[
            "aspirin|dosage|81 mg|unknown|false",
            "aspirin|dosage|daily|unknown|false",
            "atorvastatin|medication|present|unknown|false",
        ],
    ),
    ("Temperature 38.5 °C before discharge.", &["temperature|lab_value|38.5 °C|[0,discharge)|false"]),
    (
        "Given acetaminophen every 6 hours for fever.",
        &["acetaminophen|dosage|every 6 hours|unknown|false", "fever|status|present|unknown|false"],
    ),
    ("Glucose elevated at 180 mg/dL.", &["glucose|lab_value|180 mg/dL|unknown|false"]),
    ("Transferred to the ward on day 5.", &["transfer_to_ward|event|present|day_5|false"]),
];

#[test]
fn fixture_corpus() {
    let kb = kb();
    let mut failures = Vec::new();
    for (text, want) in FIXTURES {
        let got = rows(text, &kb);
        if got != *want {
            failures.push(format!("{text}\n  want {want:?}\n  got  {got:?}"));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn fixture_corpus_as_one_document() {
    let kb = kb();
    let text: String = FIXTURES.iter().map(|(t, _)| *t).collect::<Vec<_>>().join(" ");
    let want: Vec<&str> = FIXTURES.iter().flat_map(|(_, w)| w.iter().copied()).collect();
    assert_eq!(rows(&text, &kb), want);
    let set = extract_propositions(&summary(&text), &kb).unwrap();
    let sentences: BTreeSet<u32> = set.items.iter().map(|p| p.span.sentence).collect();
    assert_eq!(sentences.len(), FIXTURES.len());
}

#[test]
fn spans_point_at_the_entity_mention() {
    let kb = kb();
    let text: String = FIXTURES.iter().map(|(t, _)| *t).collect::<Vec<_>>().join("\n");
    let sentences = segment_sentences(&text, &kb.cues().abbreviations);
    for p in extract_propositions(&summary(&text), &kb).unwrap().items {
        let sent = sentences[p.span.sentence as usize].text;
        let base = sentences[p.span.sentence as usize].char_start as u32;
        let mention: String = text
            .chars()
            .skip(p.span.start as usize)
            .take((p.span.end - p.span.start) as usize)
            .collect();
        assert!(p.span.start >= base && sent.contains(&mention), "{mention:?} not in {sent:?}");
        assert_eq!(kb.entity_form(&normalize_token(&mention)), Some(&p.entity), "{mention:?}");
    }
}

#[test]
fn propositions_are_atomic_and_valid() {
    let kb = kb();
    let text: String = FIXTURES.iter().map(|(t, _)| *t).collect::<Vec<_>>().join(" ");
    let set = extract_propositions(&summary(&text), &kb).unwrap();
    assert!(crate::propmodel::validate_set(&set).is_empty());
    let mut seen = BTreeSet::new();
    for p in &set.items {
        assert!(seen.insert((p.span.sentence, p.entity.clone(), p.attribute.kind, format!("{:?}", p.value))));
    }
    for (i, p) in set.items.iter().enumerate() {
        assert_eq!(p.id, PropositionId::new("s", i as u32));
    }
}

#[test]
fn extraction_is_deterministic() {
    let kb = kb();
    let text: String = FIXTURES.iter().map(|(t, _)| *t).collect::<Vec<_>>().join(" ");
    let a = extract_propositions(&summary(&text), &kb).unwrap();
    let b = extract_propositions(&summary(&text), &KnowledgeBase::builtin()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn growing_the_lexicon_only_adds_propositions() {
    let base = kb();
    let synonyms = format!("{}\ndyspnea\tfever\nbreathing\tfever\n", KbSources::BUILTIN.synonyms);
    let grown = KnowledgeBase::from_sources(KbSources {
        synonyms: &synonyms,
        ..KbSources::BUILTIN
    })
    .unwrap();
    for (text, _) in FIXTURES {
        let before = rows(text, &base);
        let after = rows(text, &grown);
        if !text.contains("dyspnea") {
            assert_eq!(before, after, "{text}");
        }
    }
    let text = "Reports dyspnea.";
    assert!(rows(text, &base).is_empty());
    assert_eq!(rows(text, &grown), ["fever|status|present|unknown|false"]);
}

#[test]
fn detect_negation_examples() {
    let kb = kb();
    let neg = |s: &str, entity: &str| {
        let at = s.find(entity).unwrap();
        detect_negation(s, at..at + entity.len(), &kb)
    };
    assert!(neg("Antibiotics were not prescribed", "Antibiotics"));
    assert!(neg("No evidence of pneumonia", "pneumonia"));
    assert!(neg("Patient denies fever or chills", "fever"));
    assert!(neg("DVT ruled out", "DVT"));
    assert!(!neg("Fever persisted until discharge", "Fever"));
    assert!(!neg("No cough; fever present", "fever"));
    assert!(!neg("Not hypoxic but febrile", "febrile"));
    // Cue words reset the scope: `no` here governs the ward transfer.
    assert!(!neg("No transfer was needed, started ceftriaxone", "ceftriaxone"));
}

#[test]
fn parse_value_examples() {
    let kb = kb();
    let val = |s: &str, entity: &str| {
        let at = s.find(entity).unwrap();
        value_phrase(&parse_value(s, at..at + entity.len(), &kb))
    };
    assert_eq!(val("Creatinine 1.2 mg/dL", "Creatinine"), "1.2 mg/dL");
    assert_eq!(val("BP 145/90", "BP"), "145/90 mmHg");
    assert_eq!(val("Lisinopril 20 mg daily", "Lisinopril"), "20 mg");
    assert_eq!(val("Metformin twice daily", "Metformin"), "twice daily");
    assert_eq!(val("Blood cultures negative", "Blood cultures"), "negative");
    assert_eq!(val("Pneumonia on day 2", "Pneumonia"), "present");
    assert_eq!(val("Hgb 8.2 g/dL, Cr 1.4 mg/dL", "Cr"), "1.4 mg/dL");
}

#[test]
fn structured_entries() {
    let kb = kb();
    let mut doc = Document::from_entries(
        "e",
        DocKind::Ehr,
        vec![
            StructuredEntry::new("Serum creatinine", AttributeKind::LabValue).value("2.1 mg/dL").time("day 2"),
            StructuredEntry::new("lisinopril", AttributeKind::Dosage).value("20 mg daily"),
            StructuredEntry::new("Fever", AttributeKind::Status).time("until discharge"),
            StructuredEntry::new("antibiotics", AttributeKind::Treatment).negated(true).time("admission"),
            StructuredEntry {
                value: Some(RawValue::Number(120.0)),
                unit: Some("mg/dL".into()),
                ..StructuredEntry::new("glucose", AttributeKind::LabValue)
            },
            StructuredEntry {
                value: Some(RawValue::Tagged(Value::Qualitative { label: "positive".into() })),
                time: Some(RawTime::Tagged(TimeRef::Marker(Anchor::Day(1)))),
                ..StructuredEntry::new("blood culture", AttributeKind::LabValue)
            },
        ],
    );
    doc.admission = Some("2024-03-01".into());
    doc.discharge = Some("2024-03-06".into());
    doc.text = Some("Hemoglobin 8.2 g/dL.".into());
    let set = extract_propositions(&doc, &kb).unwrap();
    assert_eq!(set.discharge_day, Some(rational::int(5)));
    let got: Vec<String> = set
        .items
        .iter()
        .map(|p| {
            format!(
                "{}|{}|{}|{}|{}|{}",
                p.span.sentence,
                p.entity.as_str(),
                p.attribute.kind.as_str(),
                value_phrase(&p.value),
                p.time,
                p.negated
            )
        })
        .collect();
    assert_eq!(
        got,
        [
            "0|creatinine|lab_value|2.1 mg/dL|day_2|false",
            "1|lisinopril|dosage|20 mg|unknown|false",
            "1|lisinopril|dosage|daily|unknown|false",
            "2|fever|status|present|[0,discharge]|false",
            "3|antibiotics|treatment|present|admission|true",
            "4|glucose|lab_value|120 mg/dL|unknown|false",
            "5|blood_culture|lab_value|positive|day_1|false",
            "0|hemoglobin|lab_value|8.2 g/dL|unknown|false",
        ]
    );
}

#[test]
fn structured_entries_parse_from_json() {
    let json = r#"{
        "doc_id": "p1-ehr", "kind": "ehr", "admission": "2024-03-01", "discharge": "2024-03-04",
        "structured": [
            {"entity": "BP", "attribute": "lab_value", "value": "120/80", "time": "on admission"},
            {"entity": "potassium", "attribute": "lab_value", "value": 4.1, "unit": "mmol/L", "time": "2024-03-03"},
            {"entity": "aspirin", "attribute": "dosage", "value": {"type": "frequency", "count": "1", "per": "day"}}
        ]
    }"#;
    let doc: Document = serde_json::from_str(json).unwrap();
    let set = extract_propositions(&doc, &kb()).unwrap();
    assert_eq!(set.discharge_day, Some(rational::int(3)));
    assert_eq!(
        set.items[0].value,
        Value::QuantityPair {
            first: rational::int(120),
            second: rational::int(80),
            unit: "mmHg".into()
        }
    );
    assert_eq!(set.items[1].value, Value::quantity(Rational::new(41, 10), "mmol/L"));
    assert_eq!(set.items[1].time, TimeRef::Marker(Anchor::Day(2)));
    assert_eq!(set.items[2].value, Value::Frequency { count: rational::int(1), per: "day".into() });
}

#[test]
fn invalid_documents() {
    let kb = kb();
    assert_eq!(
        extract_propositions(&summary("  "), &kb),
        Err(ExtractError::EmptyDocument { doc_id: "s".into() })
    );
    let bad_kind = Document::from_entries("e", DocKind::Ehr, vec![StructuredEntry {
        attribute: "colour".into(),
        ..StructuredEntry::new("fever", AttributeKind::Status)
    }]);
    assert!(matches!(
        extract_propositions(&bad_kind, &kb),
        Err(ExtractError::InvalidEntry { index: 0, .. })
    ));
    let bad_time = Document::from_entries(
        "e",
        DocKind::Ehr,
        vec![StructuredEntry::new("fever", AttributeKind::Status), StructuredEntry::new("fever", AttributeKind::Status).time("sometime")],
    );
    assert!(matches!(
        extract_propositions(&bad_time, &kb),
        Err(ExtractError::InvalidEntry { index: 1, .. })
    ));
    let mut bad_date = summary("Fever.");
    bad_date.admission = Some("March 1".into());
    assert!(matches!(extract_propositions(&bad_date, &kb), Err(ExtractError::InvalidDate { field: "admission", .. })));
    let mut backwards = summary("Fever.");
    backwards.admission = Some("2024-03-05".into());
    backwards.discharge = Some("2024-03-01".into());
    assert!(matches!(extract_propositions(&backwards, &kb), Err(ExtractError::InvalidDate { field: "discharge", .. })));
    let mut stay = summary("Fever.");
    stay.discharge = Some("4.5".into());
    assert_eq!(extract_propositions(&stay, &kb).unwrap().discharge_day, Some(Rational::new(9, 2)));
}

#[test]
fn value_phrases_read_back() {
    let kb = kb();
    let values = [
        Value::quantity(Rational::new(12, 10), "mg/dL"),
        Value::quantity(rational::int(7), ""),
        Value::QuantityPair { first: rational::int(145), second: rational::int(90), unit: "mmHg".into() },
        Value::Frequency { count: rational::int(1), per: "day".into() },
        Value::Frequency { count: rational::int(2), per: "day".into() },
        Value::Frequency { count: rational::int(3), per: "day".into() },
        Value::Frequency { count: rational::int(1), per: "week".into() },
        Value::Frequency { count: Rational::new(1, 8), per: "hour".into() },
        Value::Qualitative { label: "elevated".into() },
        Value::present(),
        Value::Present { flag: false },
    ];
    for v in values {
        assert_eq!(parse_value_phrase(&value_phrase(&v), None, &kb), [v.clone()], "{}", value_phrase(&v));
    }
}

proptest! {
    #[test]
    fn quantities_round_trip_through_text(mag in 1u32..100_000, scale in 0u32..3, unit_ix in 0usize..6) {
        let units = ["mg", "mg/dL", "mmol/L", "bpm", "%", "g/dL"];
        let v = Value::quantity(Rational::new(i128::from(mag), 10i128.pow(scale)), units[unit_ix]);
        let text = format!("Creatinine {}.", value_phrase(&v));
        let set = extract_propositions(&summary(&text), &kb()).unwrap();
        prop_assert_eq!(set.items.len(), 1);
        prop_assert_eq!(&set.items[0].value, &v);
    }

    #[test]
    fn extraction_never_panics(text in "[A-Za-z0-9 .,;/-]{0,80}") {
        let kb = kb();
        if let Ok(set) = extract_propositions(&summary(&text), &kb) {
            prop_assert!(crate::propmodel::validate_set(&set).is_empty());
        }
    }
}

#[test]
fn entity_forms_cover_concept_ids() {
    let kb = kb();
    let text = "Cardiac catheterization on day 2. Oxygen saturation 94 %.";
    assert_eq!(
        rows(text, &kb),
        [
            "cardiac_catheterization|procedure|present|day_2|false",
            "oxygen_saturation|lab_value|94 %|unknown|false",
        ]
    );
}
