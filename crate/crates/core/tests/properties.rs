mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;

use eol_mistrust::analysis::{stratify_by_score, correlation_report};
use eol_mistrust::chart_features::{build_vocabulary, encode};
use eol_mistrust::cohort::{build_eol_cohort, build_notes_population, split_by_race, Cohort};
use eol_mistrust::data_model::{
    load_dataset, write_dataset, Admission, ChartEventRecord, DischargeLocation, EhrDataset, LoadOptions, NoteRecord,
    Race, SeverityRecord, Timestamp, Treatment, TreatmentSpanRecord,
};
use eol_mistrust::noncompliance::{label_noncompliance, NoncompliancePatterns};
use eol_mistrust::sentiment::{score_stay, score_text, SentimentLexicon};
use eol_mistrust::sparse_logreg::{fit_training_set, FitConfig, MistrustModel, MistrustScore, TrainingSet};
use eol_mistrust::stats::{ecdf, mann_whitney, pearson, zscore};
use eol_mistrust::treatments::{merge_spans, total_duration, Span};

use common::{enumerated_p, from_spans, merge_by_components, to_spans};

const ITEMS: [(&str, &str); 6] = [
    ("state", "alert"),
    ("state", "sleeping"),
    ("riker-sas scale", "agitated"),
    ("riker-sas scale", "calm/cooperative"),
    ("pain level", "none"),
    ("family meeting", "held"),
];

const WORDS: [&str; 8] = ["good", "poor", "stable", "patient", "noncompliant", "with", "meds", "improved"];

#[derive(Clone, Debug)]
struct AdmShape {
    stay: i64,
    race: u8,
    died: bool,
    loc: u8,
    events: Vec<u8>,
    notes: Vec<Vec<u8>>,
    spans: Vec<(bool, i64, i64)>,
    oasis: f64,
    sapsii: f64,
}

fn adm_shape() -> impl Strategy<Value = AdmShape> {
    (
        (0i64..3000, 0u8..3, any::<bool>(), 0u8..5),
        prop::collection::vec(0u8..6, 0..6),
        prop::collection::vec(prop::collection::vec(0u8..8, 1..6), 0..3),
        prop::collection::vec((any::<bool>(), 0i64..2000, 0i64..400), 0..4),
        (0.0f64..80.0, 0.0f64..120.0),
    )
        .prop_map(|((stay, race, died, loc), events, notes, spans, (oasis, sapsii))| AdmShape {
            stay,
            race,
            died,
            loc,
            events,
            notes,
            spans,
            oasis,
            sapsii,
        })
}

type Tables = (Vec<Admission>, Vec<ChartEventRecord>, Vec<NoteRecord>, Vec<TreatmentSpanRecord>, Vec<SeverityRecord>);

fn build(shapes: &[AdmShape], offset: usize) -> Tables {
    let (mut a, mut c, mut n, mut t, mut s) = (vec![], vec![], vec![], vec![], vec![]);
    for (i, shape) in shapes.iter().enumerate() {
        let id = format!("adm{:04}", i + offset);
        let admit = 1_000_000 + 10_000 * (i + offset) as i64;
        a.push(Admission {
            admission_id: id.clone(),
            patient_id: format!("p{i}"),
            admit_time: Timestamp::from_minutes(admit),
            discharge_time: Timestamp::from_minutes(admit + shape.stay),
            race: [Race::White, Race::Black, Race::Other][shape.race as usize],
            died_in_hospital: shape.died,
            discharge_location: [
                DischargeLocation::Hospice,
                DischargeLocation::Snf,
                DischargeLocation::Home,
                DischargeLocation::Other,
                DischargeLocation::None,
            ][shape.loc as usize],
        });
        for (k, &e) in shape.events.iter().enumerate() {
            let (item, value) = ITEMS[e as usize];
            c.push(ChartEventRecord {
                admission_id: id.clone(),
                item_label: item.into(),
                value_label: value.into(),
                chart_time: Timestamp::from_minutes(admit + k as i64),
            });
        }
        for (k, words) in shape.notes.iter().enumerate() {
            n.push(NoteRecord {
                admission_id: id.clone(),
                chart_time: Timestamp::from_minutes(admit + 5 * k as i64),
                category: "nursing".into(),
                text: words.iter().map(|&w| WORDS[w as usize]).collect::<Vec<_>>().join(" "),
            });
        }
        for &(vent, start, len) in &shape.spans {
            t.push(TreatmentSpanRecord {
                admission_id: id.clone(),
                treatment: if vent { Treatment::Ventilation } else { Treatment::Vasopressor },
                start_time: Timestamp::from_minutes(admit + start),
                end_time: Timestamp::from_minutes(admit + start + len),
            });
        }
        s.push(SeverityRecord {
            admission_id: id,
            oasis: shape.oasis,
            sapsii: shape.sapsii,
        });
    }
    (a, c, n, t, s)
}

fn dataset(shapes: &[AdmShape]) -> EhrDataset {
    let (a, c, n, t, s) = build(shapes, 0);
    EhrDataset::from_parts(a, c, n, t, s).unwrap()
}

fn spans_strategy() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((0i64..5000, 0i64..800).prop_map(|(s, l)| (s, s + l)), 0..10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dataset_round_trips_through_csv(shapes in prop::collection::vec(adm_shape(), 1..8)) {
        let ds = dataset(&shapes);
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let first = load_dataset(dir.path(), LoadOptions { strict: true }).unwrap();
        let second = load_dataset(dir.path(), LoadOptions { strict: true }).unwrap();
        prop_assert!(first.diagnostics.is_empty());
        prop_assert_eq!(&first.dataset, &ds);
        prop_assert_eq!(first.dataset, second.dataset);
    }

    #[test]
    fn eol_cohort_is_idempotent_subset_and_monotone(
        shapes in prop::collection::vec(adm_shape(), 0..10),
        extra in prop::collection::vec(adm_shape(), 0..5),
    ) {
        let ds = dataset(&shapes);
        let eol = build_eol_cohort(&ds);
        prop_assert!(eol.ids().iter().all(|id| ds.admission(id).is_some()));
        prop_assert!(eol.ids().windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(&build_eol_cohort(&ds), &eol);

        let (mut a, mut c, mut n, mut t, mut s) = build(&shapes, 0);
        let (a2, c2, n2, t2, s2) = build(&extra, shapes.len());
        a.extend(a2); c.extend(c2); n.extend(n2); t.extend(t2); s.extend(s2);
        let bigger = EhrDataset::from_parts(a, c, n, t, s).unwrap();
        let grown = build_eol_cohort(&bigger);
        prop_assert!(eol.ids().iter().all(|id| grown.contains(id)));

        let (white, black) = split_by_race(&eol, &ds).unwrap();
        prop_assert_eq!(white.len() + black.len(), eol.len());
        prop_assert!(white.ids().iter().all(|id| !black.contains(id)));
        prop_assert!(build_notes_population(&ds).ids().iter().all(|id| !ds.notes_for(id).is_empty()));
    }

    #[test]
    fn merging_matches_component_oracle(raw in spans_strategy(), gap in 0i64..900) {
        let merged = merge_spans(&to_spans(&raw), gap).unwrap();
        prop_assert_eq!(from_spans(&merged), merge_by_components(&raw, gap));
        prop_assert_eq!(&merge_spans(&merged, gap).unwrap(), &merged);
        let mut rev = to_spans(&raw);
        rev.reverse();
        prop_assert_eq!(&merge_spans(&rev, gap).unwrap(), &merged);
        let longest = raw.iter().map(|(s, e)| e - s).max().unwrap_or(0);
        prop_assert!(total_duration(&merged) >= longest);
        prop_assert!(merged.windows(2).all(|w| w[1].start - w[0].end > gap));
    }

    #[test]
    fn encoding_ignores_event_multiplicity_and_order(shapes in prop::collection::vec(adm_shape(), 1..6)) {
        let ds = dataset(&shapes);
        let mut doubled = shapes.clone();
        for s in &mut doubled {
            let copy = s.events.clone();
            s.events.extend(copy);
            s.events.reverse();
        }
        let ds2 = dataset(&doubled);
        let all = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
        let vocab = build_vocabulary(&ds, None);
        prop_assert_eq!(&build_vocabulary(&ds2, None), &vocab);
        prop_assert!(vocab.names().windows(2).all(|w| w[0] < w[1]));
        let m1 = encode(&ds, &all, &vocab);
        let m2 = encode(&ds2, &all, &vocab);
        prop_assert_eq!(&m1, &m2);
        prop_assert_eq!(m1.n_cols(), vocab.len());
        prop_assert_eq!(m1.n_rows(), all.len());
    }

    #[test]
    fn labels_are_monotone_and_case_insensitive(shapes in prop::collection::vec(adm_shape(), 1..6), target in 0usize..6) {
        let ds = dataset(&shapes);
        let all = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
        let pats = NoncompliancePatterns::default_terms();
        let labels = label_noncompliance(&ds, &all, &pats);

        let mut more = shapes.clone();
        let t = target % shapes.len();
        more[t].notes.push(vec![3, 4]); // "patient noncompliant"
        let (a, c, n, tr, s) = build(&shapes, 0);
        let n: Vec<NoteRecord> = n.into_iter().map(|mut r| { r.text = r.text.to_uppercase(); r }).collect();
        let shouted = EhrDataset::from_parts(a, c, n, tr, s).unwrap();
        prop_assert_eq!(&label_noncompliance(&shouted, &all, &pats), &labels);

        let grown = label_noncompliance(&dataset(&more), &all, &pats);
        for (id, &before) in &labels {
            prop_assert!(!before || grown[id]);
        }
        prop_assert!(grown[&all.ids()[t]]);
    }

    #[test]
    fn predict_proba_is_bounded_and_monotone(
        w in prop::collection::vec(-5.0f64..5.0, 1..6),
        b in -5.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let model = MistrustModel {
            feature_names: (0..w.len()).map(|j| format!("f{j}")).collect(),
            weights: w.clone(),
            intercept: b,
            c: 1.0,
            iterations: 0,
            objective: 0.0,
            converged: true,
        };
        let xs: Vec<Vec<f64>> = (0..8u64)
            .map(|k| (0..w.len()).map(|j| f64::from(((seed >> ((k as usize * 7 + j) % 64)) & 1) as u8)).collect())
            .collect();
        let mut pairs: Vec<(f64, f64)> = xs
            .iter()
            .map(|x| {
                let z: f64 = b + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                (z, model.predict_proba(x).unwrap())
            })
            .collect();
        prop_assert!(pairs.iter().all(|&(_, p)| p > 0.0 && p < 1.0));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        prop_assert!(pairs.windows(2).all(|q| q[0].1 <= q[1].1));
    }

    #[test]
    fn fit_is_deterministic(rows in prop::collection::vec((prop::collection::vec(0u8..2, 3), any::<bool>()), 6..30)) {
        prop_assume!(rows.iter().any(|r| r.1) && rows.iter().any(|r| !r.1));
        let x: Vec<Vec<f64>> = rows.iter().map(|r| r.0.iter().map(|&v| f64::from(v)).collect()).collect();
        let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let set = TrainingSet::from_dense(&x, &y).unwrap();
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let m1 = fit_training_set(&set, names.clone(), &FitConfig::default()).unwrap().model;
        let m2 = fit_training_set(&set, names, &FitConfig::default()).unwrap().model;
        prop_assert_eq!(m1.weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), m2.weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(m1.intercept.to_bits(), m2.intercept.to_bits());
        prop_assert!(m1.weights.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn mann_whitney_is_bounded_and_symmetric(
        a in prop::collection::vec(0u8..6, 1..8),
        b in prop::collection::vec(0u8..6, 1..8),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = mann_whitney(&a, &b).unwrap();
        let ba = mann_whitney(&b, &a).unwrap();
        prop_assert!(ab.u_statistic >= 0.0 && ab.u_statistic <= (a.len() * b.len()) as f64);
        prop_assert!((0.0..=1.0).contains(&ab.p_two_sided));
        prop_assert_eq!(ab.p_two_sided, ba.p_two_sided);
        prop_assert_eq!(ab.u_statistic + ba.u_statistic, (a.len() * b.len()) as f64);
        prop_assert!((ab.p_two_sided - enumerated_p(&a, &b)).abs() <= 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant(
        xy in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..30),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
        let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
        let r = pearson(&x, &y);
        prop_assume!(r.is_ok());
        let r = r.unwrap();
        let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let y2: Vec<f64> = y.iter().map(|v| v / scale - shift).collect();
        prop_assert!((pearson(&x2, &y).unwrap() - r).abs() <= 1e-12);
        prop_assert!((pearson(&x, &y2).unwrap() - r).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&r));
    }

    #[test]
    fn ecdf_and_zscore_definitions(sample in prop::collection::vec(-1000i32..1000, 1..40)) {
        let s: Vec<f64> = sample.iter().map(|&v| f64::from(v)).collect();
        let curve = ecdf(&s).unwrap();
        prop_assert!(curve.points.iter().all(|p| p.fraction > 0.0));
        prop_assert!(curve.points.windows(2).all(|w| w[0].fraction < w[1].fraction && w[0].value < w[1].value));
        prop_assert_eq!(curve.points.last().unwrap().fraction, 1.0);
        for p in &curve.points {
            let count = s.iter().filter(|&&v| v <= p.value).count();
            prop_assert_eq!(p.fraction, count as f64 / s.len() as f64);
        }
        if let Ok(z) = zscore(&s) {
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            prop_assert!(mean.abs() <= 1e-12);
            prop_assert!((var - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn unknown_tokens_never_move_the_raw_score(
        words in prop::collection::vec(0usize..8, 1..12),
        filler in prop::collection::vec("[a-z]{3,8}", 0..5),
    ) {
        let lex = SentimentLexicon::clinical_default();
        let text = words.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
        let base = score_text(&text, &lex);
        prop_assert!((-1.0..=1.0).contains(&base));
        let unknown: Vec<&str> = filler.iter().map(String::as_str).filter(|t| lex.polarity(t).is_none()).collect();
        let padded = format!("{} {text} {}", unknown.join(" "), unknown.join(" "));
        prop_assert_eq!(score_text(&padded, &lex), base);
    }

    #[test]
    fn stay_score_ignores_note_order(notes in prop::collection::vec(prop::collection::vec(0usize..8, 1..5), 1..5)) {
        let lex = SentimentLexicon::clinical_default();
        let records: Vec<NoteRecord> = notes
            .iter()
            .enumerate()
            .map(|(k, ws)| NoteRecord {
                admission_id: "a".into(),
                chart_time: Timestamp::from_minutes((k % 2) as i64),
                category: "nursing".into(),
                text: ws.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" "),
            })
            .collect();
        let mut reversed = records.clone();
        reversed.reverse();
        prop_assert_eq!(score_stay(&records, &lex), score_stay(&reversed, &lex));
    }

    #[test]
    fn stratification_ignores_input_order(
        raw in prop::collection::btree_map("[a-f]{1,3}", 0u8..5, 3..12),
        k_frac in 0.0f64..1.0,
    ) {
        let scores: Vec<MistrustScore> = raw
            .iter()
            .map(|(id, &s)| MistrustScore { admission_id: id.clone(), score: f64::from(s) / 4.0 })
            .collect();
        let k = 1 + ((scores.len() - 2) as f64 * k_frac) as usize;
        let st = stratify_by_score(&scores, k).unwrap();
        let mut rev = scores.clone();
        rev.reverse();
        prop_assert_eq!(&stratify_by_score(&rev, k).unwrap(), &st);
        prop_assert_eq!(st.group_a.len(), k);
        prop_assert!(st.group_a.ids().iter().all(|id| !st.group_b.contains(id)));
        let min_a = st.group_a.ids().iter().map(|id| raw[id]).min().unwrap();
        let max_b = st.group_b.ids().iter().map(|id| raw[id]).max().unwrap();
        prop_assert!(min_a >= max_b);
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(shapes in prop::collection::vec(adm_shape(), 4..20), seed in any::<u64>()) {
        let ds = dataset(&shapes);
        let all = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
        let scores: Vec<MistrustScore> = all
            .ids()
            .iter()
            .enumerate()
            .map(|(i, id)| MistrustScore { admission_id: id.clone(), score: ((seed >> (i % 64)) & 0xff) as f64 / 255.0 })
            .collect();
        if let Ok(m) = correlation_report(&ds, &all, &scores) {
            for i in 0..3 {
                prop_assert_eq!(m.values[i][i], 1.0);
                for j in 0..3 {
                    prop_assert_eq!(m.values[i][j], m.values[j][i]);
                }
            }
        }
    }
}

#[test]
fn merged_spans_cover_their_inputs() {
    let raw = [(0, 10), (5, 8), (700, 710), (1310, 1400)];
    let merged = merge_spans(&to_spans(&raw), 600).unwrap();
    assert_eq!(merged, vec![Span::new(0, 10), Span::new(700, 1400)]);
    let mut by_span: BTreeMap<usize, usize> = BTreeMap::new();
    for (s, e) in raw {
        let k = merged.iter().position(|m| m.start <= s && e <= m.end).unwrap();
        *by_span.entry(k).or_default() += 1;
    }
    assert_eq!(by_span.values().sum::<usize>(), raw.len());
}
