//! Lexicon sentiment of a stay's concatenated notes.
//!
//! De-identification placeholders (`[** ... **]`) are removed before
//! tokenizing, and tokens are purely alphabetic, so punctuation such as the
//! `:[` in `Date:[**5-1-18**]` can never be read as an emoticon.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::data_model::{write_csv, EhrDataset, NoteRecord};
use crate::error::{Error, Result};
use crate::stats::zscore;

const DEFAULT_LEXICON: &str = include_str!("../data/sentiment_lexicon.tsv");

static PLACEHOLDER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)\[\*\*.*?\*\*\]").expect("valid placeholder regex"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentLexicon {
    polarity: BTreeMap<String, f64>,
}

impl SentimentLexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, f64)>) -> Result<Self> {
        let mut polarity = BTreeMap::new();
        for (token, p) in entries {
            let token = token.trim().to_lowercase();
            if token.is_empty() || !token.chars().all(char::is_alphabetic) {
                return Err(Error::InvalidArgument(format!(
                    "lexicon token {token:?} must be a single alphabetic word"
                )));
            }
            if !(-1.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!(
                    "polarity of {token:?} outside [-1, 1]: {p}"
                )));
            }
            if polarity.insert(token.clone(), p).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate lexicon token {token:?}")));
            }
        }
        if polarity.is_empty() {
            return Err(Error::InvalidArgument("sentiment lexicon is empty".into()));
        }
        Ok(SentimentLexicon { polarity })
    }

    /// `token<TAB>polarity` per line; `#` comments and blank lines skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, raw) = line.split_once('\t').ok_or_else(|| {
                Error::InvalidArgument(format!("lexicon line {}: expected token<TAB>polarity", i + 1))
            })?;
            let p: f64 = raw.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("lexicon line {}: bad polarity {raw:?}", i + 1))
            })?;
            entries.push((token.to_string(), p));
        }
        Self::new(entries)
    }

    /// Bundled 200-word clinical-register lexicon.
    pub fn clinical_default() -> Self {
        Self::parse_tsv(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn polarity(&self, token: &str) -> Option<f64> {
        self.polarity.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.polarity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polarity.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, f64)> {
        self.polarity.iter().map(|(k, &v)| (k.as_str(), v))
    }
}

pub fn strip_placeholders(text: &str) -> String {
    PLACEHOLDER.replace_all(text, " ").into_owned()
}

/// Lowercase maximal runs of alphabetic characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Mean polarity over lexicon-matched tokens of the text; 0.0 when nothing matches.
pub fn score_text(text: &str, lexicon: &SentimentLexicon) -> f64 {
    let cleaned = strip_placeholders(text);
    let (sum, count) = tokenize(&cleaned)
        .filter_map(|t| lexicon.polarity(&t))
        .fold((0.0, 0usize), |(s, c), p| (s + p, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Scores the concatenation of all notes of one stay, in chart-time order.
pub fn score_stay(notes: &[NoteRecord], lexicon: &SentimentLexicon) -> f64 {
    let mut ordered: Vec<&NoteRecord> = notes.iter().collect();
    ordered.sort_by(|a, b| a.chart_time.cmp(&b.chart_time).then_with(|| a.text.cmp(&b.text)));
    let joined = ordered
        .iter()
        .map(|n| n.text.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    score_text(&joined, lexicon)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub admission_id: String,
    pub raw: f64,
    /// Z-score of `raw` over the scored population.
    pub normalized: f64,
}

/// Raw scores for every cohort admission, z-normalized over the cohort.
pub fn score_population(
    ds: &EhrDataset,
    cohort: &Cohort,
    lexicon: &SentimentLexicon,
) -> Result<Vec<SentimentScore>> {
    if cohort.len() < 2 {
        return Err(Error::InvalidArgument(
            "sentiment normalization needs at least two admissions".into(),
        ));
    }
    let raw: Vec<f64> = cohort
        .ids()
        .iter()
        .map(|id| score_stay(ds.notes_for(id), lexicon))
        .collect();
    let normalized = zscore(&raw).map_err(|e| match e {
        Error::ConstantSample(_) => Error::ConstantSample("raw sentiment scores are all equal"),
        other => other,
    })?;
    Ok(cohort
        .ids()
        .iter()
        .zip(raw)
        .zip(normalized)
        .map(|((id, raw), normalized)| SentimentScore {
            admission_id: id.clone(),
            raw,
            normalized,
        })
        .collect())
}

pub fn write_sentiment_csv(path: impl AsRef<Path>, scores: &[SentimentScore]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("sentiment.csv");
    write_csv(dir, file, |w| {
        w.write_record(["admission_id", "raw", "normalized"])?;
        for s in scores {
            w.write_record([s.admission_id.as_str(), &s.raw.to_string(), &s.normalized.to_string()])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Admission, DischargeLocation, Race, Timestamp};

    fn lex(entries: &[(&str, f64)]) -> SentimentLexicon {
        SentimentLexicon::new(entries.iter().map(|(t, p)| (t.to_string(), *p))).unwrap()
    }

    #[test]
    fn single_match() {
        let l = lex(&[("good", 0.7)]);
        assert!((score_text("patient had a good night", &l) - 0.7).abs() < 1e-15);
        assert_eq!(score_text("no lexicon words here", &l), 0.0);
    }

    #[test]
    fn placeholders_never_score() {
        let l = SentimentLexicon::clinical_default();
        assert_eq!(score_text("Date:[**5-1-18**]", &l), 0.0);
        assert_eq!(score_text("[**Hospital 1234 good great**] :( :[", &l), 0.0);
        let multi = "seen by Dr. [**Last Name (un)\nbad**] today, calm";
        assert!((score_text(multi, &l) - l.polarity("calm").unwrap()).abs() < 1e-15);
    }

    #[test]
    fn unknown_tokens_do_not_shift_mean() {
        let l = lex(&[("good", 0.7), ("bad", -0.5)]);
        let a = score_text("good bad", &l);
        let b = score_text("good zebra bad quantum", &l);
        assert_eq!(a, b);
    }

    #[test]
    fn lexicon_validation() {
        assert!(SentimentLexicon::new(Vec::new()).is_err());
        assert!(SentimentLexicon::parse_tsv("good\t1.5\n").is_err());
        assert!(SentimentLexicon::parse_tsv("good 0.5\n").is_err());
        assert!(SentimentLexicon::parse_tsv("a\t0.1\nA\t0.2\n").is_err());
        let l = SentimentLexicon::clinical_default();
        assert_eq!(l.len(), 200);
        assert!(l.entries().all(|(_, p)| (-1.0..=1.0).contains(&p)));
    }

    fn dataset(texts: &[(&str, &str)]) -> EhrDataset {
        let mut ids: Vec<&str> = texts.iter().map(|t| t.0).collect();
        ids.dedup();
        let adms = ids
            .iter()
            .map(|id| Admission {
                admission_id: id.to_string(),
                patient_id: id.to_string(),
                admit_time: Timestamp::from_minutes(0),
                discharge_time: Timestamp::from_minutes(2_000),
                race: Race::White,
                died_in_hospital: true,
                discharge_location: DischargeLocation::None,
            })
            .collect();
        let notes = texts
            .iter()
            .enumerate()
            .map(|(i, (id, text))| NoteRecord {
                admission_id: id.to_string(),
                chart_time: Timestamp::from_minutes(i as i64),
                category: "nursing".into(),
                text: text.to_string(),
            })
            .collect();
        EhrDataset::from_parts(adms, vec![], notes, vec![], vec![]).unwrap()
    }

    #[test]
    fn population_normalization() {
        let l = lex(&[("good", 0.7), ("bad", -0.7)]);
        let ds = dataset(&[("a", "good"), ("b", "neutral"), ("c", "bad")]);
        let c = Cohort::new("c", ["a", "b", "c"].map(String::from));
        let s = score_population(&ds, &c, &l).unwrap();
        let z: Vec<f64> = s.iter().map(|s| s.normalized).collect();
        assert!((z[0] - 1.5f64.sqrt()).abs() < 1e-12);
        assert!(z[1].abs() < 1e-15);
        assert!((z[2] + 1.5f64.sqrt()).abs() < 1e-12);

        let same = dataset(&[("a", "good"), ("b", "good")]);
        let c2 = Cohort::new("c", ["a", "b"].map(String::from));
        assert!(matches!(score_population(&same, &c2, &l), Err(Error::ConstantSample(_))));
    }

    #[test]
    fn stay_score_ignores_note_order() {
        let l = lex(&[("good", 0.7), ("bad", -0.2), ("calm", 0.1)]);
        let ds = dataset(&[("a", "good calm"), ("a", "bad"), ("a", "bad good")]);
        let mut notes = ds.notes_for("a").to_vec();
        let forward = score_stay(&notes, &l);
        notes.reverse();
        assert_eq!(score_stay(&notes, &l), forward);
    }
}
