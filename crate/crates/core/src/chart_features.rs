//! Binary interpersonal indicators from coded chart events.
//!
//! Each observed `(item, value)` pair becomes one column named
//! `"item: value"`. A cell is 1 when the admission charted that pair at least
//! once; counts and timing are discarded.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::data_model::{normalize_label, write_csv, EhrDataset};
use crate::error::{Error, Result};

const DEFAULT_WHITELIST: &str = include_str!("../data/interpersonal_items.txt");

pub fn feature_name(item_label: &str, value_label: &str) -> String {
    format!("{item_label}: {value_label}")
}

/// Set of item labels admitted into the vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Whitelist(BTreeSet<String>);

impl Whitelist {
    /// Parses one label per line, skipping blanks and `#` comments.
    pub fn parse(text: &str) -> Self {
        Whitelist(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(normalize_label)
                .collect(),
        )
    }

    /// Interpersonal item categories shipped with the crate: code status,
    /// family meetings, education, restraints, pain, health-care proxy,
    /// support systems, agitation scales, mental status and bathing.
    pub fn interpersonal() -> Self {
        Self::parse(DEFAULT_WHITELIST)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, item_label: &str) -> bool {
        self.0.contains(item_label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureVocabulary {
    names: Vec<String>,
}

impl FeatureVocabulary {
    /// Sorts and deduplicates.
    pub fn new(names: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = names.into_iter().collect();
        FeatureVocabulary {
            names: set.into_iter().collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut body = self.names.join("\n");
        if !body.is_empty() {
            body.push('\n');
        }
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }

    pub fn read_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(
            text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string),
        ))
    }
}

pub fn build_vocabulary(ds: &EhrDataset, whitelist: Option<&Whitelist>) -> FeatureVocabulary {
    FeatureVocabulary::new(
        ds.chart_events()
            .iter()
            .filter(|e| whitelist.is_none_or(|w| w.contains(&e.item_label)))
            .map(|e| feature_name(&e.item_label, &e.value_label)),
    )
}

/// Sparse binary matrix: each row holds the sorted column indices set to 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    row_ids: Vec<String>,
    vocabulary: FeatureVocabulary,
    rows: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    /// Builds from explicit active-column lists; indices are sorted and
    /// deduplicated and must be below the vocabulary size.
    pub fn from_rows(
        row_ids: Vec<String>,
        vocabulary: FeatureVocabulary,
        mut rows: Vec<Vec<u32>>,
    ) -> Result<Self> {
        if row_ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: row_ids.len(),
                found: rows.len(),
            });
        }
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= vocabulary.len() {
                    return Err(Error::DimensionMismatch {
                        expected: vocabulary.len(),
                        found: last as usize + 1,
                    });
                }
            }
        }
        Ok(FeatureMatrix {
            row_ids,
            vocabulary,
            rows,
        })
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn vocabulary(&self) -> &FeatureVocabulary {
        &self.vocabulary
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_cols()];
        for &j in &self.rows[i] {
            out[j as usize] = 1.0;
        }
        out
    }

    /// Triplet form `admission_id,feature_name,value` listing only the ones.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("features.csv");
        write_csv(dir, file, |w| {
            w.write_record(["admission_id", "feature_name", "value"])?;
            for (id, row) in self.row_ids.iter().zip(&self.rows) {
                for &j in row {
                    w.write_record([id.as_str(), &self.vocabulary.names[j as usize], "1"])?;
                }
            }
            Ok(())
        })
    }
}

/// One row per cohort admission, in cohort order. Events whose feature is not
/// in `vocab` are ignored.
pub fn encode(ds: &EhrDataset, cohort: &Cohort, vocab: &FeatureVocabulary) -> FeatureMatrix {
    let mut cache: HashMap<(&str, &str), Option<u32>> = HashMap::new();
    let rows = cohort
        .ids()
        .iter()
        .map(|id| {
            let mut row: Vec<u32> = ds
                .chart_events_for(id)
                .iter()
                .filter_map(|e| {
                    *cache
                        .entry((e.item_label.as_str(), e.value_label.as_str()))
                        .or_insert_with(|| {
                            vocab
                                .index_of(&feature_name(&e.item_label, &e.value_label))
                                .map(|j| j as u32)
                        })
                })
                .collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    FeatureMatrix {
        row_ids: cohort.ids().to_vec(),
        vocabulary: vocab.clone(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Admission, ChartEventRecord, DischargeLocation, Race, Timestamp};

    fn dataset(ids: &[&str], events: &[(&str, &str, &str, i64)]) -> EhrDataset {
        let adms = ids
            .iter()
            .map(|id| Admission {
                admission_id: id.to_string(),
                patient_id: id.to_string(),
                admit_time: Timestamp::from_minutes(0),
                discharge_time: Timestamp::from_minutes(1_000),
                race: Race::White,
                died_in_hospital: true,
                discharge_location: DischargeLocation::None,
            })
            .collect();
        let evs = events
            .iter()
            .map(|&(id, item, value, t)| ChartEventRecord {
                admission_id: id.into(),
                item_label: item.into(),
                value_label: value.into(),
                chart_time: Timestamp::from_minutes(t),
            })
            .collect();
        EhrDataset::from_parts(adms, evs, vec![], vec![], vec![]).unwrap()
    }

    #[test]
    fn vocabulary_deduplicates() {
        let ds = dataset(&["a", "b"], &[("a", "pain", "none", 1), ("b", "Pain", "None ", 2)]);
        assert_eq!(build_vocabulary(&ds, None).names(), ["pain: none"]);
    }

    #[test]
    fn vocabulary_is_cross_product_of_observed_pairs() {
        let ds = dataset(
            &["a"],
            &[
                ("a", "pain", "none", 1),
                ("a", "pain", "mild", 1),
                ("a", "state", "alert", 1),
                ("a", "state", "lethargic", 1),
            ],
        );
        assert_eq!(
            build_vocabulary(&ds, None).names(),
            ["pain: mild", "pain: none", "state: alert", "state: lethargic"]
        );
    }

    #[test]
    fn whitelist_restricts_items() {
        let ds = dataset(
            &["a"],
            &[("a", "riker-sas scale", "agitated", 1), ("a", "heart rhythm", "sinus", 1)],
        );
        let v = build_vocabulary(&ds, Some(&Whitelist::interpersonal()));
        assert_eq!(v.names(), ["riker-sas scale: agitated"]);
        assert!(build_vocabulary(&EhrDataset::default(), None).is_empty());
    }

    #[test]
    fn encode_is_presence_indicator() {
        let ds = dataset(
            &["a", "b", "c"],
            &[
                ("a", "state", "alert", 3),
                ("a", "state", "alert", 1),
                ("a", "state", "alert", 2),
                ("c", "riker-sas scale", "agitated", 5),
            ],
        );
        let vocab = build_vocabulary(&ds, None);
        let cohort = Cohort::new("all", ["a", "b", "c"].map(String::from));
        let x = encode(&ds, &cohort, &vocab);
        assert_eq!((x.n_rows(), x.n_cols()), (3, 2));
        let alert = vocab.index_of("state: alert").unwrap();
        let agitated = vocab.index_of("riker-sas scale: agitated").unwrap();
        assert_eq!(x.row(0), [alert as u32]);
        assert!(x.row(1).is_empty());
        assert!(x.get(2, agitated));
        assert_eq!(x.dense_row(1), vec![0.0, 0.0]);
    }

    #[test]
    fn default_whitelist_covers_weight_table_items() {
        let w = Whitelist::interpersonal();
        for item in ["state", "riker-sas scale", "pain", "richmond-ras scale", "education readiness", "pain level"] {
            assert!(w.contains(item), "{item}");
        }
    }
}
