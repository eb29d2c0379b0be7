//! End-of-life cohort and notes-population construction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data_model::{write_csv, DischargeLocation, EhrDataset, Race};
use crate::error::{Error, Result};

pub const EOL_MIN_STAY_MINUTES: i64 = 6 * 60;
pub const NOTES_MIN_STAY_MINUTES: i64 = 12 * 60;

/// Named, sorted, duplicate-free set of admission ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort {
    name: String,
    admission_ids: Vec<String>,
}

impl Cohort {
    pub fn new(name: impl Into<String>, ids: impl IntoIterator<Item = String>) -> Self {
        let mut admission_ids: Vec<String> = ids.into_iter().collect();
        admission_ids.sort();
        admission_ids.dedup();
        Cohort {
            name: name.into(),
            admission_ids,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ids(&self) -> &[String] {
        &self.admission_ids
    }

    pub fn len(&self) -> usize {
        self.admission_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.admission_ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.admission_ids
            .binary_search_by(|x| x.as_str().cmp(id))
            .is_ok()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path
            .file_name()
            .and_then(|f| f.to_str())
            .ok_or_else(|| Error::InvalidArgument(format!("bad cohort path {}", path.display())))?;
        write_csv(dir, file, |w| {
            w.write_record(["admission_id"])?;
            for id in &self.admission_ids {
                w.write_record([id])?;
            }
            Ok(())
        })
    }

    pub fn read_csv(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = reader.headers().map_err(|e| Error::csv(path, e))?;
        if headers.get(0).map(str::trim) != Some("admission_id") {
            return Err(Error::Schema {
                file: path.display().to_string(),
                column: "admission_id".into(),
            });
        }
        let mut ids = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            ids.push(rec.get(0).unwrap_or("").trim().to_string());
        }
        Ok(Cohort::new(name, ids))
    }
}

/// Thresholds for cohort selection. Stay comparisons are inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortRules {
    pub eol_min_stay_minutes: i64,
    pub notes_min_stay_minutes: i64,
    /// Count skilled-nursing discharges as end-of-life; off gives the strict cohort.
    pub include_snf: bool,
}

impl Default for CohortRules {
    fn default() -> Self {
        CohortRules {
            eol_min_stay_minutes: EOL_MIN_STAY_MINUTES,
            notes_min_stay_minutes: NOTES_MIN_STAY_MINUTES,
            include_snf: true,
        }
    }
}

pub fn build_eol_cohort(ds: &EhrDataset) -> Cohort {
    build_eol_cohort_with(ds, &CohortRules::default())
}

/// Black and white admissions lasting at least the minimum stay that ended in
/// death, hospice, or (optionally) skilled-nursing discharge.
///
/// Stay length is the admission interval; the table schema has no separate
/// ICU-stay intervals.
pub fn build_eol_cohort_with(ds: &EhrDataset, rules: &CohortRules) -> Cohort {
    let ids = ds
        .admissions()
        .iter()
        .filter(|a| a.stay_minutes() >= rules.eol_min_stay_minutes)
        .filter(|a| matches!(a.race, Race::White | Race::Black))
        .filter(|a| {
            a.died_in_hospital
                || a.discharge_location == DischargeLocation::Hospice
                || (rules.include_snf && a.discharge_location == DischargeLocation::Snf)
        })
        .map(|a| a.admission_id.clone());
    Cohort::new("eol", ids)
}

pub fn build_notes_population(ds: &EhrDataset) -> Cohort {
    build_notes_population_with(ds, &CohortRules::default())
}

/// Admissions with a long enough stay and at least one note.
pub fn build_notes_population_with(ds: &EhrDataset, rules: &CohortRules) -> Cohort {
    let ids = ds
        .admissions()
        .iter()
        .filter(|a| a.stay_minutes() >= rules.notes_min_stay_minutes)
        .filter(|a| !ds.notes_for(&a.admission_id).is_empty())
        .map(|a| a.admission_id.clone());
    Cohort::new("notes", ids)
}

/// Partitions a black/white cohort into `(white, black)`.
pub fn split_by_race(cohort: &Cohort, ds: &EhrDataset) -> Result<(Cohort, Cohort)> {
    let mut white = Vec::new();
    let mut black = Vec::new();
    for id in cohort.ids() {
        match ds.admission(id).map(|a| a.race) {
            Some(Race::White) => white.push(id.clone()),
            Some(Race::Black) => black.push(id.clone()),
            _ => {
                return Err(Error::RaceOutsideCohort {
                    cohort: cohort.name().to_string(),
                    admission_id: id.clone(),
                })
            }
        }
    }
    let name = cohort.name();
    Ok((
        Cohort::new(format!("{name}/white"), white),
        Cohort::new(format!("{name}/black"), black),
    ))
}
