//! Treatment-span merging and per-admission treatment durations.
//!
//! Duration tables record one treatment as several back-to-back spans when it
//! is re-charted at shift change. Spans whose gap is at most
//! [`MERGE_GAP_MINUTES`] are merged and the merged interval counts as
//! continuous treatment.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::Cohort;
use crate::data_model::{write_csv, EhrDataset, Treatment};
use crate::error::{Error, Result};

/// Roughly one nursing shift.
pub const MERGE_GAP_MINUTES: i64 = 600;

/// Closed interval in minutes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: i64,
    pub end: i64,
}

impl Span {
    pub const fn new(start: i64, end: i64) -> Self {
        Span { start, end }
    }

    pub const fn len(self) -> i64 {
        self.end - self.start
    }

    pub const fn is_empty(self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationOptions {
    pub max_gap_minutes: i64,
    /// When false, absorbed gaps are not counted: the duration becomes the
    /// length of the union of the raw spans.
    pub count_gaps: bool,
}

impl Default for DurationOptions {
    fn default() -> Self {
        DurationOptions {
            max_gap_minutes: MERGE_GAP_MINUTES,
            count_gaps: true,
        }
    }
}

/// Merges spans whose gap `next.start - prev.end` is at most `max_gap`.
///
/// Output is sorted, and consecutive spans are separated by more than
/// `max_gap`. Input order does not matter and overlaps are allowed.
pub fn merge_spans(spans: &[Span], max_gap: i64) -> Result<Vec<Span>> {
    if let Some(bad) = spans.iter().find(|s| s.end < s.start) {
        return Err(Error::InvalidArgument(format!(
            "span has negative length: [{}, {}]",
            bad.start, bad.end
        )));
    }
    let mut sorted = spans.to_vec();
    sorted.sort_unstable();
    let mut merged: Vec<Span> = Vec::with_capacity(sorted.len());
    for s in sorted {
        match merged.last_mut() {
            Some(last) if s.start - last.end <= max_gap => last.end = last.end.max(s.end),
            _ => merged.push(s),
        }
    }
    Ok(merged)
}

pub fn total_duration(merged: &[Span]) -> i64 {
    merged.iter().map(|s| s.len()).sum()
}

pub fn admission_duration(spans: &[Span], opts: &DurationOptions) -> Result<i64> {
    let gap = if opts.count_gaps {
        opts.max_gap_minutes
    } else {
        0
    };
    Ok(total_duration(&merge_spans(spans, gap)?))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreatmentDuration {
    pub admission_id: String,
    pub treatment: Treatment,
    pub total_minutes: i64,
}

/// Total minutes of `treatment` per cohort admission; admissions with no span
/// of that treatment are omitted.
pub fn durations_for_cohort(
    ds: &EhrDataset,
    cohort: &Cohort,
    treatment: Treatment,
    opts: &DurationOptions,
) -> Result<BTreeMap<String, i64>> {
    let mut out = BTreeMap::new();
    for id in cohort.ids() {
        let spans: Vec<Span> = ds
            .spans_for(id)
            .iter()
            .filter(|s| s.treatment == treatment)
            .map(|s| Span::new(s.start_time.minutes(), s.end_time.minutes()))
            .collect();
        if spans.is_empty() {
            continue;
        }
        out.insert(id.clone(), admission_duration(&spans, opts)?);
    }
    Ok(out)
}

pub fn write_durations_csv(path: impl AsRef<Path>, rows: &[TreatmentDuration]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("durations.csv");
    write_csv(dir, file, |w| {
        w.write_record(["admission_id", "treatment", "total_minutes"])?;
        for r in rows {
            w.write_record([
                r.admission_id.as_str(),
                r.treatment.as_label(),
                &r.total_minutes.to_string(),
            ])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Admission, DischargeLocation, Race, Timestamp, TreatmentSpanRecord};

    fn spans(raw: &[(i64, i64)]) -> Vec<Span> {
        raw.iter().map(|&(s, e)| Span::new(s, e)).collect()
    }

    #[test]
    fn hand_traced_merges() {
        assert_eq!(
            merge_spans(&spans(&[(0, 100), (500, 600)]), 600).unwrap(),
            spans(&[(0, 600)])
        );
        assert_eq!(merge_spans(&spans(&[(0, 120)]), 600).unwrap(), spans(&[(0, 120)]));
        assert_eq!(
            merge_spans(&spans(&[(0, 60), (700, 760)]), 600).unwrap(),
            spans(&[(0, 60), (700, 760)])
        );
    }

    #[test]
    fn totals() {
        assert_eq!(total_duration(&[]), 0);
        assert_eq!(total_duration(&spans(&[(0, 600)])), 600);
        assert_eq!(total_duration(&spans(&[(0, 60), (700, 760)])), 120);
    }

    #[test]
    fn gap_boundary() {
        assert_eq!(merge_spans(&spans(&[(0, 10), (610, 620)]), 600).unwrap().len(), 1);
        assert_eq!(merge_spans(&spans(&[(0, 10), (611, 620)]), 600).unwrap().len(), 2);
    }

    #[test]
    fn overlapping_and_nested_inputs() {
        assert_eq!(
            merge_spans(&spans(&[(50, 80), (0, 100), (90, 200)]), 0).unwrap(),
            spans(&[(0, 200)])
        );
    }

    #[test]
    fn negative_length_rejected() {
        assert!(merge_spans(&spans(&[(10, 5)]), 600).is_err());
    }

    #[test]
    fn gap_exclusion_mode() {
        let raw = spans(&[(0, 100), (500, 600)]);
        let with_gaps = admission_duration(&raw, &DurationOptions::default()).unwrap();
        let without = admission_duration(
            &raw,
            &DurationOptions {
                count_gaps: false,
                ..DurationOptions::default()
            },
        )
        .unwrap();
        assert_eq!((with_gaps, without), (600, 200));
    }

    #[test]
    fn cohort_durations_skip_untreated() {
        let adm = |id: &str| Admission {
            admission_id: id.into(),
            patient_id: id.into(),
            admit_time: Timestamp::from_minutes(0),
            discharge_time: Timestamp::from_minutes(5_000),
            race: Race::White,
            died_in_hospital: true,
            discharge_location: DischargeLocation::None,
        };
        let span = |id: &str, t, s, e| TreatmentSpanRecord {
            admission_id: id.into(),
            treatment: t,
            start_time: Timestamp::from_minutes(s),
            end_time: Timestamp::from_minutes(e),
        };
        let ds = EhrDataset::from_parts(
            vec![adm("a"), adm("b")],
            vec![],
            vec![],
            vec![
                span("a", Treatment::Ventilation, 0, 100),
                span("a", Treatment::Ventilation, 500, 600),
                span("b", Treatment::Vasopressor, 0, 50),
            ],
            vec![],
        )
        .unwrap();
        let c = Cohort::new("c", ["a".to_string(), "b".to_string()]);
        let vent =
            durations_for_cohort(&ds, &c, Treatment::Ventilation, &DurationOptions::default())
                .unwrap();
        assert_eq!(vent.len(), 1);
        assert_eq!(vent["a"], 600);
    }
}
