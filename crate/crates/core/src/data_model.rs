//! Domain records for MIMIC-shaped extracts and their CSV ingestion.
//!
//! A dataset directory holds up to five tables. Only `admissions.csv` is
//! required; the others load as empty when absent. Every loaded table is
//! sorted by `(admission_id, time)` with a stable sort, so identical input
//! bytes always produce identical iteration order.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ADMISSIONS_FILE: &str = "admissions.csv";
pub const CHARTEVENTS_FILE: &str = "chartevents.csv";
pub const NOTES_FILE: &str = "notes.csv";
pub const DURATIONS_FILE: &str = "durations.csv";
pub const SEVERITY_FILE: &str = "severity.csv";

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Wall-clock instant at minute resolution, counted from 1970-01-01 00:00.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_minutes(minutes: i64) -> Self {
        Timestamp(minutes)
    }

    pub const fn minutes(self) -> i64 {
        self.0
    }

    /// Parses `YYYY-MM-DD HH:MM:SS`; seconds are truncated.
    pub fn parse(s: &str) -> Option<Self> {
        let dt = NaiveDateTime::parse_from_str(s.trim(), TIMESTAMP_FORMAT).ok()?;
        Some(Timestamp(dt.and_utc().timestamp().div_euclid(60)))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp(self.0 * 60, 0) {
            Some(dt) => write!(f, "{}", dt.naive_utc().format(TIMESTAMP_FORMAT)),
            None => write!(f, "<out of range: {} min>", self.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Race {
    White,
    Black,
    Other,
}

impl Race {
    /// MIMIC ethnicity labels come in many variants ("WHITE - RUSSIAN",
    /// "BLACK/AFRICAN AMERICAN", ...); only the prefix matters.
    pub fn from_label(label: &str) -> Self {
        let upper = label.trim().to_ascii_uppercase();
        if upper.starts_with("WHITE") {
            Race::White
        } else if upper.starts_with("BLACK") {
            Race::Black
        } else {
            Race::Other
        }
    }

    pub fn as_label(self) -> &'static str {
        match self {
            Race::White => "WHITE",
            Race::Black => "BLACK",
            Race::Other => "OTHER",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DischargeLocation {
    Hospice,
    Snf,
    Home,
    Other,
    None,
}

impl DischargeLocation {
    pub fn from_label(label: &str) -> Self {
        let lower = label.trim().to_ascii_lowercase();
        if lower.starts_with("hospice") {
            DischargeLocation::Hospice
        } else if lower == "snf" || lower.contains("skilled nursing") {
            DischargeLocation::Snf
        } else if lower.starts_with("home") {
            DischargeLocation::Home
        } else if lower.is_empty() || lower == "none" || lower == "dead/expired" {
            DischargeLocation::None
        } else {
            DischargeLocation::Other
        }
    }

    pub fn as_label(self) -> &'static str {
        match self {
            DischargeLocation::Hospice => "hospice",
            DischargeLocation::Snf => "snf",
            DischargeLocation::Home => "home",
            DischargeLocation::Other => "other",
            DischargeLocation::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Treatment {
    Ventilation,
    Vasopressor,
}

impl Treatment {
    pub const ALL: [Treatment; 2] = [Treatment::Ventilation, Treatment::Vasopressor];

    pub fn from_label(label: &str) -> Option<Self> {
        match label.trim().to_ascii_lowercase().as_str() {
            "ventilation" | "vent" | "mechanical ventilation" => Some(Treatment::Ventilation),
            "vasopressor" | "vaso" | "vasopressors" => Some(Treatment::Vasopressor),
            _ => None,
        }
    }

    pub fn as_label(self) -> &'static str {
        match self {
            Treatment::Ventilation => "ventilation",
            Treatment::Vasopressor => "vasopressor",
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admission {
    pub admission_id: String,
    pub patient_id: String,
    pub admit_time: Timestamp,
    pub discharge_time: Timestamp,
    pub race: Race,
    pub died_in_hospital: bool,
    pub discharge_location: DischargeLocation,
}

impl Admission {
    pub fn stay_minutes(&self) -> i64 {
        self.discharge_time.minutes() - self.admit_time.minutes()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartEventRecord {
    pub admission_id: String,
    pub item_label: String,
    pub value_label: String,
    pub chart_time: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub admission_id: String,
    pub chart_time: Timestamp,
    pub category: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpanRecord {
    pub admission_id: String,
    pub treatment: Treatment,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeverityRecord {
    pub admission_id: String,
    pub oasis: f64,
    pub sapsii: f64,
}

/// Lowercase, trim, and collapse internal whitespace runs to one space.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Immutable, validated collection of all tables, each sorted by admission id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EhrDataset {
    admissions: Vec<Admission>,
    chart_events: Vec<ChartEventRecord>,
    notes: Vec<NoteRecord>,
    treatment_spans: Vec<TreatmentSpanRecord>,
    severity: Vec<SeverityRecord>,
}

impl EhrDataset {
    /// Builds a dataset from in-memory records, enforcing every record
    /// invariant and referential integrity. The first violation is returned
    /// as an error; use [`load_dataset`] for reject-and-report behavior.
    pub fn from_parts(
        admissions: Vec<Admission>,
        chart_events: Vec<ChartEventRecord>,
        notes: Vec<NoteRecord>,
        treatment_spans: Vec<TreatmentSpanRecord>,
        severity: Vec<SeverityRecord>,
    ) -> Result<Self> {
        let mut ids = HashSet::with_capacity(admissions.len());
        for (i, adm) in admissions.iter().enumerate() {
            check_admission(adm).map_err(|m| row_error(ADMISSIONS_FILE, i, m))?;
            if !ids.insert(adm.admission_id.as_str()) {
                return Err(row_error(
                    ADMISSIONS_FILE,
                    i,
                    format!("duplicate admission_id `{}`", adm.admission_id),
                ));
            }
        }
        fn dangling(file: &str, i: usize, id: &str) -> Error {
            Error::Referential {
                file: file.to_string(),
                row: i as u64 + 2,
                admission_id: id.to_string(),
            }
        }
        let mut chart_events = chart_events;
        for (i, ev) in chart_events.iter_mut().enumerate() {
            if !ids.contains(ev.admission_id.as_str()) {
                return Err(dangling(CHARTEVENTS_FILE, i, &ev.admission_id));
            }
            ev.item_label = normalize_label(&ev.item_label);
            ev.value_label = normalize_label(&ev.value_label);
            check_chart_event(ev).map_err(|m| row_error(CHARTEVENTS_FILE, i, m))?;
        }
        for (i, note) in notes.iter().enumerate() {
            if !ids.contains(note.admission_id.as_str()) {
                return Err(dangling(NOTES_FILE, i, &note.admission_id));
            }
            check_note(note).map_err(|m| row_error(NOTES_FILE, i, m))?;
        }
        for (i, span) in treatment_spans.iter().enumerate() {
            if !ids.contains(span.admission_id.as_str()) {
                return Err(dangling(DURATIONS_FILE, i, &span.admission_id));
            }
            check_span(span).map_err(|m| row_error(DURATIONS_FILE, i, m))?;
        }
        let mut seen_severity = HashSet::new();
        for (i, sev) in severity.iter().enumerate() {
            if !ids.contains(sev.admission_id.as_str()) {
                return Err(dangling(SEVERITY_FILE, i, &sev.admission_id));
            }
            check_severity(sev).map_err(|m| row_error(SEVERITY_FILE, i, m))?;
            if !seen_severity.insert(sev.admission_id.as_str()) {
                return Err(row_error(
                    SEVERITY_FILE,
                    i,
                    format!("duplicate severity row for `{}`", sev.admission_id),
                ));
            }
        }
        drop(ids);
        drop(seen_severity);
        Ok(Self::sorted(
            admissions,
            chart_events,
            notes,
            treatment_spans,
            severity,
        ))
    }

    fn sorted(
        mut admissions: Vec<Admission>,
        mut chart_events: Vec<ChartEventRecord>,
        mut notes: Vec<NoteRecord>,
        mut treatment_spans: Vec<TreatmentSpanRecord>,
        mut severity: Vec<SeverityRecord>,
    ) -> Self {
        admissions.sort_by(|a, b| a.admission_id.cmp(&b.admission_id));
        chart_events.sort_by(|a, b| {
            (&a.admission_id, a.chart_time).cmp(&(&b.admission_id, b.chart_time))
        });
        notes.sort_by(|a, b| (&a.admission_id, a.chart_time).cmp(&(&b.admission_id, b.chart_time)));
        treatment_spans.sort_by(|a, b| {
            (&a.admission_id, a.start_time).cmp(&(&b.admission_id, b.start_time))
        });
        severity.sort_by(|a, b| a.admission_id.cmp(&b.admission_id));
        EhrDataset {
            admissions,
            chart_events,
            notes,
            treatment_spans,
            severity,
        }
    }

    pub fn admissions(&self) -> &[Admission] {
        &self.admissions
    }

    pub fn chart_events(&self) -> &[ChartEventRecord] {
        &self.chart_events
    }

    pub fn notes(&self) -> &[NoteRecord] {
        &self.notes
    }

    pub fn treatment_spans(&self) -> &[TreatmentSpanRecord] {
        &self.treatment_spans
    }

    pub fn severity(&self) -> &[SeverityRecord] {
        &self.severity
    }

    pub fn admission(&self, id: &str) -> Option<&Admission> {
        self.admissions
            .binary_search_by(|a| a.admission_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.admissions[i])
    }

    pub fn chart_events_for(&self, id: &str) -> &[ChartEventRecord] {
        id_range(&self.chart_events, id, |e| &e.admission_id)
    }

    /// Notes of one admission, ordered by chart time.
    pub fn notes_for(&self, id: &str) -> &[NoteRecord] {
        id_range(&self.notes, id, |n| &n.admission_id)
    }

    pub fn spans_for(&self, id: &str) -> &[TreatmentSpanRecord] {
        id_range(&self.treatment_spans, id, |s| &s.admission_id)
    }

    pub fn severity_for(&self, id: &str) -> Option<&SeverityRecord> {
        id_range(&self.severity, id, |s| &s.admission_id).first()
    }
}

fn id_range<'a, T>(records: &'a [T], id: &str, key: impl Fn(&T) -> &String) -> &'a [T] {
    let lo = records.partition_point(|r| key(r).as_str() < id);
    let hi = lo + records[lo..].partition_point(|r| key(r).as_str() == id);
    &records[lo..hi]
}

fn row_error(file: &str, index: usize, message: String) -> Error {
    Error::Row {
        file: file.to_string(),
        // header occupies line 1
        row: index as u64 + 2,
        message,
    }
}

fn check_admission(adm: &Admission) -> std::result::Result<(), String> {
    if adm.admission_id.trim().is_empty() {
        return Err("admission_id is empty".into());
    }
    if adm.discharge_time < adm.admit_time {
        return Err(format!(
            "invariant violated: discharge_time ({}) < admit_time ({})",
            adm.discharge_time, adm.admit_time
        ));
    }
    Ok(())
}

fn check_chart_event(ev: &ChartEventRecord) -> std::result::Result<(), String> {
    if ev.item_label.is_empty() {
        return Err("item_label is empty after normalization".into());
    }
    if ev.value_label.is_empty() {
        return Err("value_label is empty after normalization".into());
    }
    Ok(())
}

fn check_note(note: &NoteRecord) -> std::result::Result<(), String> {
    if note.text.trim().is_empty() {
        return Err("note text is empty".into());
    }
    Ok(())
}

fn check_span(span: &TreatmentSpanRecord) -> std::result::Result<(), String> {
    if span.end_time < span.start_time {
        return Err(format!(
            "invariant violated: end_time ({}) < start_time ({})",
            span.end_time, span.start_time
        ));
    }
    Ok(())
}

fn check_severity(sev: &SeverityRecord) -> std::result::Result<(), String> {
    if !sev.oasis.is_finite() || !sev.sapsii.is_finite() {
        return Err("severity values must be finite".into());
    }
    if sev.oasis < 0.0 || sev.sapsii < 0.0 {
        return Err("severity values must be non-negative".into());
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Escalate the first rejected row to a hard error.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowDiagnostic {
    pub file: String,
    pub row: u64,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.file, self.row, self.message)
    }
}

#[derive(Debug)]
pub struct LoadedDataset {
    pub dataset: EhrDataset,
    /// Rows rejected in lenient mode, in file then line order.
    pub diagnostics: Vec<RowDiagnostic>,
}

struct Table {
    file: &'static str,
    columns: Vec<usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn field<'r>(&self, rec: &'r csv::StringRecord, col: usize) -> &'r str {
        rec.get(self.columns[col]).unwrap_or("")
    }
}

struct Rejects<'a> {
    strict: bool,
    diagnostics: &'a mut Vec<RowDiagnostic>,
}

impl Rejects<'_> {
    fn row(&mut self, file: &str, row: u64, message: String) -> Result<()> {
        if self.strict {
            return Err(Error::Row {
                file: file.to_string(),
                row,
                message,
            });
        }
        self.diagnostics.push(RowDiagnostic {
            file: file.to_string(),
            row,
            message,
        });
        Ok(())
    }

    fn dangling(&mut self, file: &str, row: u64, id: &str) -> Result<()> {
        if self.strict {
            return Err(Error::Referential {
                file: file.to_string(),
                row,
                admission_id: id.to_string(),
            });
        }
        self.diagnostics.push(RowDiagnostic {
            file: file.to_string(),
            row,
            message: format!("admission_id `{id}` not present in admissions.csv"),
        });
        Ok(())
    }
}

fn read_table(
    dir: &Path,
    file: &'static str,
    required: &[&str],
    rejects: &mut Rejects<'_>,
) -> Result<Option<Table>> {
    let path = dir.join(file);
    if !path.exists() {
        return Ok(None);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(&path)
        .map_err(|e| Error::csv(&path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(&path, e))?.clone();
    let mut columns = Vec::with_capacity(required.len());
    for col in required {
        match headers.iter().position(|h| h.trim() == *col) {
            Some(i) => columns.push(i),
            None => {
                return Err(Error::Schema {
                    file: file.to_string(),
                    column: col.to_string(),
                })
            }
        }
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        match rec {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                rows.push((line, rec));
            }
            Err(e) if e.is_io_error() => return Err(Error::csv(&path, e)),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                rejects.row(file, line, e.to_string())?;
            }
        }
    }
    Ok(Some(Table {
        file,
        columns,
        rows,
    }))
}

fn parse_time(raw: &str, column: &str) -> std::result::Result<Timestamp, String> {
    Timestamp::parse(raw)
        .ok_or_else(|| format!("unparseable timestamp in `{column}`: {raw:?} (expected YYYY-MM-DD HH:MM:SS)"))
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" | "y" => Ok(true),
        "0" | "false" | "f" | "no" | "n" => Ok(false),
        other => Err(format!("unparseable boolean in `died_in_hospital`: {other:?}")),
    }
}

fn parse_real(raw: &str, column: &str) -> std::result::Result<f64, String> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| format!("unparseable number in `{column}`: {raw:?}"))
}

/// Loads and validates a dataset directory.
///
/// Rows that fail a record invariant, fail to parse, or reference an unknown
/// admission are rejected and reported in [`LoadedDataset::diagnostics`]; with
/// [`LoadOptions::strict`] the first such row aborts the load instead. A
/// missing required column is always a hard [`Error::Schema`].
pub fn load_dataset(dir: impl AsRef<Path>, opts: LoadOptions) -> Result<LoadedDataset> {
    let dir = dir.as_ref();
    let mut diagnostics = Vec::new();
    let mut rejects = Rejects {
        strict: opts.strict,
        diagnostics: &mut diagnostics,
    };

    let adm_table = read_table(
        dir,
        ADMISSIONS_FILE,
        &[
            "admission_id",
            "patient_id",
            "admit_time",
            "discharge_time",
            "race",
            "died_in_hospital",
            "discharge_location",
        ],
        &mut rejects,
    )?
    .ok_or_else(|| {
        Error::io(
            dir.join(ADMISSIONS_FILE),
            std::io::Error::new(std::io::ErrorKind::NotFound, "required table is missing"),
        )
    })?;

    let mut admissions = Vec::with_capacity(adm_table.rows.len());
    let mut ids: HashSet<String> = HashSet::with_capacity(adm_table.rows.len());
    for (line, rec) in &adm_table.rows {
        let f = |c| adm_table.field(rec, c);
        let parsed = (|| -> std::result::Result<Admission, String> {
            let adm = Admission {
                admission_id: f(0).trim().to_string(),
                patient_id: f(1).trim().to_string(),
                admit_time: parse_time(f(2), "admit_time")?,
                discharge_time: parse_time(f(3), "discharge_time")?,
                race: Race::from_label(f(4)),
                died_in_hospital: parse_bool(f(5))?,
                discharge_location: DischargeLocation::from_label(f(6)),
            };
            check_admission(&adm)?;
            Ok(adm)
        })();
        match parsed {
            Ok(adm) if ids.contains(&adm.admission_id) => {
                rejects.row(
                    adm_table.file,
                    *line,
                    format!("duplicate admission_id `{}`", adm.admission_id),
                )?;
            }
            Ok(adm) => {
                ids.insert(adm.admission_id.clone());
                admissions.push(adm);
            }
            Err(msg) => rejects.row(adm_table.file, *line, msg)?,
        }
    }

    let mut chart_events = Vec::new();
    if let Some(t) = read_table(
        dir,
        CHARTEVENTS_FILE,
        &["admission_id", "item_label", "value_label", "chart_time"],
        &mut rejects,
    )? {
        for (line, rec) in &t.rows {
            let id = t.field(rec, 0).trim();
            if !ids.contains(id) {
                rejects.dangling(t.file, *line, id)?;
                continue;
            }
            let parsed = (|| -> std::result::Result<ChartEventRecord, String> {
                let ev = ChartEventRecord {
                    admission_id: id.to_string(),
                    item_label: normalize_label(t.field(rec, 1)),
                    value_label: normalize_label(t.field(rec, 2)),
                    chart_time: parse_time(t.field(rec, 3), "chart_time")?,
                };
                check_chart_event(&ev)?;
                Ok(ev)
            })();
            match parsed {
                Ok(ev) => chart_events.push(ev),
                Err(msg) => rejects.row(t.file, *line, msg)?,
            }
        }
    }

    let mut notes = Vec::new();
    if let Some(t) = read_table(
        dir,
        NOTES_FILE,
        &["admission_id", "chart_time", "category", "text"],
        &mut rejects,
    )? {
        for (line, rec) in &t.rows {
            let id = t.field(rec, 0).trim();
            if !ids.contains(id) {
                rejects.dangling(t.file, *line, id)?;
                continue;
            }
            let parsed = (|| -> std::result::Result<NoteRecord, String> {
                let note = NoteRecord {
                    admission_id: id.to_string(),
                    chart_time: parse_time(t.field(rec, 1), "chart_time")?,
                    category: t.field(rec, 2).trim().to_string(),
                    text: t.field(rec, 3).to_string(),
                };
                check_note(&note)?;
                Ok(note)
            })();
            match parsed {
                Ok(n) => notes.push(n),
                Err(msg) => rejects.row(t.file, *line, msg)?,
            }
        }
    }

    let mut treatment_spans = Vec::new();
    if let Some(t) = read_table(
        dir,
        DURATIONS_FILE,
        &["admission_id", "treatment", "start_time", "end_time"],
        &mut rejects,
    )? {
        for (line, rec) in &t.rows {
            let id = t.field(rec, 0).trim();
            if !ids.contains(id) {
                rejects.dangling(t.file, *line, id)?;
                continue;
            }
            let parsed = (|| -> std::result::Result<TreatmentSpanRecord, String> {
                let raw = t.field(rec, 1);
                let span = TreatmentSpanRecord {
                    admission_id: id.to_string(),
                    treatment: Treatment::from_label(raw)
                        .ok_or_else(|| format!("unknown treatment {raw:?}"))?,
                    start_time: parse_time(t.field(rec, 2), "start_time")?,
                    end_time: parse_time(t.field(rec, 3), "end_time")?,
                };
                check_span(&span)?;
                Ok(span)
            })();
            match parsed {
                Ok(s) => treatment_spans.push(s),
                Err(msg) => rejects.row(t.file, *line, msg)?,
            }
        }
    }

    let mut severity = Vec::new();
    if let Some(t) = read_table(
        dir,
        SEVERITY_FILE,
        &["admission_id", "oasis", "sapsii"],
        &mut rejects,
    )? {
        let mut seen = HashSet::new();
        for (line, rec) in &t.rows {
            let id = t.field(rec, 0).trim();
            if !ids.contains(id) {
                rejects.dangling(t.file, *line, id)?;
                continue;
            }
            let parsed = (|| -> std::result::Result<SeverityRecord, String> {
                let sev = SeverityRecord {
                    admission_id: id.to_string(),
                    oasis: parse_real(t.field(rec, 1), "oasis")?,
                    sapsii: parse_real(t.field(rec, 2), "sapsii")?,
                };
                check_severity(&sev)?;
                Ok(sev)
            })();
            match parsed {
                Ok(s) if !seen.insert(s.admission_id.clone()) => {
                    rejects.row(t.file, *line, format!("duplicate severity row for `{id}`"))?
                }
                Ok(s) => severity.push(s),
                Err(msg) => rejects.row(t.file, *line, msg)?,
            }
        }
    }

    let dataset = EhrDataset::sorted(admissions, chart_events, notes, treatment_spans, severity);
    Ok(LoadedDataset {
        dataset,
        diagnostics,
    })
}

/// Writes all five tables (headers included even when empty) into `dir`.
pub fn write_dataset(ds: &EhrDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    write_csv(dir, ADMISSIONS_FILE, |w| {
        w.write_record([
            "admission_id",
            "patient_id",
            "admit_time",
            "discharge_time",
            "race",
            "died_in_hospital",
            "discharge_location",
        ])?;
        for a in &ds.admissions {
            w.write_record([
                a.admission_id.as_str(),
                a.patient_id.as_str(),
                &a.admit_time.to_string(),
                &a.discharge_time.to_string(),
                a.race.as_label(),
                if a.died_in_hospital { "1" } else { "0" },
                a.discharge_location.as_label(),
            ])?;
        }
        Ok(())
    })?;
    write_csv(dir, CHARTEVENTS_FILE, |w| {
        w.write_record(["admission_id", "item_label", "value_label", "chart_time"])?;
        for e in &ds.chart_events {
            w.write_record([
                e.admission_id.as_str(),
                e.item_label.as_str(),
                e.value_label.as_str(),
                &e.chart_time.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_csv(dir, NOTES_FILE, |w| {
        w.write_record(["admission_id", "chart_time", "category", "text"])?;
        for n in &ds.notes {
            w.write_record([
                n.admission_id.as_str(),
                &n.chart_time.to_string(),
                n.category.as_str(),
                n.text.as_str(),
            ])?;
        }
        Ok(())
    })?;
    write_csv(dir, DURATIONS_FILE, |w| {
        w.write_record(["admission_id", "treatment", "start_time", "end_time"])?;
        for s in &ds.treatment_spans {
            w.write_record([
                s.admission_id.as_str(),
                s.treatment.as_label(),
                &s.start_time.to_string(),
                &s.end_time.to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_csv(dir, SEVERITY_FILE, |w| {
        w.write_record(["admission_id", "oasis", "sapsii"])?;
        for s in &ds.severity {
            w.write_record([
                s.admission_id.as_str(),
                &s.oasis.to_string(),
                &s.sapsii.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub(crate) fn write_csv(
    dir: &Path,
    file: &str,
    body: impl FnOnce(&mut csv::Writer<fs::File>) -> csv::Result<()>,
) -> Result<()> {
    let path = dir.join(file);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    body(&mut w).map_err(|e| Error::csv(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub admissions: usize,
    pub chart_events: usize,
    pub notes: usize,
    pub treatment_spans: usize,
    pub severity: usize,
    pub white: usize,
    pub black: usize,
    pub other: usize,
}

pub fn dataset_summary(ds: &EhrDataset) -> SummaryReport {
    let count = |race| ds.admissions.iter().filter(|a| a.race == race).count();
    SummaryReport {
        admissions: ds.admissions.len(),
        chart_events: ds.chart_events.len(),
        notes: ds.notes.len(),
        treatment_spans: ds.treatment_spans.len(),
        severity: ds.severity.len(),
        white: count(Race::White),
        black: count(Race::Black),
        other: count(Race::Other),
    }
}
