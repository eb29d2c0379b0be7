//! Proxy training label: does any note of the admission document noncompliance?

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use regex::Regex;

use crate::cohort::Cohort;
use crate::data_model::{write_csv, EhrDataset};
use crate::error::{Error, Result};

pub const NARROW_TERMS: [&str; 1] = ["noncompliant"];
pub const DEFAULT_TERMS: [&str; 3] = ["noncompliant", "non-compliant", "noncompliance"];

/// Case-insensitive whole-token matcher. Letters, digits and hyphens all count
/// as token characters, so "compliant" never matches inside "non-compliant".
#[derive(Clone, Debug)]
pub struct NoncompliancePatterns {
    terms: Vec<String>,
    regex: Regex,
}

impl NoncompliancePatterns {
    pub fn new<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut terms: Vec<String> = terms
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if terms.is_empty() {
            return Err(Error::InvalidArgument("noncompliance pattern list is empty".into()));
        }
        terms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        terms.dedup();
        let alternation = terms
            .iter()
            .map(|t| regex::escape(t))
            .collect::<Vec<_>>()
            .join("|");
        let regex = Regex::new(&format!("(?i)(?:{alternation})"))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(NoncompliancePatterns { terms, regex })
    }

    pub fn default_terms() -> Self {
        Self::new(DEFAULT_TERMS).expect("built-in terms are valid")
    }

    pub fn narrow() -> Self {
        Self::new(NARROW_TERMS).expect("built-in terms are valid")
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn matches(&self, text: &str) -> bool {
        let is_token = |c: char| c.is_alphanumeric() || c == '-';
        self.regex.find_iter(text).any(|m| {
            let before = text[..m.start()].chars().next_back();
            let after = text[m.end()..].chars().next();
            !before.is_some_and(is_token) && !after.is_some_and(is_token)
        })
    }
}

pub type LabelVector = BTreeMap<String, bool>;

/// No negation handling: "denies noncompliance" is a positive.
pub fn label_noncompliance(
    ds: &EhrDataset,
    cohort: &Cohort,
    patterns: &NoncompliancePatterns,
) -> LabelVector {
    cohort
        .ids()
        .iter()
        .map(|id| {
            let hit = ds.notes_for(id).iter().any(|n| patterns.matches(&n.text));
            (id.clone(), hit)
        })
        .collect()
}

pub fn write_labels_csv(path: impl AsRef<Path>, labels: &LabelVector) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().unwrap_or(Path::new("."));
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("labels.csv");
    write_csv(dir, file, |w| {
        w.write_record(["admission_id", "label"])?;
        for (id, &label) in labels {
            w.write_record([id.as_str(), if label { "1" } else { "0" }])?;
        }
        Ok(())
    })
}
