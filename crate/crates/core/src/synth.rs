//! Seeded generator of MIMIC-shaped datasets with a known latent mistrust.
//!
//! Every admission draws a latent value `L ~ N(0, 1)`, shifted for black
//! patients. Chart features, the noncompliance note, note sentiment and
//! treatment durations are sampled conditionally on `L`; severity scores are
//! independent of `L` unless `severity_latent_slope` is set.
//!
//! Each admission uses its own ChaCha stream (stream index = admission
//! index), so output does not depend on generation order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data_model::{
    Admission, ChartEventRecord, DischargeLocation, EhrDataset, NoteRecord, Race, SeverityRecord,
    Timestamp, Treatment, TreatmentSpanRecord,
};
use crate::error::{Error, Result};
use crate::noncompliance::NoncompliancePatterns;
use crate::sentiment::SentimentLexicon;
use crate::sparse_logreg::sigmoid;
use crate::treatments::MERGE_GAP_MINUTES;

/// 2150-01-01 00:00, in the style of MIMIC's shifted dates.
const BASE_MINUTES: i64 = 65_744 * MINUTES_PER_DAY;

const MINUTES_PER_DAY: i64 = 1_440;

/// Whitelisted (item, value) pairs used for latent-linked features.
const FEATURE_POOL: &[(&str, &str)] = &[
    ("riker-sas scale", "agitated"),
    ("state", "alert"),
    ("family meeting", "held with family"),
    ("education readiness", "no"),
    ("pain level", "7-mod to severe"),
    ("restraint device", "soft limb"),
    ("support systems", "family"),
    ("code status", "full code"),
    ("richmond-ras scale", "+2 agitated"),
    ("behavior", "uncooperative"),
    ("education learner", "patient"),
    ("informed", "yes"),
    ("reason for restraint", "pulling at lines"),
    ("spiritual support", "chaplain"),
    ("pain present", "yes"),
    ("orientation", "oriented x 3"),
    ("health care proxy", "yes"),
    ("riker-sas scale", "calm/cooperative"),
    ("family communication", "updated by rn"),
    ("education barrier", "language"),
    ("understand & agree w/ plan", "no"),
    ("social work consult", "yes"),
    ("mental status", "confused"),
    ("bath", "refused"),
    ("richmond-ras scale", "0 alert and calm"),
    ("pain management", "iv prn"),
    ("restraint type", "bilateral wrist"),
    ("education response", "verbalized understanding"),
    ("consults", "psychiatry"),
    ("education method", "verbal"),
    ("state", "sleeping"),
    ("code status", "dnr/dni"),
    ("behavior", "cooperative"),
    ("pain level response", "decreased"),
    ("education topic", "medications"),
    ("restraint location", "right wrist"),
    ("pain assess method", "verbal"),
    ("support systems", "friend"),
    ("family meeting", "declined"),
    ("orientation", "disoriented"),
    ("mental status", "alert"),
    ("bath", "partial"),
    ("informed", "no"),
    ("pain", "none"),
    ("understand & agree w/ plan", "yes"),
    ("spiritual support", "declined"),
    ("health care proxy", "no"),
    ("education readiness", "yes"),
];

/// Items outside the interpersonal whitelist, emitted as noise.
const NOISE_POOL: &[(&str, &str)] = &[
    ("heart rhythm", "sinus rhythm"),
    ("heart rhythm", "atrial fib"),
    ("o2 delivery device", "nasal cannula"),
    ("skin integrity", "intact"),
    ("gcs - eye opening", "to speech"),
    ("temperature site", "oral"),
];

const FILLER: &[&str] = &[
    "Pt seen on rounds.",
    "VS as charted.",
    "Lines flushed and patent.",
    "Will continue to monitor overnight.",
    "Plan discussed with team.",
    "Labs reviewed.",
    "Meds given as ordered.",
];

const PLACEHOLDERS: &[&str] = &[
    "Date:[**2150-3-12**]",
    "[**Hospital 1834**]",
    "Dr. [**Last Name (STitle) 4121**]",
    "[**Known lastname 9031**] family",
    "[**First Name8 (NamePattern2) 512**]",
];

const NONCOMPLIANCE_SENTENCES: &[&str] = &[
    "Pt noncompliant with home medications.",
    "History of being non-compliant with dialysis.",
    "Noted noncompliance with fluid restriction.",
    "Pt remains noncompliant with BiPAP.",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_admissions: usize,
    pub seed: u64,
    pub black_fraction: f64,
    pub other_fraction: f64,
    /// Mean shift of the latent for black patients.
    pub latent_race_shift: f64,
    pub noncompliance_intercept: f64,
    pub noncompliance_slope: f64,
    pub n_features: usize,
    /// Per-feature logistic slope on the latent; empty means the default pattern.
    pub feature_slopes: Vec<f64>,
    /// Logistic intercept shared by all latent-linked features.
    pub feature_intercept: f64,
    pub noise_feature_rate: f64,
    pub ventilation_rate: f64,
    pub vasopressor_rate: f64,
    pub ventilation_log_mean: f64,
    pub ventilation_log_sd: f64,
    pub vasopressor_log_mean: f64,
    pub vasopressor_log_sd: f64,
    pub disparity_multiplier: f64,
    /// Latent value above which durations are multiplied.
    pub disparity_threshold: f64,
    /// Probability that a note sentence carries a lexicon word.
    pub lexicon_injection_rate: f64,
    /// Slope of P(positive word) = sigmoid(-slope * latent).
    pub sentiment_slope: f64,
    pub oasis_mean: f64,
    pub oasis_sd: f64,
    pub sapsii_mean: f64,
    pub sapsii_sd: f64,
    pub severity_correlation: f64,
    /// Shift of both severity scores per unit latent, in standard deviations.
    pub severity_latent_slope: f64,
    pub died_fraction: f64,
    pub hospice_fraction: f64,
    pub snf_fraction: f64,
    pub short_stay_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_admissions: 2000,
            seed: 7,
            black_fraction: 0.15,
            other_fraction: 0.05,
            latent_race_shift: 0.5,
            noncompliance_intercept: -4.0,
            noncompliance_slope: 2.5,
            n_features: 32,
            feature_slopes: Vec::new(),
            feature_intercept: -1.0,
            noise_feature_rate: 0.3,
            ventilation_rate: 0.7,
            vasopressor_rate: 0.5,
            ventilation_log_mean: 8.0,
            ventilation_log_sd: 0.3,
            vasopressor_log_mean: 7.3,
            vasopressor_log_sd: 0.3,
            disparity_multiplier: 2.0,
            disparity_threshold: 1.0,
            lexicon_injection_rate: 0.6,
            sentiment_slope: 1.0,
            oasis_mean: 35.0,
            oasis_sd: 8.0,
            sapsii_mean: 42.0,
            sapsii_sd: 13.0,
            severity_correlation: 0.7,
            severity_latent_slope: 0.0,
            died_fraction: 0.5,
            hospice_fraction: 0.15,
            snf_fraction: 0.2,
            short_stay_fraction: 0.03,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_admissions < 2 {
            return bad(format!("n_admissions must be >= 2, got {}", self.n_admissions));
        }
        for (name, v) in [
            ("black_fraction", self.black_fraction),
            ("other_fraction", self.other_fraction),
            ("noise_feature_rate", self.noise_feature_rate),
            ("ventilation_rate", self.ventilation_rate),
            ("vasopressor_rate", self.vasopressor_rate),
            ("lexicon_injection_rate", self.lexicon_injection_rate),
            ("died_fraction", self.died_fraction),
            ("hospice_fraction", self.hospice_fraction),
            ("snf_fraction", self.snf_fraction),
            ("short_stay_fraction", self.short_stay_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.black_fraction + self.other_fraction > 1.0 {
            return bad("black_fraction + other_fraction exceeds 1".into());
        }
        if self.died_fraction + self.hospice_fraction + self.snf_fraction > 1.0 {
            return bad("died + hospice + snf fractions exceed 1".into());
        }
        if !(self.disparity_multiplier >= 1.0 && self.disparity_multiplier.is_finite()) {
            return bad(format!(
                "disparity_multiplier must be finite and >= 1, got {}",
                self.disparity_multiplier
            ));
        }
        if !(-1.0..=1.0).contains(&self.severity_correlation) {
            return bad(format!(
                "severity_correlation must lie in [-1, 1], got {}",
                self.severity_correlation
            ));
        }
        for (name, v) in [
            ("ventilation_log_sd", self.ventilation_log_sd),
            ("vasopressor_log_sd", self.vasopressor_log_sd),
            ("oasis_sd", self.oasis_sd),
            ("sapsii_sd", self.sapsii_sd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("latent_race_shift", self.latent_race_shift),
            ("noncompliance_intercept", self.noncompliance_intercept),
            ("noncompliance_slope", self.noncompliance_slope),
            ("feature_intercept", self.feature_intercept),
            ("ventilation_log_mean", self.ventilation_log_mean),
            ("vasopressor_log_mean", self.vasopressor_log_mean),
            ("disparity_threshold", self.disparity_threshold),
            ("sentiment_slope", self.sentiment_slope),
            ("oasis_mean", self.oasis_mean),
            ("sapsii_mean", self.sapsii_mean),
            ("severity_latent_slope", self.severity_latent_slope),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.n_features > FEATURE_POOL.len() {
            return bad(format!(
                "n_features must be <= {}, got {}",
                FEATURE_POOL.len(),
                self.n_features
            ));
        }
        if !self.feature_slopes.is_empty() && self.feature_slopes.len() != self.n_features {
            return bad(format!(
                "feature_slopes has {} entries but n_features is {}",
                self.feature_slopes.len(),
                self.n_features
            ));
        }
        if self.feature_slopes.iter().any(|s| !s.is_finite()) {
            return bad("feature_slopes must be finite".into());
        }
        Ok(())
    }

    /// Effective per-feature slopes. The default pattern cycles
    /// `+1.5, -1.5, +1.0, 0.0`, so every fourth feature is pure noise.
    pub fn slopes(&self) -> Vec<f64> {
        if !self.feature_slopes.is_empty() {
            return self.feature_slopes.clone();
        }
        (0..self.n_features)
            .map(|j| [1.5, -1.5, 1.0, 0.0][j % 4])
            .collect()
    }

    /// Names of the latent-linked features, in generation order.
    pub fn feature_names(&self) -> Vec<String> {
        FEATURE_POOL[..self.n_features]
            .iter()
            .map(|(i, v)| crate::chart_features::feature_name(i, v))
            .collect()
    }

    /// Parses a flat `key = value` file. Unknown keys are errors; missing
    /// keys keep their defaults. `feature_slopes` is comma-separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SynthConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|m| Error::Config(format!("line {}: {m}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn f(v: &str) -> std::result::Result<f64, String> {
            v.parse().map_err(|_| format!("`{v}` is not a number"))
        }
        fn u(v: &str) -> std::result::Result<usize, String> {
            v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
        }
        match key {
            "n_admissions" => self.n_admissions = u(value)?,
            "seed" => self.seed = value.parse().map_err(|_| format!("`{value}` is not a u64"))?,
            "black_fraction" => self.black_fraction = f(value)?,
            "other_fraction" => self.other_fraction = f(value)?,
            "latent_race_shift" => self.latent_race_shift = f(value)?,
            "noncompliance_intercept" => self.noncompliance_intercept = f(value)?,
            "noncompliance_slope" => self.noncompliance_slope = f(value)?,
            "n_features" => self.n_features = u(value)?,
            "feature_slopes" => {
                self.feature_slopes = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|v| f(v.trim())).collect::<std::result::Result<_, _>>()?
                }
            }
            "feature_intercept" => self.feature_intercept = f(value)?,
            "noise_feature_rate" => self.noise_feature_rate = f(value)?,
            "ventilation_rate" => self.ventilation_rate = f(value)?,
            "vasopressor_rate" => self.vasopressor_rate = f(value)?,
            "ventilation_log_mean" => self.ventilation_log_mean = f(value)?,
            "ventilation_log_sd" => self.ventilation_log_sd = f(value)?,
            "vasopressor_log_mean" => self.vasopressor_log_mean = f(value)?,
            "vasopressor_log_sd" => self.vasopressor_log_sd = f(value)?,
            "disparity_multiplier" => self.disparity_multiplier = f(value)?,
            "disparity_threshold" => self.disparity_threshold = f(value)?,
            "lexicon_injection_rate" => self.lexicon_injection_rate = f(value)?,
            "sentiment_slope" => self.sentiment_slope = f(value)?,
            "oasis_mean" => self.oasis_mean = f(value)?,
            "oasis_sd" => self.oasis_sd = f(value)?,
            "sapsii_mean" => self.sapsii_mean = f(value)?,
            "sapsii_sd" => self.sapsii_sd = f(value)?,
            "severity_correlation" => self.severity_correlation = f(value)?,
            "severity_latent_slope" => self.severity_latent_slope = f(value)?,
            "died_fraction" => self.died_fraction = f(value)?,
            "hospice_fraction" => self.hospice_fraction = f(value)?,
            "snf_fraction" => self.snf_fraction = f(value)?,
            "short_stay_fraction" => self.short_stay_fraction = f(value)?,
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Flat `key = value` rendering accepted by [`SynthConfig::parse`].
    pub fn to_text(&self) -> String {
        let slopes = self
            .feature_slopes
            .iter()
            .map(f64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n_admissions", self.n_admissions.to_string());
        put("seed", self.seed.to_string());
        put("black_fraction", self.black_fraction.to_string());
        put("other_fraction", self.other_fraction.to_string());
        put("latent_race_shift", self.latent_race_shift.to_string());
        put("noncompliance_intercept", self.noncompliance_intercept.to_string());
        put("noncompliance_slope", self.noncompliance_slope.to_string());
        put("n_features", self.n_features.to_string());
        put("feature_slopes", slopes);
        put("feature_intercept", self.feature_intercept.to_string());
        put("noise_feature_rate", self.noise_feature_rate.to_string());
        put("ventilation_rate", self.ventilation_rate.to_string());
        put("vasopressor_rate", self.vasopressor_rate.to_string());
        put("ventilation_log_mean", self.ventilation_log_mean.to_string());
        put("ventilation_log_sd", self.ventilation_log_sd.to_string());
        put("vasopressor_log_mean", self.vasopressor_log_mean.to_string());
        put("vasopressor_log_sd", self.vasopressor_log_sd.to_string());
        put("disparity_multiplier", self.disparity_multiplier.to_string());
        put("disparity_threshold", self.disparity_threshold.to_string());
        put("lexicon_injection_rate", self.lexicon_injection_rate.to_string());
        put("sentiment_slope", self.sentiment_slope.to_string());
        put("oasis_mean", self.oasis_mean.to_string());
        put("oasis_sd", self.oasis_sd.to_string());
        put("sapsii_mean", self.sapsii_mean.to_string());
        put("sapsii_sd", self.sapsii_sd.to_string());
        put("severity_correlation", self.severity_correlation.to_string());
        put("severity_latent_slope", self.severity_latent_slope.to_string());
        put("died_fraction", self.died_fraction.to_string());
        put("hospice_fraction", self.hospice_fraction.to_string());
        put("snf_fraction", self.snf_fraction.to_string());
        put("short_stay_fraction", self.short_stay_fraction.to_string());
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentRecord {
    pub admission_id: String,
    pub latent: f64,
    /// Durations of this admission were multiplied by the disparity multiplier.
    pub high_latent: bool,
    pub noncompliant: bool,
    /// Merged treatment minutes before any span splitting.
    pub ventilation_minutes: Option<i64>,
    pub vasopressor_minutes: Option<i64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub records: BTreeMap<String, LatentRecord>,
}

impl GroundTruth {
    pub fn latent(&self, admission_id: &str) -> Option<f64> {
        self.records.get(admission_id).map(|r| r.latent)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = path.parent().unwrap_or(Path::new("."));
        let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("ground_truth.csv");
        let opt = |v: Option<i64>| v.map(|m| m.to_string()).unwrap_or_default();
        crate::data_model::write_csv(dir, file, |w| {
            w.write_record([
                "admission_id",
                "latent",
                "high_latent",
                "noncompliant",
                "ventilation_minutes",
                "vasopressor_minutes",
            ])?;
            for r in self.records.values() {
                w.write_record([
                    r.admission_id.clone(),
                    r.latent.to_string(),
                    u8::from(r.high_latent).to_string(),
                    u8::from(r.noncompliant).to_string(),
                    opt(r.ventilation_minutes),
                    opt(r.vasopressor_minutes),
                ])?;
            }
            Ok(())
        })
    }
}

struct Words {
    positive: Vec<String>,
    negative: Vec<String>,
}

impl Words {
    fn from_lexicon(lex: &SentimentLexicon) -> Self {
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        // Label terms stay out of the pool so the label depends only on the flag.
        let label_terms = NoncompliancePatterns::default_terms();
        for (t, p) in lex.entries() {
            if label_terms.matches(t) {
                continue;
            }
            if p > 0.0 {
                positive.push(t.to_string());
            } else if p < 0.0 {
                negative.push(t.to_string());
            }
        }
        Words { positive, negative }
    }
}

#[derive(Default)]
struct Parts {
    admissions: Vec<Admission>,
    chart_events: Vec<ChartEventRecord>,
    notes: Vec<NoteRecord>,
    spans: Vec<TreatmentSpanRecord>,
    severity: Vec<SeverityRecord>,
}

pub fn admission_id(index: usize) -> String {
    format!("{}", 100_000 + index)
}

/// Draws a dataset and its ground truth. Deterministic given `config`.
pub fn generate(config: &SynthConfig) -> Result<(EhrDataset, GroundTruth)> {
    config.validate()?;
    let words = Words::from_lexicon(&SentimentLexicon::clinical_default());
    let slopes = config.slopes();
    let mut parts = Parts::default();
    let mut truth = GroundTruth::default();
    for i in 0..config.n_admissions {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);
        let rec = admission(i, config, &slopes, &words, &mut rng, &mut parts);
        truth.records.insert(rec.admission_id.clone(), rec);
    }
    let ds = EhrDataset::from_parts(
        parts.admissions,
        parts.chart_events,
        parts.notes,
        parts.spans,
        parts.severity,
    )?;
    Ok((ds, truth))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn admission(
    i: usize,
    cfg: &SynthConfig,
    slopes: &[f64],
    words: &Words,
    rng: &mut ChaCha8Rng,
    out: &mut Parts,
) -> LatentRecord {
    let id = admission_id(i);

    let u: f64 = rng.random();
    let race = if u < cfg.black_fraction {
        Race::Black
    } else if u < cfg.black_fraction + cfg.other_fraction {
        Race::Other
    } else {
        Race::White
    };
    let shift = if race == Race::Black { cfg.latent_race_shift } else { 0.0 };
    let latent = normal(rng) + shift;
    let high_latent = latent > cfg.disparity_threshold;
    let multiplier = if high_latent { cfg.disparity_multiplier } else { 1.0 };

    let u: f64 = rng.random();
    let (died, location) = if u < cfg.died_fraction {
        (true, DischargeLocation::None)
    } else if u < cfg.died_fraction + cfg.hospice_fraction {
        (false, DischargeLocation::Hospice)
    } else if u < cfg.died_fraction + cfg.hospice_fraction + cfg.snf_fraction {
        (false, DischargeLocation::Snf)
    } else if rng.random_bool(0.8) {
        (false, DischargeLocation::Home)
    } else {
        (false, DischargeLocation::Other)
    };

    let admit = BASE_MINUTES + rng.random_range(0..3_650) * MINUTES_PER_DAY + rng.random_range(0..MINUTES_PER_DAY);
    let short = rng.random_bool(cfg.short_stay_fraction);

    // Treatments start after a short lead-in; short stays get none.
    let mut cursor = admit + rng.random_range(30..240);
    let mut treatment_minutes = [None, None];
    if !short {
        for (slot, treatment) in Treatment::ALL.iter().enumerate() {
            let (rate, mu, sd) = match treatment {
                Treatment::Ventilation => {
                    (cfg.ventilation_rate, cfg.ventilation_log_mean, cfg.ventilation_log_sd)
                }
                Treatment::Vasopressor => {
                    (cfg.vasopressor_rate, cfg.vasopressor_log_mean, cfg.vasopressor_log_sd)
                }
            };
            if !rng.random_bool(rate) {
                continue;
            }
            let base: f64 = LogNormal::new(mu, sd).expect("validated sd").sample(rng);
            let total = ((base * multiplier).round() as i64).max(1);
            let start = cursor;
            emit_spans(&id, *treatment, start, total, rng, &mut out.spans);
            treatment_minutes[slot] = Some(total);
            // Treatments may overlap in time.
            cursor = start + rng.random_range(0..=total.min(MINUTES_PER_DAY));
        }
    }
    let last_span_end = out
        .spans
        .iter()
        .rev()
        .take_while(|s| s.admission_id == id)
        .map(|s| s.end_time.minutes())
        .max();

    let stay = if short {
        rng.random_range(60..360)
    } else {
        let drawn = (LogNormal::new(8.6, 0.5).expect("constant").sample(rng) as i64).max(720);
        match last_span_end {
            Some(end) => drawn.max(end - admit + rng.random_range(60..1_440)),
            None => drawn,
        }
    };
    let discharge = admit + stay;

    out.admissions.push(Admission {
        admission_id: id.clone(),
        patient_id: format!("{}", 500_000 + i),
        admit_time: Timestamp::from_minutes(admit),
        discharge_time: Timestamp::from_minutes(discharge),
        race,
        died_in_hospital: died,
        discharge_location: location,
    });

    let chart_time = |rng: &mut ChaCha8Rng| Timestamp::from_minutes(rng.random_range(admit..=discharge));
    for (j, &slope) in slopes.iter().enumerate() {
        let p = sigmoid(cfg.feature_intercept + slope * latent);
        if rng.random_bool(p) {
            let (item, value) = FEATURE_POOL[j];
            for _ in 0..rng.random_range(1..=3) {
                out.chart_events.push(ChartEventRecord {
                    admission_id: id.clone(),
                    item_label: item.to_string(),
                    value_label: value.to_string(),
                    chart_time: chart_time(rng),
                });
            }
        }
    }
    for (item, value) in NOISE_POOL {
        if rng.random_bool(cfg.noise_feature_rate) {
            out.chart_events.push(ChartEventRecord {
                admission_id: id.clone(),
                item_label: item.to_string(),
                value_label: value.to_string(),
                chart_time: chart_time(rng),
            });
        }
    }

    let noncompliant = rng.random_bool(sigmoid(cfg.noncompliance_intercept + cfg.noncompliance_slope * latent));
    let n_notes = rng.random_range(1..=4usize);
    let flagged_note = rng.random_range(0..n_notes);
    let p_positive = sigmoid(-cfg.sentiment_slope * latent);
    for k in 0..n_notes {
        let mut sentences: Vec<String> = Vec::new();
        for _ in 0..rng.random_range(3..=6) {
            let mut s = pick(rng, FILLER).to_string();
            if rng.random_bool(cfg.lexicon_injection_rate) {
                let pool = if rng.random_bool(p_positive) { &words.positive } else { &words.negative };
                s = format!("Pt appears {} today. {s}", pick(rng, pool));
            }
            if rng.random_bool(0.3) {
                s = format!("{s} {}", pick(rng, PLACEHOLDERS));
            }
            sentences.push(s);
        }
        if noncompliant && k == flagged_note {
            let at = rng.random_range(0..=sentences.len());
            sentences.insert(at, pick(rng, NONCOMPLIANCE_SENTENCES).to_string());
        }
        let category = pick(rng, &["nursing", "physician", "social work", "discharge summary"]);
        out.notes.push(NoteRecord {
            admission_id: id.clone(),
            chart_time: chart_time(rng),
            category: category.to_string(),
            text: sentences.join("\n"),
        });
    }

    // Bivariate normal with the configured correlation, optionally shifted by latent.
    let z1 = normal(rng);
    let z2 = normal(rng);
    let rho = cfg.severity_correlation;
    let zs = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
    let lift = cfg.severity_latent_slope * latent;
    out.severity.push(SeverityRecord {
        admission_id: id.clone(),
        oasis: (cfg.oasis_mean + cfg.oasis_sd * (z1 + lift)).max(0.0),
        sapsii: (cfg.sapsii_mean + cfg.sapsii_sd * (zs + lift)).max(0.0),
    });

    LatentRecord {
        admission_id: id,
        latent,
        high_latent,
        noncompliant,
        ventilation_minutes: treatment_minutes[0],
        vasopressor_minutes: treatment_minutes[1],
    }
}

/// Splits `[start, start + total)` into up to three spans separated by
/// gaps of at most the merge threshold, so merging restores `total` exactly.
fn emit_spans(
    id: &str,
    treatment: Treatment,
    start: i64,
    total: i64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<TreatmentSpanRecord>,
) {
    let end = start + total;
    let mut cuts: Vec<(i64, i64)> = Vec::new();
    if total > 120 {
        for _ in 0..rng.random_range(0..=2) {
            let gap = rng.random_range(1..=MERGE_GAP_MINUTES.min(total / 4));
            let at = rng.random_range(start + 1..end - gap);
            cuts.push((at, at + gap));
        }
    }
    cuts.sort_unstable();
    let mut pieces = Vec::new();
    let mut s = start;
    for (a, b) in cuts {
        // Skip cuts that would overlap a previous one or empty a piece.
        if a <= s || b >= end {
            continue;
        }
        pieces.push((s, a));
        s = b;
    }
    pieces.push((s, end));
    for (a, b) in pieces {
        out.push(TreatmentSpanRecord {
            admission_id: id.to_string(),
            treatment,
            start_time: Timestamp::from_minutes(a),
            end_time: Timestamp::from_minutes(b),
        });
    }
}
