//! Race-, trust- and severity-stratified comparisons and the report they feed.

mod svg;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chart_features::{build_vocabulary, encode, FeatureVocabulary, Whitelist};
use crate::cohort::{build_eol_cohort_with, build_notes_population_with, split_by_race, Cohort, CohortRules};
use crate::data_model::{dataset_summary, write_csv, EhrDataset, Race, SummaryReport, Treatment};
use crate::error::{Error, Result};
use crate::noncompliance::{label_noncompliance, LabelVector, NoncompliancePatterns};
use crate::sentiment::{score_population, SentimentLexicon, SentimentScore};
use crate::sparse_logreg::{fit, FitConfig, MistrustModel, MistrustScore, WeightedFeature};
use crate::stats::{ecdf, mann_whitney_with, median, pearson, EcdfCurve, MannWhitneyOptions, MannWhitneyResult};
use crate::treatments::{durations_for_cohort, DurationOptions};

pub use svg::render_ecdf_svg;

/// Two disjoint groups. `group_a` is the disadvantaged or low-trust side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub name: String,
    pub group_a: Cohort,
    pub group_b: Cohort,
}

impl Stratification {
    pub fn sizes(&self) -> (usize, usize) {
        (self.group_a.len(), self.group_b.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrataKind {
    Race,
    Trust,
    Severity,
}

impl StrataKind {
    pub const ALL: [StrataKind; 3] = [StrataKind::Race, StrataKind::Trust, StrataKind::Severity];

    pub fn as_label(self) -> &'static str {
        match self {
            StrataKind::Race => "race",
            StrataKind::Trust => "trust",
            StrataKind::Severity => "severity",
        }
    }

    /// Display names of (group_a, group_b).
    pub fn group_labels(self) -> (&'static str, &'static str) {
        match self {
            StrataKind::Race => ("black", "white"),
            StrataKind::Trust => ("low trust", "high trust"),
            StrataKind::Severity => ("high severity", "low severity"),
        }
    }
}

/// Top `k_low_trust` admissions by mistrust score form `group_a`.
///
/// Ties are broken by admission id ascending, so the result does not depend
/// on input order.
pub fn stratify_by_score(scores: &[MistrustScore], k_low_trust: usize) -> Result<Stratification> {
    if k_low_trust == 0 || k_low_trust >= scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k_low_trust must satisfy 1 <= k < {}, got {k_low_trust}",
            scores.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite mistrust score for admission `{}`",
            s.admission_id
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(s) = scores.iter().find(|s| !seen.insert(s.admission_id.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "duplicate admission id `{}` in scores",
            s.admission_id
        )));
    }
    let mut order: Vec<&MistrustScore> = scores.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.admission_id.cmp(&b.admission_id))
    });
    let group_a = Cohort::new("low trust", order[..k_low_trust].iter().map(|s| s.admission_id.clone()));
    let group_b = Cohort::new("high trust", order[k_low_trust..].iter().map(|s| s.admission_id.clone()));
    Ok(Stratification {
        name: StrataKind::Trust.as_label().into(),
        group_a,
        group_b,
    })
}

/// Black (group_a) versus white (group_b).
pub fn race_stratification(ds: &EhrDataset, cohort: &Cohort) -> Result<Stratification> {
    let (white, black) = split_by_race(cohort, ds)?;
    Ok(Stratification {
        name: StrataKind::Race.as_label().into(),
        group_a: Cohort::new("black", black.ids().iter().cloned()),
        group_b: Cohort::new("white", white.ids().iter().cloned()),
    })
}

/// The `n_high` highest-OASIS admissions against the `n_low` lowest.
/// Ties at either cut favor the smaller admission id for the high group.
pub fn severity_strata(
    ds: &EhrDataset,
    cohort: &Cohort,
    n_high: usize,
    n_low: usize,
) -> Result<Stratification> {
    let missing: Vec<String> = cohort
        .ids()
        .iter()
        .filter(|id| ds.severity_for(id).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSeverity(missing));
    }
    if n_high == 0 || n_low == 0 || n_high + n_low > cohort.len() {
        return Err(Error::InvalidArgument(format!(
            "severity strata sizes ({n_high}, {n_low}) need both >= 1 and sum <= {}",
            cohort.len()
        )));
    }
    let mut order: Vec<(&String, f64)> = cohort
        .ids()
        .iter()
        .map(|id| (id, ds.severity_for(id).map(|s| s.oasis).unwrap_or_default()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let n = order.len();
    Ok(Stratification {
        name: StrataKind::Severity.as_label().into(),
        group_a: Cohort::new("high severity", order[..n_high].iter().map(|(id, _)| (*id).clone())),
        group_b: Cohort::new("low severity", order[n - n_low..].iter().map(|(id, _)| (*id).clone())),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupDurations {
    pub label: String,
    pub n: usize,
    pub median_minutes: f64,
    pub ecdf: EcdfCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDisparity {
    pub treatment: Treatment,
    pub stratification: String,
    pub group_a: GroupDurations,
    pub group_b: GroupDurations,
    /// `median_a - median_b`, sign retained.
    pub median_gap: f64,
    /// `median_a / median_b`; absent when `median_b` is zero.
    pub median_ratio: Option<f64>,
    pub mann_whitney: MannWhitneyResult,
}

/// Compares the treated members of each group. Untreated members are dropped;
/// a group with no treated member is an error.
pub fn treatment_disparity(
    ds: &EhrDataset,
    strat: &Stratification,
    treatment: Treatment,
    opts: &DurationOptions,
    mw: &MannWhitneyOptions,
) -> Result<TreatmentDisparity> {
    let a = durations_for_cohort(ds, &strat.group_a, treatment, opts)?;
    let b = durations_for_cohort(ds, &strat.group_b, treatment, opts)?;
    disparity_from_durations(&strat.name, (strat.group_a.name(), &a), (strat.group_b.name(), &b), treatment, mw)
}

fn disparity_from_durations(
    strat_name: &str,
    (label_a, a): (&str, &BTreeMap<String, i64>),
    (label_b, b): (&str, &BTreeMap<String, i64>),
    treatment: Treatment,
    mw: &MannWhitneyOptions,
) -> Result<TreatmentDisparity> {
    let group = |label: &str, d: &BTreeMap<String, i64>| -> Result<GroupDurations> {
        if d.is_empty() {
            return Err(Error::UntreatedGroup {
                group: label.to_string(),
                treatment: treatment.to_string(),
            });
        }
        let sample: Vec<f64> = d.values().map(|&m| m as f64).collect();
        Ok(GroupDurations {
            label: label.to_string(),
            n: sample.len(),
            median_minutes: median(&sample)?,
            ecdf: ecdf(&sample)?,
        })
    };
    let ga = group(label_a, a)?;
    let gb = group(label_b, b)?;
    let sa: Vec<f64> = a.values().map(|&m| m as f64).collect();
    let sb: Vec<f64> = b.values().map(|&m| m as f64).collect();
    let test = mann_whitney_with(&sa, &sb, mw)?;
    let median_gap = ga.median_minutes - gb.median_minutes;
    let median_ratio = (gb.median_minutes != 0.0).then(|| ga.median_minutes / gb.median_minutes);
    Ok(TreatmentDisparity {
        treatment,
        stratification: strat_name.to_string(),
        group_a: ga,
        group_b: gb,
        median_gap,
        median_ratio,
        mann_whitney: test,
    })
}

/// Pearson matrix over (oasis, sapsii, mistrust) for the cohort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    pub n: usize,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some(self.values[i][j])
    }
}

pub fn correlation_report(
    ds: &EhrDataset,
    cohort: &Cohort,
    scores: &[MistrustScore],
) -> Result<CorrelationMatrix> {
    let by_id = score_index(scores);
    let mut missing = Vec::new();
    let mut cols = [Vec::new(), Vec::new(), Vec::new()];
    for id in cohort.ids() {
        let Some(sev) = ds.severity_for(id) else {
            missing.push(id.clone());
            continue;
        };
        let score = lookup_score(&by_id, id)?;
        cols[0].push(sev.oasis);
        cols[1].push(sev.sapsii);
        cols[2].push(score);
    }
    if !missing.is_empty() {
        return Err(Error::MissingSeverity(missing));
    }
    let mut values = vec![vec![1.0; 3]; 3];
    for i in 0..3 {
        for j in i + 1..3 {
            let r = pearson(&cols[i], &cols[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        variables: vec!["oasis".into(), "sapsii".into(), "mistrust".into()],
        n: cohort.len(),
        values,
    })
}

fn score_index(scores: &[MistrustScore]) -> HashMap<&str, f64> {
    scores.iter().map(|s| (s.admission_id.as_str(), s.score)).collect()
}

fn lookup_score(index: &HashMap<&str, f64>, id: &str) -> Result<f64> {
    index
        .get(id)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("no mistrust score for admission `{id}`")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupValues {
    pub label: String,
    pub n: usize,
    pub median: f64,
}

/// Two-group comparison of a per-admission value (sentiment, mistrust score).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub stratification: String,
    pub group_a: GroupValues,
    pub group_b: GroupValues,
    pub mann_whitney: MannWhitneyResult,
}

fn compare_values(
    strat: &Stratification,
    values: &HashMap<&str, f64>,
    mw: &MannWhitneyOptions,
) -> Result<GroupComparison> {
    let collect = |c: &Cohort| -> Result<Vec<f64>> {
        c.ids()
            .iter()
            .map(|id| {
                values.get(id.as_str()).copied().ok_or_else(|| {
                    Error::InvalidArgument(format!("no value for admission `{id}` in {}", strat.name))
                })
            })
            .collect()
    };
    let a = collect(&strat.group_a)?;
    let b = collect(&strat.group_b)?;
    let summary = |c: &Cohort, v: &[f64]| -> Result<GroupValues> {
        Ok(GroupValues {
            label: c.name().to_string(),
            n: v.len(),
            median: median(v)?,
        })
    };
    Ok(GroupComparison {
        stratification: strat.name.clone(),
        group_a: summary(&strat.group_a, &a)?,
        group_b: summary(&strat.group_b, &b)?,
        mann_whitney: mann_whitney_with(&a, &b, mw)?,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentimentPopulation {
    /// Black and white end-of-life admissions.
    #[default]
    Eol,
    /// Black and white members of the notes population.
    Notes,
}

/// Everything that shapes a run besides the data itself.
#[derive(Clone, Debug)]
pub struct PipelineConfig {
    pub rules: CohortRules,
    pub durations: DurationOptions,
    pub fit: FitConfig,
    pub patterns: NoncompliancePatterns,
    /// `None` keeps every observed chart item.
    pub whitelist: Option<Whitelist>,
    pub lexicon: SentimentLexicon,
    pub treatments: Vec<Treatment>,
    pub strata: Vec<StrataKind>,
    pub sentiment_population: SentimentPopulation,
    pub mann_whitney: MannWhitneyOptions,
    pub top_k: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rules: CohortRules::default(),
            durations: DurationOptions::default(),
            fit: FitConfig::default(),
            patterns: NoncompliancePatterns::default_terms(),
            whitelist: Some(Whitelist::interpersonal()),
            lexicon: SentimentLexicon::clinical_default(),
            treatments: Treatment::ALL.to_vec(),
            strata: StrataKind::ALL.to_vec(),
            sentiment_population: SentimentPopulation::Eol,
            mann_whitney: MannWhitneyOptions::default(),
            top_k: 3,
        }
    }
}

/// Model fitted on the notes population, plus what it was fitted on.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: MistrustModel,
    pub vocabulary: FeatureVocabulary,
    pub population: Cohort,
    pub labels: LabelVector,
}

impl TrainedModel {
    /// Rebuilds the training context of a model loaded from disk.
    pub fn reconstruct(ds: &EhrDataset, model: MistrustModel, cfg: &PipelineConfig) -> Self {
        let population = build_notes_population_with(ds, &cfg.rules);
        let labels = label_noncompliance(ds, &population, &cfg.patterns);
        let vocabulary = FeatureVocabulary::new(model.feature_names.iter().cloned());
        TrainedModel {
            model,
            vocabulary,
            population,
            labels,
        }
    }

    pub fn n_positive(&self) -> usize {
        self.labels.values().filter(|&&l| l).count()
    }
}

pub fn train(ds: &EhrDataset, cfg: &PipelineConfig) -> Result<TrainedModel> {
    let population = build_notes_population_with(ds, &cfg.rules);
    let vocabulary = build_vocabulary(ds, cfg.whitelist.as_ref());
    let x = encode(ds, &population, &vocabulary);
    let labels = label_noncompliance(ds, &population, &cfg.patterns);
    let model = fit(&x, &labels, &cfg.fit)?;
    Ok(TrainedModel {
        model,
        vocabulary,
        population,
        labels,
    })
}

/// In-sample scores for every admission in the dataset.
pub fn score_all(ds: &EhrDataset, model: &MistrustModel) -> Vec<MistrustScore> {
    let everyone = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
    let vocab = FeatureVocabulary::new(model.feature_names.iter().cloned());
    model.score_matrix(&encode(ds, &everyone, &vocab))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortCounts {
    pub eol: usize,
    pub eol_white: usize,
    pub eol_black: usize,
    pub notes_population: usize,
    pub sentiment_population: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub vocabulary_size: usize,
    pub training_admissions: usize,
    pub noncompliant_admissions: usize,
    pub c: f64,
    pub intercept: f64,
    pub nonzero_weights: usize,
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub top_positive: Vec<WeightedFeature>,
    pub top_negative: Vec<WeightedFeature>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub dataset: SummaryReport,
    pub cohorts: CohortCounts,
    pub model: Option<ModelSummary>,
    /// Mistrust score, black versus white, over the end-of-life cohort.
    pub mistrust_by_race: GroupComparison,
    pub treatments: Vec<TreatmentDisparity>,
    /// Normalized sentiment medians per stratification.
    pub sentiment: Vec<GroupComparison>,
    pub correlations: CorrelationMatrix,
}

impl DisparityReport {
    pub fn treatment(&self, treatment: Treatment, strata: StrataKind) -> Option<&TreatmentDisparity> {
        self.treatments
            .iter()
            .find(|t| t.treatment == treatment && t.stratification == strata.as_label())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// Report plus the per-admission intermediates behind it.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub report: DisparityReport,
    pub eol: Cohort,
    pub sentiment: Vec<SentimentScore>,
}

fn black_white(ds: &EhrDataset, cohort: &Cohort, name: &str) -> Cohort {
    Cohort::new(
        name,
        cohort
            .ids()
            .iter()
            .filter(|id| matches!(ds.admission(id).map(|a| a.race), Some(Race::White | Race::Black)))
            .cloned(),
    )
}

fn restrict(scores: &HashMap<&str, f64>, cohort: &Cohort) -> Result<Vec<MistrustScore>> {
    cohort
        .ids()
        .iter()
        .map(|id| {
            Ok(MistrustScore {
                admission_id: id.clone(),
                score: lookup_score(scores, id)?,
            })
        })
        .collect()
}

/// Builds every comparison requested in `cfg` from precomputed scores.
/// `trained` adds the model section; without it the report omits it.
pub fn analyze(
    ds: &EhrDataset,
    scores: &[MistrustScore],
    trained: Option<&TrainedModel>,
    cfg: &PipelineConfig,
) -> Result<Analysis> {
    let eol = build_eol_cohort_with(ds, &cfg.rules);
    let notes = build_notes_population_with(ds, &cfg.rules);
    let by_id = score_index(scores);
    let race = race_stratification(ds, &eol)?;
    let mw = &cfg.mann_whitney;

    let mistrust_by_race = compare_values(&race, &by_id, mw)?;

    let mut treatments = Vec::new();
    for &treatment in &cfg.treatments {
        let treated = durations_for_cohort(ds, &eol, treatment, &cfg.durations)?;
        let treated_cohort = Cohort::new("treated", treated.keys().cloned());
        let treated_race = race_stratification(ds, &treated_cohort)?;
        let k = treated_race.group_a.len();
        for &kind in &cfg.strata {
            let strat = match kind {
                StrataKind::Race => treated_race.clone(),
                // Same group sizes as the race split, within the same treated population.
                StrataKind::Trust => stratify_by_score(&restrict(&by_id, &treated_cohort)?, k)?,
                StrataKind::Severity => {
                    severity_strata(ds, &treated_cohort, k, treated_cohort.len().saturating_sub(k))?
                }
            };
            treatments.push(treatment_disparity(ds, &strat, treatment, &cfg.durations, mw)?);
        }
    }

    let sentiment_cohort = match cfg.sentiment_population {
        SentimentPopulation::Eol => eol.clone(),
        SentimentPopulation::Notes => black_white(ds, &notes, "notes"),
    };
    let sentiment = score_population(ds, &sentiment_cohort, &cfg.lexicon)?;
    let sentiment_by_id: HashMap<&str, f64> = sentiment
        .iter()
        .map(|s| (s.admission_id.as_str(), s.normalized))
        .collect();
    let sentiment_race = race_stratification(ds, &sentiment_cohort)?;
    let k = sentiment_race.group_a.len();
    let mut sentiment_table = Vec::new();
    for &kind in &cfg.strata {
        let strat = match kind {
            StrataKind::Race => sentiment_race.clone(),
            StrataKind::Trust => stratify_by_score(&restrict(&by_id, &sentiment_cohort)?, k)?,
            StrataKind::Severity => {
                severity_strata(ds, &sentiment_cohort, k, sentiment_cohort.len().saturating_sub(k))?
            }
        };
        sentiment_table.push(compare_values(&strat, &sentiment_by_id, mw)?);
    }

    let correlations = correlation_report(ds, &eol, scores)?;

    let model = trained
        .map(|t| -> Result<ModelSummary> {
            let top = t.model.top_features(cfg.top_k.max(1))?;
            Ok(ModelSummary {
                vocabulary_size: t.vocabulary.len(),
                training_admissions: t.population.len(),
                noncompliant_admissions: t.n_positive(),
                c: t.model.c,
                intercept: t.model.intercept,
                nonzero_weights: t.model.weights.iter().filter(|w| **w != 0.0).count(),
                iterations: t.model.iterations,
                objective: t.model.objective,
                converged: t.model.converged,
                top_positive: top.positive,
                top_negative: top.negative,
            })
        })
        .transpose()?;

    let report = DisparityReport {
        dataset: dataset_summary(ds),
        cohorts: CohortCounts {
            eol: eol.len(),
            eol_white: race.group_b.len(),
            eol_black: race.group_a.len(),
            notes_population: notes.len(),
            sentiment_population: sentiment_cohort.len(),
        },
        model,
        mistrust_by_race,
        treatments,
        sentiment: sentiment_table,
        correlations,
    };
    Ok(Analysis {
        report,
        eol,
        sentiment,
    })
}

/// All pipeline products of one run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub trained: TrainedModel,
    pub scores: Vec<MistrustScore>,
    pub analysis: Analysis,
}

/// Train, score in-sample, and analyze.
pub fn run_pipeline(ds: &EhrDataset, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let trained = train(ds, cfg)?;
    let scores = score_all(ds, &trained.model);
    let analysis = analyze(ds, &scores, Some(&trained), cfg)?;
    Ok(PipelineOutput {
        trained,
        scores,
        analysis,
    })
}

fn slug(s: &str) -> String {
    s.replace(' ', "_")
}

/// Writes `report.json`, flat CSVs and one ECDF SVG per treatment comparison.
/// Returns the written paths in write order.
pub fn write_report(report: &DisparityReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    fs::write(&json_path, report.to_json()?).map_err(|e| Error::io(&json_path, e))?;
    written.push(json_path);

    write_csv(dir, "treatment_disparities.csv", |w| {
        w.write_record([
            "treatment",
            "stratification",
            "group_a",
            "n_a",
            "median_a",
            "group_b",
            "n_b",
            "median_b",
            "median_gap",
            "median_ratio",
            "u_statistic",
            "p_value",
            "method",
        ])?;
        for t in &report.treatments {
            w.write_record([
                t.treatment.as_label().to_string(),
                t.stratification.clone(),
                t.group_a.label.clone(),
                t.group_a.n.to_string(),
                t.group_a.median_minutes.to_string(),
                t.group_b.label.clone(),
                t.group_b.n.to_string(),
                t.group_b.median_minutes.to_string(),
                t.median_gap.to_string(),
                t.median_ratio.map(|r| r.to_string()).unwrap_or_default(),
                t.mann_whitney.u_statistic.to_string(),
                t.mann_whitney.p_two_sided.to_string(),
                method_label(&t.mann_whitney),
            ])?;
        }
        Ok(())
    })?;
    written.push(dir.join("treatment_disparities.csv"));

    write_csv(dir, "sentiment_medians.csv", |w| {
        w.write_record(["stratification", "population", "n", "median"])?;
        for c in &report.sentiment {
            for g in [&c.group_b, &c.group_a] {
                w.write_record([c.stratification.clone(), g.label.clone(), g.n.to_string(), g.median.to_string()])?;
            }
        }
        Ok(())
    })?;
    written.push(dir.join("sentiment_medians.csv"));

    write_csv(dir, "correlations.csv", |w| {
        let mut header = vec![String::new()];
        header.extend(report.correlations.variables.iter().cloned());
        w.write_record(&header)?;
        for (name, row) in report.correlations.variables.iter().zip(&report.correlations.values) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    written.push(dir.join("correlations.csv"));

    if let Some(m) = &report.model {
        write_csv(dir, "top_features.csv", |w| {
            w.write_record(["direction", "rank", "feature", "weight"])?;
            for (dir, list) in [("positive", &m.top_positive), ("negative", &m.top_negative)] {
                for (i, f) in list.iter().enumerate() {
                    w.write_record([dir.to_string(), (i + 1).to_string(), f.feature.clone(), f.weight.to_string()])?;
                }
            }
            Ok(())
        })?;
        written.push(dir.join("top_features.csv"));
    }

    for t in &report.treatments {
        let stem = format!("ecdf_{}_{}", t.treatment.as_label(), slug(&t.stratification));
        for g in [&t.group_a, &t.group_b] {
            let path = dir.join(format!("{stem}_{}.csv", slug(&g.label)));
            g.ecdf.write_csv(&path)?;
            written.push(path);
        }
        let path = dir.join(format!("{stem}.svg"));
        let title = format!("CDF of {} duration by {}", t.treatment.as_label(), t.stratification);
        let svg = render_ecdf_svg(
            &title,
            "minutes",
            [
                (t.group_a.label.as_str(), &t.group_a.ecdf, t.group_a.median_minutes),
                (t.group_b.label.as_str(), &t.group_b.ecdf, t.group_b.median_minutes),
            ],
        );
        fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn method_label(r: &MannWhitneyResult) -> String {
    match r.method {
        crate::stats::MannWhitneyMethod::Exact => "exact".into(),
        crate::stats::MannWhitneyMethod::NormalApprox => "normal_approx".into(),
    }
}

pub fn read_report(path: impl AsRef<Path>) -> Result<DisparityReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::{Admission, DischargeLocation, SeverityRecord, Timestamp, TreatmentSpanRecord};

    fn scores(pairs: &[(&str, f64)]) -> Vec<MistrustScore> {
        pairs
            .iter()
            .map(|(id, s)| MistrustScore {
                admission_id: id.to_string(),
                score: *s,
            })
            .collect()
    }

    #[test]
    fn stratify_hand_sorted() {
        let s = scores(&[("a", 0.9), ("b", 0.1), ("c", 0.5), ("d", 0.2), ("e", 0.8), ("f", 0.3)]);
        let st = stratify_by_score(&s, 2).unwrap();
        assert_eq!(st.group_a.ids(), ["a", "e"]);
        assert_eq!(st.group_b.ids(), ["b", "c", "d", "f"]);
        let st = stratify_by_score(&s, 5).unwrap();
        assert_eq!(st.group_b.ids(), ["b"]);
        assert!(stratify_by_score(&s, 0).is_err());
        assert!(stratify_by_score(&s, 6).is_err());
    }

    #[test]
    fn stratify_ties_by_id() {
        let s = scores(&[("z", 0.5), ("m", 0.5), ("a", 0.5), ("q", 0.1)]);
        let st = stratify_by_score(&s, 2).unwrap();
        assert_eq!(st.group_a.ids(), ["a", "m"]);
        let mut rev = s.clone();
        rev.reverse();
        assert_eq!(stratify_by_score(&rev, 2).unwrap(), st);
        let dup = scores(&[("a", 0.5), ("a", 0.4), ("b", 0.1)]);
        assert!(stratify_by_score(&dup, 1).is_err());
    }

    fn adm(id: &str, race: Race) -> Admission {
        Admission {
            admission_id: id.into(),
            patient_id: id.into(),
            admit_time: Timestamp::from_minutes(0),
            discharge_time: Timestamp::from_minutes(10_000),
            race,
            died_in_hospital: true,
            discharge_location: DischargeLocation::None,
        }
    }

    fn sev(id: &str, oasis: f64) -> SeverityRecord {
        SeverityRecord {
            admission_id: id.into(),
            oasis,
            sapsii: oasis * 0.5 + 3.0,
        }
    }

    #[test]
    fn severity_rank_and_ties() {
        let ds = EhrDataset::from_parts(
            vec![adm("a", Race::White), adm("b", Race::White), adm("c", Race::Black)],
            vec![],
            vec![],
            vec![],
            vec![sev("a", 40.0), sev("b", 10.0), sev("c", 25.0)],
        )
        .unwrap();
        let c = Cohort::new("c", ["a", "b", "c"].map(String::from));
        let st = severity_strata(&ds, &c, 1, 2).unwrap();
        assert_eq!(st.group_a.ids(), ["a"]);
        assert_eq!(st.group_b.ids(), ["b", "c"]);

        let tied = EhrDataset::from_parts(
            vec![adm("x", Race::White), adm("y", Race::White), adm("w", Race::White)],
            vec![],
            vec![],
            vec![],
            vec![sev("x", 30.0), sev("y", 30.0), sev("w", 5.0)],
        )
        .unwrap();
        let c = Cohort::new("c", ["x", "y", "w"].map(String::from));
        assert_eq!(severity_strata(&tied, &c, 1, 2).unwrap().group_a.ids(), ["x"]);

        let partial = EhrDataset::from_parts(
            vec![adm("a", Race::White), adm("b", Race::White)],
            vec![],
            vec![],
            vec![],
            vec![sev("a", 1.0)],
        )
        .unwrap();
        let c = Cohort::new("c", ["a", "b"].map(String::from));
        match severity_strata(&partial, &c, 1, 1) {
            Err(Error::MissingSeverity(ids)) => assert_eq!(ids, ["b"]),
            other => panic!("{other:?}"),
        }
    }

    fn span(id: &str, start: i64, end: i64) -> TreatmentSpanRecord {
        TreatmentSpanRecord {
            admission_id: id.into(),
            treatment: Treatment::Ventilation,
            start_time: Timestamp::from_minutes(start),
            end_time: Timestamp::from_minutes(end),
        }
    }

    #[test]
    fn doubled_durations_give_gap_equal_to_median_b() {
        let base = [300, 500, 700, 900, 1100];
        let mut adms = Vec::new();
        let mut spans = Vec::new();
        for (i, &d) in base.iter().enumerate() {
            let a = format!("a{i}");
            let b = format!("b{i}");
            adms.push(adm(&a, Race::Black));
            adms.push(adm(&b, Race::White));
            spans.push(span(&a, 0, 2 * d));
            spans.push(span(&b, 0, d));
        }
        let ds = EhrDataset::from_parts(adms, vec![], vec![], spans, vec![]).unwrap();
        let all = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
        let strat = race_stratification(&ds, &all).unwrap();
        let t = treatment_disparity(
            &ds,
            &strat,
            Treatment::Ventilation,
            &DurationOptions::default(),
            &MannWhitneyOptions::default(),
        )
        .unwrap();
        assert_eq!(t.group_b.median_minutes, 700.0);
        assert_eq!(t.median_gap, t.group_b.median_minutes);
        assert_eq!(t.median_ratio, Some(2.0));
        assert_eq!(t.group_a.ecdf.n, 5);
    }

    #[test]
    fn identical_groups_have_zero_gap_and_unit_p() {
        let mut adms = Vec::new();
        let mut spans = Vec::new();
        for (i, d) in [100, 200, 300].into_iter().enumerate() {
            for (p, race) in [("a", Race::Black), ("b", Race::White)] {
                let id = format!("{p}{i}");
                adms.push(adm(&id, race));
                spans.push(span(&id, 0, d));
            }
        }
        let ds = EhrDataset::from_parts(adms, vec![], vec![], spans, vec![]).unwrap();
        let all = Cohort::new("all", ds.admissions().iter().map(|a| a.admission_id.clone()));
        let strat = race_stratification(&ds, &all).unwrap();
        let t = treatment_disparity(&ds, &strat, Treatment::Ventilation, &DurationOptions::default(), &MannWhitneyOptions::default()).unwrap();
        assert_eq!(t.median_gap, 0.0);
        assert_eq!(t.mann_whitney.p_two_sided, 1.0);
    }

    #[test]
    fn untreated_group_is_named() {
        let ds = EhrDataset::from_parts(
            vec![adm("a", Race::Black), adm("b", Race::White)],
            vec![],
            vec![],
            vec![span("b", 0, 10)],
            vec![],
        )
        .unwrap();
        let all = Cohort::new("all", ["a", "b"].map(String::from));
        let strat = race_stratification(&ds, &all).unwrap();
        match treatment_disparity(&ds, &strat, Treatment::Ventilation, &DurationOptions::default(), &MannWhitneyOptions::default()) {
            Err(Error::UntreatedGroup { group, .. }) => assert_eq!(group, "black"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn correlation_matrix_shape() {
        let ids = ["a", "b", "c", "d"];
        let oasis = [10.0, 30.0, 20.0, 50.0];
        let ds = EhrDataset::from_parts(
            ids.iter().map(|id| adm(id, Race::White)).collect(),
            vec![],
            vec![],
            vec![],
            ids.iter().zip(oasis).map(|(id, o)| sev(id, o)).collect(),
        )
        .unwrap();
        let c = Cohort::new("c", ids.map(String::from));
        let s: Vec<MistrustScore> = ids
            .iter()
            .zip(oasis)
            .map(|(id, o)| MistrustScore {
                admission_id: id.to_string(),
                score: o / 100.0,
            })
            .collect();
        let m = correlation_report(&ds, &c, &s).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 1.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
        assert!((m.get("oasis", "mistrust").unwrap() - 1.0).abs() < 1e-12);

        let flat: Vec<MistrustScore> = ids
            .iter()
            .map(|id| MistrustScore {
                admission_id: id.to_string(),
                score: 0.5,
            })
            .collect();
        assert!(matches!(correlation_report(&ds, &c, &flat), Err(Error::ConstantSample(_))));
    }
}
