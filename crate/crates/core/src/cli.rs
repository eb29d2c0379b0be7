//! Command-line front end: `synth`, `summary`, `cohort`, `train`, `score`,
//! `analyze`, and `pipeline` (train, score and analyze in one step).
//!
//! Exit codes: 0 on success, 1 on a validation or data error, 2 on a usage
//! error. Every command that writes a directory also writes `manifest.json`
//! there.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    analyze, score_all, train, write_report, PipelineConfig, SentimentPopulation, StrataKind, TrainedModel,
};
use crate::chart_features::{encode, Whitelist};
use crate::cohort::{
    build_eol_cohort_with, build_notes_population_with, split_by_race, CohortRules, EOL_MIN_STAY_MINUTES,
    NOTES_MIN_STAY_MINUTES,
};
use crate::data_model::{
    dataset_summary, load_dataset, write_dataset, EhrDataset, LoadOptions, Treatment, ADMISSIONS_FILE,
    CHARTEVENTS_FILE, DURATIONS_FILE, NOTES_FILE, SEVERITY_FILE,
};
use crate::error::{Error, Result};
use crate::noncompliance::{write_labels_csv, NoncompliancePatterns};
use crate::sentiment::{write_sentiment_csv, SentimentLexicon};
use crate::sparse_logreg::{
    read_scores_csv, write_scores_csv, ClassWeight, FitConfig, MistrustModel, DEFAULT_C, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use crate::stats::{MannWhitneyOptions, EXACT_MAX_TOTAL};
use crate::synth::{generate, SynthConfig};
use crate::treatments::{durations_for_cohort, write_durations_csv, DurationOptions, TreatmentDuration, MERGE_GAP_MINUTES};

/// Environment variable consulted when `--data-dir` is not given.
pub const DATA_DIR_ENV: &str = "EOL_MISTRUST_DATA_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "eol-mistrust", version, about = "Mistrust-metric pipeline for end-of-life ICU care")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with known latent mistrust.
    Synth(SynthCmd),
    /// Print table sizes and per-race admission counts as JSON.
    Summary(DataArgs),
    /// Write the end-of-life cohort, its race split, the notes population and durations.
    Cohort(CohortCmd),
    /// Fit the mistrust model on the notes population.
    Train(TrainCmd),
    /// Score every admission with a fitted model.
    Score(ScoreCmd),
    /// Build the disparity report from scores.
    Analyze(AnalyzeCmd),
    /// Train, score and analyze in one run.
    Pipeline(PipelineCmd),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Directory holding admissions.csv and the optional tables.
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: PathBuf,
    /// Fail on the first malformed row instead of rejecting and reporting it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CohortArgs {
    /// Minimum end-of-life stay in minutes (inclusive).
    #[arg(long, default_value_t = EOL_MIN_STAY_MINUTES)]
    pub eol_min_stay: i64,
    /// Minimum notes-population stay in minutes (inclusive).
    #[arg(long, default_value_t = NOTES_MIN_STAY_MINUTES)]
    pub notes_min_stay: i64,
    /// Drop skilled-nursing discharges from the end-of-life cohort.
    #[arg(long)]
    pub exclude_snf: bool,
    /// Spans closer than this many minutes are merged.
    #[arg(long, default_value_t = MERGE_GAP_MINUTES)]
    pub merge_gap: i64,
    /// Do not count absorbed gaps as treatment time.
    #[arg(long)]
    pub exclude_gaps: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeightArg {
    None,
    Balanced,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Inverse L1 regularization strength.
    #[arg(long = "C", alias = "c", default_value_t = DEFAULT_C)]
    pub c: f64,
    /// Relative objective change that counts as converged.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    pub max_iter: usize,
    /// Noncompliance terms, one per line.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// Match only "noncompliant".
    #[arg(long, conflicts_with = "patterns")]
    pub narrow: bool,
    /// Chart item labels to keep, one per line.
    #[arg(long)]
    pub whitelist: Option<PathBuf>,
    /// Keep every observed chart item.
    #[arg(long, conflicts_with = "whitelist")]
    pub all_items: bool,
    #[arg(long, value_enum, default_value_t = ClassWeightArg::None)]
    pub class_weight: ClassWeightArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TreatmentArg {
    Ventilation,
    Vasopressor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrataArg {
    Race,
    Trust,
    Severity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PopulationArg {
    Eol,
    Notes,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Treatments to compare (repeatable); default both.
    #[arg(long = "treatment", value_enum)]
    pub treatments: Vec<TreatmentArg>,
    /// Stratifications, comma-separated; default all three.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub strata: Vec<StrataArg>,
    /// Sentiment lexicon TSV (token<TAB>polarity).
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Population over which sentiment is z-normalized.
    #[arg(long, value_enum, default_value_t = PopulationArg::Eol)]
    pub sentiment_population: PopulationArg,
    /// Largest n1 + n2 tested with the exact Mann-Whitney distribution.
    #[arg(long, default_value_t = EXACT_MAX_TOTAL)]
    pub exact_max_total: usize,
    /// Disable the 0.5 continuity correction of the normal approximation.
    #[arg(long)]
    pub no_continuity_correction: bool,
    /// Features listed per sign in the weight table.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
}

#[derive(Debug, Args)]
pub struct SynthCmd {
    /// Flat key = value config; omitted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config admission count.
    #[arg(long)]
    pub n_admissions: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CohortCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Model CSV written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Scores CSV written by `score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Model CSV; adds the weight table and training counts to the report.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub analyze: AnalyzeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cohort: CohortArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub analyze: AnalyzeArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to repeat one command: inputs with digests, every
/// setting, and the files it produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: Vec<InputFile>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub modules: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

/// Contents of `manifest.json`: one entry per command that wrote into the directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub runs: Vec<RunManifest>,
}

const MODULES: [&str; 11] = [
    "analysis",
    "chart_features",
    "cli",
    "cohort",
    "data_model",
    "noncompliance",
    "sentiment",
    "sparse_logreg",
    "stats",
    "synth",
    "treatments",
];

impl RunManifest {
    fn new(command: &str, config: serde_json::Value) -> Self {
        let version = env!("CARGO_PKG_VERSION").to_string();
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: version.clone(),
            command: command.to_string(),
            inputs: Vec::new(),
            config,
            seed: None,
            modules: MODULES.iter().map(|m| (m.to_string(), version.clone())).collect(),
            outputs: Vec::new(),
        }
    }

    fn add_input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let digest = Sha256::digest(&bytes);
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    fn add_data_dir(&mut self, dir: &Path) -> Result<()> {
        for file in [ADMISSIONS_FILE, CHARTEVENTS_FILE, NOTES_FILE, DURATIONS_FILE, SEVERITY_FILE] {
            let p = dir.join(file);
            if p.exists() {
                self.add_input(&p)?;
            }
        }
        Ok(())
    }

    fn add_output(&mut self, out_dir: &Path, path: &Path) {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        self.outputs.push(rel.display().to_string());
    }

    /// Upserts this run into `dir/manifest.json`, replacing any earlier run of the same command.
    fn write(mut self, dir: &Path) -> Result<()> {
        self.outputs.sort();
        self.outputs.dedup();
        let path = dir.join(MANIFEST_FILE);
        let mut file = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str::<ManifestFile>(&text).unwrap_or_default(),
            Err(_) => ManifestFile::default(),
        };
        file.runs.retain(|r| r.command != self.command);
        file.runs.push(self);
        file.runs.sort_by(|a, b| a.command.cmp(&b.command));
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<ManifestFile> {
    let path = dir.as_ref().join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load(data: &DataArgs) -> Result<EhrDataset> {
    let loaded = load_dataset(&data.data_dir, LoadOptions { strict: data.strict })?;
    if !loaded.diagnostics.is_empty() {
        let mut err = std::io::stderr().lock();
        for d in &loaded.diagnostics {
            let _ = writeln!(err, "warning: rejected row {d}");
        }
        let _ = writeln!(err, "warning: {} row(s) rejected", loaded.diagnostics.len());
    }
    Ok(loaded.dataset)
}

impl CohortArgs {
    fn rules(&self) -> CohortRules {
        CohortRules {
            eol_min_stay_minutes: self.eol_min_stay,
            notes_min_stay_minutes: self.notes_min_stay,
            include_snf: !self.exclude_snf,
        }
    }

    fn durations(&self) -> Result<DurationOptions> {
        if self.merge_gap < 0 {
            return Err(Error::InvalidArgument(format!("--merge-gap must be >= 0, got {}", self.merge_gap)));
        }
        Ok(DurationOptions {
            max_gap_minutes: self.merge_gap,
            count_gaps: !self.exclude_gaps,
        })
    }
}

impl TrainArgs {
    fn patterns(&self) -> Result<NoncompliancePatterns> {
        match (&self.patterns, self.narrow) {
            (Some(p), _) => NoncompliancePatterns::from_file(p),
            (None, true) => Ok(NoncompliancePatterns::narrow()),
            (None, false) => Ok(NoncompliancePatterns::default_terms()),
        }
    }

    fn whitelist(&self) -> Result<Option<Whitelist>> {
        match (&self.whitelist, self.all_items) {
            (Some(p), _) => Whitelist::from_file(p).map(Some),
            (None, true) => Ok(None),
            (None, false) => Ok(Some(Whitelist::interpersonal())),
        }
    }

    fn fit(&self) -> FitConfig {
        FitConfig {
            c: self.c,
            tol: self.tol,
            max_iter: self.max_iter,
            class_weight: match self.class_weight {
                ClassWeightArg::None => ClassWeight::None,
                ClassWeightArg::Balanced => ClassWeight::Balanced,
            },
        }
    }

    fn add_inputs(&self, m: &mut RunManifest) -> Result<()> {
        for p in [&self.patterns, &self.whitelist].into_iter().flatten() {
            m.add_input(p)?;
        }
        Ok(())
    }
}

impl AnalyzeArgs {
    fn apply(&self, cfg: &mut PipelineConfig) -> Result<()> {
        if !self.treatments.is_empty() {
            cfg.treatments = Vec::new();
            for t in &self.treatments {
                let t = match t {
                    TreatmentArg::Ventilation => Treatment::Ventilation,
                    TreatmentArg::Vasopressor => Treatment::Vasopressor,
                };
                if !cfg.treatments.contains(&t) {
                    cfg.treatments.push(t);
                }
            }
        }
        if !self.strata.is_empty() {
            cfg.strata = Vec::new();
            for s in &self.strata {
                let s = match s {
                    StrataArg::Race => StrataKind::Race,
                    StrataArg::Trust => StrataKind::Trust,
                    StrataArg::Severity => StrataKind::Severity,
                };
                if !cfg.strata.contains(&s) {
                    cfg.strata.push(s);
                }
            }
        }
        if let Some(p) = &self.lexicon {
            cfg.lexicon = SentimentLexicon::from_file(p)?;
        }
        cfg.sentiment_population = match self.sentiment_population {
            PopulationArg::Eol => SentimentPopulation::Eol,
            PopulationArg::Notes => SentimentPopulation::Notes,
        };
        cfg.mann_whitney = MannWhitneyOptions {
            exact_max_total: self.exact_max_total,
            continuity_correction: !self.no_continuity_correction,
        };
        if self.top_k == 0 {
            return Err(Error::InvalidArgument("--top-k must be >= 1".into()));
        }
        cfg.top_k = self.top_k;
        Ok(())
    }
}

fn pipeline_config(cohort: &CohortArgs, train: &TrainArgs, analyze: Option<&AnalyzeArgs>) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig {
        rules: cohort.rules(),
        durations: cohort.durations()?,
        fit: train.fit(),
        patterns: train.patterns()?,
        whitelist: train.whitelist()?,
        ..PipelineConfig::default()
    };
    if let Some(a) = analyze {
        a.apply(&mut cfg)?;
    }
    Ok(cfg)
}

fn config_json(parts: &[(&str, serde_json::Value)]) -> serde_json::Value {
    serde_json::Value::Object(parts.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
}

fn to_value(v: impl Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_synth(cmd: &SynthCmd) -> Result<()> {
    let mut cfg = match &cmd.config {
        Some(p) => SynthConfig::from_file(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = cmd.seed {
        cfg.seed = s;
    }
    if let Some(n) = cmd.n_admissions {
        cfg.n_admissions = n;
    }
    cfg.validate()?;
    let (ds, truth) = generate(&cfg)?;
    let out = &cmd.out;
    create_dir(out)?;
    write_dataset(&ds, out)?;
    truth.write_csv(out.join("ground_truth.csv"))?;
    let cfg_path = out.join("synth_config.txt");
    fs::write(&cfg_path, cfg.to_text()).map_err(|e| Error::io(&cfg_path, e))?;

    let mut m = RunManifest::new("synth", to_value(&cfg)?);
    m.seed = Some(cfg.seed);
    if let Some(p) = &cmd.config {
        m.add_input(p)?;
    }
    for f in [ADMISSIONS_FILE, CHARTEVENTS_FILE, NOTES_FILE, DURATIONS_FILE, SEVERITY_FILE, "ground_truth.csv", "synth_config.txt"] {
        m.add_output(out, &out.join(f));
    }
    m.write(out)?;
    eprintln!("wrote {} admissions to {}", ds.admissions().len(), out.display());
    Ok(())
}

fn cmd_summary(data: &DataArgs) -> Result<()> {
    let ds = load(data)?;
    println!("{}", serde_json::to_string_pretty(&dataset_summary(&ds))?);
    Ok(())
}

fn cmd_cohort(cmd: &CohortCmd) -> Result<()> {
    let ds = load(&cmd.data)?;
    let rules = cmd.cohort.rules();
    let opts = cmd.cohort.durations()?;
    let out = &cmd.out;
    create_dir(out)?;
    let eol = build_eol_cohort_with(&ds, &rules);
    let (white, black) = split_by_race(&eol, &ds)?;
    let notes = build_notes_population_with(&ds, &rules);
    let mut m = RunManifest::new(
        "cohort",
        config_json(&[("cohort", to_value(&cmd.cohort)?), ("strict", cmd.data.strict.into())]),
    );
    m.add_data_dir(&cmd.data.data_dir)?;
    for (file, c) in [
        ("eol_cohort.csv", &eol),
        ("eol_white.csv", &white),
        ("eol_black.csv", &black),
        ("notes_population.csv", &notes),
    ] {
        let p = out.join(file);
        c.write_csv(&p)?;
        m.add_output(out, &p);
    }
    let mut rows = Vec::new();
    for t in Treatment::ALL {
        for (id, total_minutes) in durations_for_cohort(&ds, &eol, t, &opts)? {
            rows.push(TreatmentDuration {
                admission_id: id,
                treatment: t,
                total_minutes,
            });
        }
    }
    let p = out.join("treatment_durations.csv");
    write_durations_csv(&p, &rows)?;
    m.add_output(out, &p);
    m.write(out)?;
    eprintln!(
        "eol cohort {} (white {}, black {}), notes population {}",
        eol.len(),
        white.len(),
        black.len(),
        notes.len()
    );
    Ok(())
}

fn write_training_outputs(trained: &TrainedModel, ds: &EhrDataset, out: &Path, m: &mut RunManifest) -> Result<()> {
    let model_path = out.join("model.csv");
    trained.model.write_csv(&model_path)?;
    m.add_output(out, &model_path);
    let vocab_path = out.join("vocabulary.txt");
    trained.vocabulary.write_text(&vocab_path)?;
    m.add_output(out, &vocab_path);
    let labels_path = out.join("labels.csv");
    write_labels_csv(&labels_path, &trained.labels)?;
    m.add_output(out, &labels_path);
    let features_path = out.join("features.csv");
    encode(ds, &trained.population, &trained.vocabulary).write_triplets(&features_path)?;
    m.add_output(out, &features_path);
    Ok(())
}

fn report_training(trained: &TrainedModel) {
    let model = &trained.model;
    if trained.vocabulary.is_empty() {
        eprintln!("warning: empty feature vocabulary; the model is intercept-only");
    }
    if !model.converged {
        eprintln!(
            "warning: solver stopped at max_iter={} before reaching tol; model flagged as not converged",
            model.iterations
        );
    }
    eprintln!(
        "trained on {} admissions ({} noncompliant), {} features, {} nonzero weights, {} iterations",
        trained.population.len(),
        trained.n_positive(),
        trained.vocabulary.len(),
        model.weights.iter().filter(|w| **w != 0.0).count(),
        model.iterations
    );
}

fn cmd_train(cmd: &TrainCmd) -> Result<()> {
    let ds = load(&cmd.data)?;
    let cfg = pipeline_config(&cmd.cohort, &cmd.train, None)?;
    let trained = train(&ds, &cfg)?;
    report_training(&trained);
    let out = &cmd.out;
    create_dir(out)?;
    let mut m = RunManifest::new(
        "train",
        config_json(&[
            ("cohort", to_value(&cmd.cohort)?),
            ("train", to_value(&cmd.train)?),
            ("strict", cmd.data.strict.into()),
        ]),
    );
    m.add_data_dir(&cmd.data.data_dir)?;
    cmd.train.add_inputs(&mut m)?;
    write_training_outputs(&trained, &ds, out, &mut m)?;
    m.write(out)
}

fn cmd_score(cmd: &ScoreCmd) -> Result<()> {
    let ds = load(&cmd.data)?;
    let model = MistrustModel::read_csv(&cmd.model)?;
    let scores = score_all(&ds, &model);
    let out = &cmd.out;
    create_dir(out)?;
    let p = out.join("scores.csv");
    write_scores_csv(&p, &scores)?;
    let mut m = RunManifest::new("score", config_json(&[("strict", cmd.data.strict.into())]));
    m.add_data_dir(&cmd.data.data_dir)?;
    m.add_input(&cmd.model)?;
    m.add_output(out, &p);
    m.write(out)?;
    eprintln!("scored {} admissions", scores.len());
    Ok(())
}

fn write_analysis(
    analysis: &crate::analysis::Analysis,
    out: &Path,
    m: &mut RunManifest,
) -> Result<()> {
    for p in write_report(&analysis.report, out)? {
        m.add_output(out, &p);
    }
    let p = out.join("sentiment_scores.csv");
    write_sentiment_csv(&p, &analysis.sentiment)?;
    m.add_output(out, &p);
    let p = out.join("eol_cohort.csv");
    analysis.eol.write_csv(&p)?;
    m.add_output(out, &p);
    Ok(())
}

fn cmd_analyze(cmd: &AnalyzeCmd) -> Result<()> {
    let ds = load(&cmd.data)?;
    let cfg = pipeline_config(&cmd.cohort, &cmd.train, Some(&cmd.analyze))?;
    let scores = read_scores_csv(&cmd.scores)?;
    let trained = match &cmd.model {
        Some(p) => Some(TrainedModel::reconstruct(&ds, MistrustModel::read_csv(p)?, &cfg)),
        None => None,
    };
    let analysis = analyze(&ds, &scores, trained.as_ref(), &cfg)?;
    let out = &cmd.out;
    create_dir(out)?;
    let mut m = RunManifest::new(
        "analyze",
        config_json(&[
            ("cohort", to_value(&cmd.cohort)?),
            ("train", to_value(&cmd.train)?),
            ("analyze", to_value(&cmd.analyze)?),
            ("strict", cmd.data.strict.into()),
        ]),
    );
    m.add_data_dir(&cmd.data.data_dir)?;
    m.add_input(&cmd.scores)?;
    if let Some(p) = &cmd.model {
        m.add_input(p)?;
    }
    cmd.train.add_inputs(&mut m)?;
    if let Some(p) = &cmd.analyze.lexicon {
        m.add_input(p)?;
    }
    write_analysis(&analysis, out, &mut m)?;
    m.write(out)?;
    eprintln!("report written to {}", out.join("report.json").display());
    Ok(())
}

fn cmd_pipeline(cmd: &PipelineCmd) -> Result<()> {
    let ds = load(&cmd.data)?;
    let cfg = pipeline_config(&cmd.cohort, &cmd.train, Some(&cmd.analyze))?;
    let trained = train(&ds, &cfg)?;
    report_training(&trained);
    let scores = score_all(&ds, &trained.model);
    let analysis = analyze(&ds, &scores, Some(&trained), &cfg)?;

    let out = &cmd.out;
    create_dir(out)?;
    let mut m = RunManifest::new(
        "pipeline",
        config_json(&[
            ("cohort", to_value(&cmd.cohort)?),
            ("train", to_value(&cmd.train)?),
            ("analyze", to_value(&cmd.analyze)?),
            ("strict", cmd.data.strict.into()),
        ]),
    );
    m.add_data_dir(&cmd.data.data_dir)?;
    cmd.train.add_inputs(&mut m)?;
    if let Some(p) = &cmd.analyze.lexicon {
        m.add_input(p)?;
    }
    write_training_outputs(&trained, &ds, out, &mut m)?;
    let p = out.join("scores.csv");
    write_scores_csv(&p, &scores)?;
    m.add_output(out, &p);
    write_analysis(&analysis, out, &mut m)?;
    m.write(out)?;
    eprintln!("report written to {}", out.join("report.json").display());
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(c) => cmd_synth(c),
        Command::Summary(d) => cmd_summary(d),
        Command::Cohort(c) => cmd_cohort(c),
        Command::Train(c) => cmd_train(c),
        Command::Score(c) => cmd_score(c),
        Command::Analyze(c) => cmd_analyze(c),
        Command::Pipeline(c) => cmd_pipeline(c),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(main_with_args(["eol-mistrust", "frobnicate"]), EXIT_USAGE);
        assert_eq!(main_with_args(["eol-mistrust", "synth"]), EXIT_USAGE);
        assert_eq!(main_with_args(["eol-mistrust", "--version"]), EXIT_OK);
    }

    #[test]
    fn flag_defaults_match_library_defaults() {
        let cli = Cli::try_parse_from(["x", "pipeline", "--data-dir", "d", "--out", "o"]).unwrap();
        let Command::Pipeline(p) = cli.command else { panic!() };
        let cfg = pipeline_config(&p.cohort, &p.train, Some(&p.analyze)).unwrap();
        let def = PipelineConfig::default();
        assert_eq!(cfg.rules, def.rules);
        assert_eq!(cfg.durations, def.durations);
        assert_eq!(cfg.fit, def.fit);
        assert_eq!(cfg.treatments, def.treatments);
        assert_eq!(cfg.strata, def.strata);
        assert_eq!(cfg.mann_whitney, def.mann_whitney);
        assert_eq!(cfg.patterns.terms(), def.patterns.terms());
    }
}
