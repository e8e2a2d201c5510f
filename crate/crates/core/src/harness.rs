//! k-fold experiment runner and report rendering.
//!
//! Every (classifier, fold) pair is an independent job. Jobs run on the rayon
//! pool and their results are collected in job order, so a report depends
//! only on the config and the data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anfis::{self, AnfisModel, AnfisTrainConfig, RULE_SWEEP};
use crate::classic::{
    forest_fit, knn_fit, mlp_fit, svm_fit, ForestConfig, ForestModel, KernelKind, KnnConfig, KnnModel,
    MlpConfig, MlpModel, SvmConfig, SvmModel,
};
use crate::dataio::{self, Dataset, ANALYTES, DEFAULT_LABEL_COLUMN};
use crate::ensemble::{ensemble_fit, EnsembleConfig, EnsembleModel};
use crate::error::{Error, Result};
use crate::metrics::{
    average_confusion, compute_metrics_with, confusion, fold_average, ConfusionMatrix, InverseRecall,
    MeanConfusion, MetricsRow,
};
use crate::model::Classifier;
use crate::rng::derive_seed;
use crate::sae::{self, SaeTrainConfig, StackedAutoencoder};

/// One entry of the experiment's classifier list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierSpec {
    Knn,
    RandomForest,
    Mlp,
    SvmLinear,
    SvmRbf,
    SvmSigmoid,
    Anfis { rules: usize },
    Sae,
    Ensemble,
}

impl ClassifierSpec {
    /// The five ANFIS models of the rule-count sweep.
    pub fn anfis_sweep() -> Vec<ClassifierSpec> {
        RULE_SWEEP.iter().map(|&rules| ClassifierSpec::Anfis { rules }).collect()
    }

    pub fn name(&self) -> String {
        match self {
            Self::Knn => "KNN".into(),
            Self::RandomForest => "Random Forest".into(),
            Self::Mlp => "MLP".into(),
            Self::SvmLinear => "SVM (linear)".into(),
            Self::SvmRbf => "SVM (RBF)".into(),
            Self::SvmSigmoid => "SVM (sigmoid)".into(),
            Self::Anfis { rules } => match RULE_SWEEP.iter().position(|r| r == rules) {
                Some(i) => format!("ANFIS Model_{} (R={rules})", i + 1),
                None => format!("ANFIS (R={rules})"),
            },
            Self::Sae => "SAE".into(),
            Self::Ensemble => "Ensemble".into(),
        }
    }
}

impl FromStr for ClassifierSpec {
    type Err = Error;

    /// Accepts the CLI model names `knn`, `rf`, `mlp`, `svm` (RBF),
    /// `svm-linear`, `svm-rbf`, `svm-sigmoid`, `anfis`, `anfis-<R>`, `sae`
    /// and `ensemble`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = match s {
            "knn" => Self::Knn,
            "rf" | "random-forest" => Self::RandomForest,
            "mlp" => Self::Mlp,
            "svm" | "svm-rbf" => Self::SvmRbf,
            "svm-linear" => Self::SvmLinear,
            "svm-sigmoid" => Self::SvmSigmoid,
            "anfis" => Self::Anfis {
                rules: AnfisTrainConfig::default().n_rules,
            },
            "sae" => Self::Sae,
            "ensemble" => Self::Ensemble,
            other => match other.strip_prefix("anfis-").map(str::parse) {
                Some(Ok(rules)) => Self::Anfis { rules },
                _ => return Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
            },
        };
        Ok(spec)
    }
}

/// Hyperparameters for every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfigs {
    pub knn: KnnConfig,
    pub random_forest: ForestConfig,
    pub mlp: MlpConfig,
    /// Shared by the three SVM variants; the kernel field is overridden.
    pub svm: SvmConfig,
    /// `n_rules` is overridden by the classifier entry.
    pub anfis: AnfisTrainConfig,
    pub sae: SaeTrainConfig,
    pub ensemble: EnsembleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub label_column: String,
    pub features: Vec<String>,
    pub seed: u64,
    pub folds: usize,
    pub output_dir: Option<PathBuf>,
    pub classifiers: Vec<ClassifierSpec>,
    pub models: ModelConfigs,
    pub inverse_recall: InverseRecall,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut classifiers = vec![
            ClassifierSpec::Knn,
            ClassifierSpec::RandomForest,
            ClassifierSpec::Mlp,
            ClassifierSpec::SvmLinear,
            ClassifierSpec::SvmRbf,
            ClassifierSpec::SvmSigmoid,
        ];
        classifiers.extend(ClassifierSpec::anfis_sweep());
        classifiers.extend([ClassifierSpec::Sae, ClassifierSpec::Ensemble]);
        Self {
            dataset: PathBuf::from("data/san_raphael.csv"),
            label_column: DEFAULT_LABEL_COLUMN.into(),
            features: ANALYTES.iter().map(|s| s.to_string()).collect(),
            seed: 42,
            folds: 5,
            output_dir: None,
            classifiers,
            models: ModelConfigs::default(),
            inverse_recall: InverseRecall::default(),
        }
    }
}

/// Overlays `patch` onto `base`, recursing into objects; any other value
/// in `patch` replaces the one in `base`.
fn merge_json(base: &mut serde_json::Value, patch: serde_json::Value) {
    use serde_json::Value;
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

impl ExperimentConfig {
    /// Parses a config in which every field is optional. Nested blocks are
    /// merged with the defaults, so `{"models": {"sae": {"fine_tune":
    /// {"epochs": 20}}}}` changes only that one value.
    pub fn from_json(text: &str) -> Result<Self> {
        let patch: serde_json::Value = serde_json::from_str(text)?;
        let mut merged = serde_json::to_value(Self::default())?;
        merge_json(&mut merged, patch);
        Ok(serde_json::from_value(merged)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| e.context(format!("parsing config {}", path.display())))
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter("fold count must be at least 2".into()));
        }
        if self.features.is_empty() {
            return Err(Error::EmptySelection);
        }
        for spec in &self.classifiers {
            if let ClassifierSpec::Anfis { rules: 0 } = spec {
                return Err(Error::InvalidParameter("ANFIS needs at least one rule".into()));
            }
        }
        self.models.anfis.validate()?;
        self.models.sae.validate()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Any trained model, tagged by family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TrainedModel {
    Knn(KnnModel),
    RandomForest(ForestModel),
    Mlp(MlpModel),
    Svm(SvmModel),
    Anfis(AnfisModel),
    Sae(StackedAutoencoder),
    Ensemble(EnsembleModel),
}

impl Classifier for TrainedModel {
    fn predict(&self, x: &[f64]) -> Result<u8> {
        match self {
            Self::Knn(m) => m.predict(x),
            Self::RandomForest(m) => m.predict(x),
            Self::Mlp(m) => m.predict(x),
            Self::Svm(m) => m.predict(x),
            Self::Anfis(m) => m.predict(x),
            Self::Sae(m) => m.predict(x),
            Self::Ensemble(m) => Classifier::predict(m, x),
        }
    }
}

/// Trains one classifier on the dataset rows at `train`.
pub fn train_model(
    spec: ClassifierSpec,
    models: &ModelConfigs,
    dataset: &Dataset,
    train: &[usize],
    seed: u64,
) -> Result<TrainedModel> {
    let (x, y) = dataset.subset(train);
    let svm = |kernel: KernelKind| -> Result<TrainedModel> {
        let cfg = SvmConfig {
            kernel,
            ..models.svm
        };
        Ok(TrainedModel::Svm(svm_fit(&x, &y, &cfg)?))
    };
    match spec {
        ClassifierSpec::Knn => Ok(TrainedModel::Knn(knn_fit(&x, &y, &models.knn)?)),
        ClassifierSpec::RandomForest => Ok(TrainedModel::RandomForest(forest_fit(
            &x,
            &y,
            &models.random_forest,
            seed,
        )?)),
        ClassifierSpec::Mlp => Ok(TrainedModel::Mlp(mlp_fit(&x, &y, &models.mlp, seed)?)),
        ClassifierSpec::SvmLinear => svm(KernelKind::Linear),
        ClassifierSpec::SvmRbf => svm(KernelKind::Rbf),
        ClassifierSpec::SvmSigmoid => svm(KernelKind::Sigmoid),
        ClassifierSpec::Anfis { rules } => {
            let cfg = AnfisTrainConfig {
                n_rules: rules,
                ..models.anfis
            };
            Ok(TrainedModel::Anfis(anfis::fit(&x, &y, &cfg, seed)?))
        }
        ClassifierSpec::Sae => Ok(TrainedModel::Sae(sae::fit(&x, &y, &models.sae, seed)?.0)),
        ClassifierSpec::Ensemble => Ok(TrainedModel::Ensemble(ensemble_fit(
            &x,
            &y,
            &models.ensemble,
            seed,
        )?)),
    }
}

/// Seed handed to the model trained on `fold`; identical for every
/// classifier so that results do not depend on list order.
pub fn fold_model_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, 1000 + fold as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub folds: usize,
    pub config_hash: String,
    pub dataset_hash: String,
    pub n_samples: usize,
    pub features: Vec<String>,
    pub inverse_recall: InverseRecall,
    /// Class balance of each test fold (folds are not stratified).
    pub fold_balance: Vec<FoldBalance>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldBalance {
    pub size: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub name: String,
    pub spec: ClassifierSpec,
    pub train_folds: Vec<MetricsRow>,
    pub test_folds: Vec<MetricsRow>,
    pub train_average: MetricsRow,
    pub test_average: MetricsRow,
    pub train_confusion: Vec<ConfusionMatrix>,
    pub test_confusion: Vec<ConfusionMatrix>,
    pub mean_train_confusion: MeanConfusion,
    pub mean_test_confusion: MeanConfusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub provenance: Provenance,
    pub classifiers: Vec<ClassifierReport>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn classifier(&self, name: &str) -> Option<&ClassifierReport> {
        self.classifiers.iter().find(|c| c.name == name)
    }
}

/// Loads, selects and normalizes the configured dataset.
pub fn load_dataset(config: &ExperimentConfig) -> Result<(Dataset, String)> {
    let path = &config.dataset;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let table = dataio::read_csv(bytes.as_slice(), &config.label_column)
        .map_err(|e| e.context(format!("reading {}", path.display())))?;
    let table = dataio::select_columns(&table, &config.features)?;
    Ok((dataio::impute_and_normalize(&table)?, sha256_hex(&bytes)))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let (dataset, dataset_hash) = load_dataset(config)?;
    run_with_hash(config, &dataset, dataset_hash)
}

/// Runs the experiment on an already prepared dataset. The dataset hash is
/// taken over its JSON serialization.
pub fn run_on_dataset(config: &ExperimentConfig, dataset: &Dataset) -> Result<ExperimentReport> {
    config.validate()?;
    let hash = sha256_hex(dataset.to_json()?.as_bytes());
    run_with_hash(config, dataset, hash)
}

struct FoldOutcome {
    train: ConfusionMatrix,
    test: ConfusionMatrix,
    warning: Option<String>,
}

fn run_fold(
    spec: ClassifierSpec,
    config: &ExperimentConfig,
    dataset: &Dataset,
    train: &[usize],
    test: &[usize],
    fold: usize,
) -> Result<FoldOutcome> {
    tracing::debug!(classifier = %spec.name(), fold = fold + 1, "training");
    let model = train_model(spec, &config.models, dataset, train, fold_model_seed(config.seed, fold))?;
    let evaluate = |idx: &[usize]| -> Result<ConfusionMatrix> {
        let (x, y) = dataset.subset(idx);
        confusion(&model.predict_rows(&x)?, &y)
    };
    let warning = match &model {
        TrainedModel::Svm(m) if !m.converged => Some(format!(
            "{} fold {}: SMO stopped after {} iterations without meeting the tolerance",
            spec.name(),
            fold + 1,
            m.iterations
        )),
        _ => None,
    };
    Ok(FoldOutcome {
        train: evaluate(train)?,
        test: evaluate(test)?,
        warning,
    })
}

fn run_with_hash(config: &ExperimentConfig, dataset: &Dataset, dataset_hash: String) -> Result<ExperimentReport> {
    let plan = dataio::make_folds(dataset.n_samples(), config.folds, config.seed)?;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..plan.k)
        .map(|f| (plan.train_indices(f), plan.test_indices(f).to_vec()))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..config.classifiers.len())
        .flat_map(|c| (0..plan.k).map(move |f| (c, f)))
        .collect();
    let outcomes: Vec<Result<FoldOutcome>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let spec = config.classifiers[c];
            run_fold(spec, config, dataset, &splits[f].0, &splits[f].1, f)
                .map_err(|e| e.context(format!("{} fold {}", spec.name(), f + 1)))
        })
        .collect();

    let mut outcomes = outcomes.into_iter();
    let mut classifiers = Vec::with_capacity(config.classifiers.len());
    let mut warnings = Vec::new();
    for &spec in &config.classifiers {
        let mut train_confusion = Vec::with_capacity(plan.k);
        let mut test_confusion = Vec::with_capacity(plan.k);
        for _ in 0..plan.k {
            let o = outcomes.next().expect("one outcome per job")?;
            train_confusion.push(o.train);
            test_confusion.push(o.test);
            warnings.extend(o.warning);
        }
        let rows = |cms: &[ConfusionMatrix]| -> Result<Vec<MetricsRow>> {
            cms.iter()
                .map(|cm| compute_metrics_with(cm, config.inverse_recall))
                .collect()
        };
        let train_folds = rows(&train_confusion)?;
        let test_folds = rows(&test_confusion)?;
        classifiers.push(ClassifierReport {
            name: spec.name(),
            spec,
            train_average: fold_average(&train_folds)?,
            test_average: fold_average(&test_folds)?,
            mean_train_confusion: average_confusion(&train_confusion)?,
            mean_test_confusion: average_confusion(&test_confusion)?,
            train_folds,
            test_folds,
            train_confusion,
            test_confusion,
        });
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }

    Ok(ExperimentReport {
        provenance: Provenance {
            seed: config.seed,
            folds: plan.k,
            config_hash: config.hash(),
            dataset_hash,
            n_samples: dataset.n_samples(),
            features: dataset.feature_names.clone(),
            inverse_recall: config.inverse_recall,
            fold_balance: plan
                .folds
                .iter()
                .map(|f| FoldBalance {
                    size: f.len(),
                    positives: f.iter().filter(|&&i| dataset.labels[i] == 1).count(),
                })
                .collect(),
        },
        classifiers,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::UnknownFormat(s.to_string())),
        }
    }
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            Self::Markdown => "md",
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

const METRIC_NAMES: [&str; 4] = ["Accuracy", "Precision", "Recall", "F1-Score"];

fn inverse_label(mode: InverseRecall) -> &'static str {
    match mode {
        InverseRecall::Specificity => "Specificity",
        InverseRecall::AsPrinted => "Inverse recall (as printed)",
    }
}

fn metric_values(row: &MetricsRow) -> [Option<f64>; 5] {
    [row.accuracy, row.precision, row.recall, row.f1, row.inverse_recall]
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn metric_labels(mode: InverseRecall) -> [&'static str; 5] {
    let [a, p, r, f] = METRIC_NAMES;
    [a, p, r, f, inverse_label(mode)]
}

fn markdown_table(out: &mut String, folds: &[MetricsRow], average: &MetricsRow, mode: InverseRecall) {
    out.push_str("| Metric |");
    for f in 1..=folds.len() {
        let _ = write!(out, " Fold-{f} |");
    }
    out.push_str(" Average |\n|---|");
    out.push_str(&"---:|".repeat(folds.len() + 1));
    out.push('\n');
    for (m, label) in metric_labels(mode).iter().enumerate() {
        let _ = write!(out, "| {label} |");
        for row in folds {
            let _ = write!(out, " {} |", cell(metric_values(row)[m]));
        }
        let _ = writeln!(out, " {} |", cell(metric_values(average)[m]));
    }
}

fn render_markdown(report: &ExperimentReport) -> String {
    let p = &report.provenance;
    let mode = p.inverse_recall;
    let mut out = String::from("# Classifier comparison\n\n");
    let _ = writeln!(
        out,
        "seed {} · {} folds · {} samples · config `{}` · dataset `{}`\n",
        p.seed, p.folds, p.n_samples, p.config_hash, p.dataset_hash
    );
    let balance: Vec<String> = p
        .fold_balance
        .iter()
        .enumerate()
        .map(|(i, b)| format!("Fold-{} {}/{}", i + 1, b.positives, b.size))
        .collect();
    let _ = writeln!(out, "positives per test fold: {}\n", balance.join(", "));
    out.push_str("| Classifier |");
    for label in metric_labels(mode) {
        let _ = write!(out, " {label} |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(5));
    out.push('\n');
    for c in &report.classifiers {
        let _ = write!(out, "| {} |", c.name);
        for v in metric_values(&c.test_average) {
            let _ = write!(out, " {} |", cell(v));
        }
        out.push('\n');
    }
    for c in &report.classifiers {
        let _ = writeln!(out, "\n## {}\n\n### Train\n", c.name);
        markdown_table(&mut out, &c.train_folds, &c.train_average, mode);
        out.push_str("\n### Test\n\n");
        markdown_table(&mut out, &c.test_folds, &c.test_average, mode);
        let m = &c.mean_test_confusion;
        let _ = writeln!(
            out,
            "\nMean test confusion: TN {:.1}, FP {:.1}, FN {:.1}, TP {:.1}",
            m.tn, m.fp, m.fn_, m.tp
        );
    }
    if !report.classifiers.is_empty() {
        out.push_str("\n---\n\n");
        out.push_str(match mode {
            InverseRecall::Specificity => "Specificity is TN / (TN + FP).",
            InverseRecall::AsPrinted => {
                "The inverse-recall column uses TP / (TP + FN) and therefore repeats recall."
            }
        });
        out.push_str(" `n/a` marks a ratio with a zero denominator; averages skip such folds.\n");
    }
    for w in &report.warnings {
        let _ = writeln!(out, "\n> warning: {w}");
    }
    out
}

fn render_csv(report: &ExperimentReport) -> String {
    let k = report.provenance.folds;
    let mut out = String::from("classifier,split,metric");
    for f in 1..=k {
        let _ = write!(out, ",Fold-{f}");
    }
    out.push_str(",Average\n");
    let num = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v}"));
    for c in &report.classifiers {
        for (split, folds, avg) in [
            ("train", &c.train_folds, &c.train_average),
            ("test", &c.test_folds, &c.test_average),
        ] {
            for (m, label) in metric_labels(report.provenance.inverse_recall).iter().enumerate() {
                let _ = write!(out, "\"{}\",{split},{label}", c.name);
                for row in folds {
                    let _ = write!(out, ",{}", num(metric_values(row)[m]));
                }
                let _ = writeln!(out, ",{}", num(metric_values(avg)[m]));
            }
        }
    }
    out
}

pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report)? + "\n",
    })
}

pub fn parse_report(json: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(json)?)
}

/// Writes `report.{json,md,csv}` into `dir`.
pub fn write_reports(report: &ExperimentReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for format in [ReportFormat::Json, ReportFormat::Markdown, ReportFormat::Csv] {
        let path = dir.join(format!("report.{}", format.extension()));
        std::fs::write(&path, render_report(report, format)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// A trained model together with the configuration and seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub spec: ClassifierSpec,
    pub seed: u64,
    pub config: ModelConfigs,
    pub feature_names: Vec<String>,
    pub model: TrainedModel,
}
