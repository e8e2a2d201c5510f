use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use hemobench::dataio::{self, ANALYTES, DEFAULT_LABEL_COLUMN};
use hemobench::harness::{
    self, ClassifierSpec, ExperimentConfig, ModelArtifact, ModelConfigs, ReportFormat,
};
use hemobench::metrics::{compute_metrics, confusion};
use hemobench::stats;
use hemobench::Classifier;

#[derive(Parser)]
#[command(name = "hemobench", version, about = "Blood-test COVID-19 classifier workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run k-fold cross-validation for every configured classifier.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Covariance spectrum and Pearson correlation of the feature columns.
    Stats {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
        label_column: String,
        /// Comma-separated feature columns (default: the ten analytes).
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        /// Number of label-correlated features to list.
        #[arg(long, default_value_t = 5)]
        top: usize,
        /// Write the correlation matrix CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model on the whole dataset and save it as JSON.
    Train {
        /// anfis, anfis-<R>, knn, rf, mlp, svm, svm-linear, svm-sigmoid, sae or ensemble.
        #[arg(long)]
        model: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = DEFAULT_LABEL_COLUMN)]
        label_column: String,
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        /// Experiment config whose `models` block supplies hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-render a JSON report.
    Report {
        #[arg(long)]
        input: PathBuf,
        /// md, csv or json.
        #[arg(long, default_value = "md")]
        format: String,
    },
}

fn feature_list(features: Option<Vec<String>>) -> Vec<String> {
    features.unwrap_or_else(|| ANALYTES.iter().map(|s| s.to_string()).collect())
}

fn load(data: &PathBuf, label_column: &str, features: &[String]) -> Result<dataio::Dataset> {
    let table = dataio::load_csv(data, label_column)?;
    let table = dataio::select_columns(&table, features)?;
    Ok(dataio::impute_and_normalize(&table)?)
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if out.is_some() {
                cfg.output_dir = out;
            }
            let report = harness::run_experiment(&cfg)?;
            match &cfg.output_dir {
                Some(dir) => {
                    harness::write_reports(&report, dir)?;
                    eprintln!("reports written to {}", dir.display());
                }
                None => print!("{}", harness::render_report(&report, ReportFormat::Json)?),
            }
        }
        Command::Stats {
            data,
            label_column,
            features,
            top,
            out,
        } => {
            let features = feature_list(features);
            let ds = load(&data, &label_column, &features)?;
            let cov = stats::covariance(&ds.features)?;
            let spectrum = stats::eigen_spectrum(&cov)?;
            println!("samples: {}", ds.n_samples());
            println!("covariance eigenvalues ({} sweeps):", spectrum.sweeps);
            for v in &spectrum.values {
                println!("  {v:.6e}");
            }
            let corr = stats::pearson_matrix(&ds.features, &ds.labels)?;
            let chosen = stats::select_top_features(&corr, top.min(ds.n_features()))?;
            println!("features most correlated with the label:");
            let p = ds.n_features();
            for j in chosen {
                println!("  {:<12} {:+.4}", ds.feature_names[j], corr.get(j, p));
            }
            let mut names = ds.feature_names.clone();
            names.push(label_column);
            let csv = corr.to_csv(Some(&names));
            match out {
                Some(path) => std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                None => print!("\n{csv}"),
            }
        }
        Command::Train {
            model,
            data,
            label_column,
            features,
            config,
            seed,
            out,
        } => {
            let spec: ClassifierSpec = model.parse()?;
            let models = match config {
                Some(path) => ExperimentConfig::load(path)?.models,
                None => ModelConfigs::default(),
            };
            let ds = load(&data, &label_column, &feature_list(features))?;
            let all: Vec<usize> = (0..ds.n_samples()).collect();
            let trained = harness::train_model(spec, &models, &ds, &all, seed)?;
            let cm = confusion(&trained.predict_rows(&ds.features)?, &ds.labels)?;
            if let Some(acc) = compute_metrics(&cm)?.accuracy {
                eprintln!("{}: training accuracy {acc:.4}", spec.name());
            }
            let artifact = ModelArtifact {
                spec,
                seed,
                config: models,
                feature_names: ds.feature_names.clone(),
                model: trained,
            };
            write_or_print(out.as_ref(), &(serde_json::to_string_pretty(&artifact)? + "\n"))?;
        }
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            let text = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = harness::parse_report(&text)?;
            print!("{}", harness::render_report(&report, format)?);
        }
    }
    Ok(())
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("HEMOBENCH_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
