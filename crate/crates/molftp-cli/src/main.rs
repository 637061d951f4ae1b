//! `molftp` — featurize molecule datasets, cross-validate with leakage
//! control, audit the leave-one-out bound, flip labels, and generate
//! synthetic corpora.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
//! invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use molftp::config::PipelineConfig;
use molftp::dataset::{read_dataset, read_dataset_all_columns, Dataset};
use molftp::pipeline::{run_audit, run_cv, run_featurize, run_flip, PipelineError};
use molftp::synth::{generate, generation_header, SynthConfig, SynthMode};

#[derive(Parser)]
#[command(
    name = "molftp",
    about = "Fragment-target prevalence featurization with leakage control",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Featurize a dataset and export one vector per molecule.
    Featurize {
        /// Input CSV with columns smiles,label[,extras...].
        #[arg(long)]
        input: PathBuf,
        /// Vector CSV to write.
        #[arg(long, default_value = "vectors.csv")]
        output: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Cross-validate a linear model on the configured features.
    Cv {
        #[arg(long)]
        input: PathBuf,
        /// Aggregate metric report (JSON).
        #[arg(long, default_value = "metrics.json")]
        metrics: PathBuf,
        /// Per-fold metric table (CSV).
        #[arg(long, default_value = "metrics_folds.csv")]
        folds: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Audit the key-LOO approximation against the exact oracle.
    AuditLoo {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "bound_report.csv")]
        output: PathBuf,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Invert a random share of the labels; writes a sidecar mask.
    Flip {
        #[arg(long)]
        input: PathBuf,
        /// Share of labels to invert, in [0, 1].
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "flipped.csv")]
        output: PathBuf,
        /// Mask CSV path; defaults to `<output>.mask.csv`.
        #[arg(long)]
        mask: Option<PathBuf>,
    },
    /// Generate a seeded synthetic dataset.
    GenSynthetic {
        /// Number of molecules.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Per-molecule label noise (planted mode).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Corpus shape: planted | leak-probe.
        #[arg(long, default_value = "planted")]
        mode: String,
        #[arg(long, default_value = "synthetic.csv")]
        output: PathBuf,
    },
}

/// Pipeline settings; each flag overrides the config file and defaults.
#[derive(Args)]
struct ConfigOverrides {
    /// TOML config file with the same keys as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    radius: Option<u8>,
    #[arg(long)]
    sim_threshold: Option<f64>,
    #[arg(long)]
    sim_radius: Option<u8>,
    /// Table mode: presence | count.
    #[arg(long)]
    mode: Option<String>,
    /// 1D statistic: fisher-onetailed | chi2.
    #[arg(long)]
    stat_1d: Option<String>,
    /// Triplet statistic: binomial | friedman.
    #[arg(long)]
    stat_3d: Option<String>,
    /// Pooling: margin-count | max | mean | median | softmax | log-sum-exp.
    #[arg(long)]
    pooling: Option<String>,
    #[arg(long)]
    gate: Option<f64>,
    /// Comma-separated subset of 1d,2d,3d.
    #[arg(long, value_delimiter = ',')]
    views: Option<Vec<String>>,
    /// Leakage strategy: dummy-mask | key-loo | train-only | none.
    #[arg(long)]
    leakage: Option<String>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    c_alpha: Option<f64>,
    #[arg(long)]
    cv_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cap_per_anchor: Option<usize>,
    /// Comma-separated dataset columns appended to each vector.
    #[arg(long, value_delimiter = ',')]
    extra_feature_columns: Option<Vec<String>>,
}

/// Parse an enum flag value through its serialized spelling, accepting
/// kebab-case on the command line for the snake_case config names.
fn variant<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T, PipelineError> {
    let normalized = value.replace('-', "_");
    serde_json::from_value(serde_json::Value::String(normalized))
        .map_err(|_| PipelineError::Conflict(format!("invalid value '{value}' for --{flag}")))
}

fn effective_config(o: &ConfigOverrides) -> Result<PipelineConfig, PipelineError> {
    let mut c = match &o.config {
        Some(path) => PipelineConfig::from_toml_file(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = o.radius {
        c.radius = v;
    }
    if let Some(v) = o.sim_threshold {
        c.sim_threshold = v;
    }
    if let Some(v) = o.sim_radius {
        c.sim_radius = v;
    }
    if let Some(v) = &o.mode {
        c.mode = variant("mode", v)?;
    }
    if let Some(v) = &o.stat_1d {
        c.stat_1d = variant("stat-1d", v)?;
    }
    if let Some(v) = &o.stat_3d {
        c.stat_3d = variant("stat-3d", v)?;
    }
    if let Some(v) = &o.pooling {
        c.pooling = variant("pooling", v)?;
    }
    if let Some(v) = o.gate {
        c.gate = v;
    }
    if let Some(views) = &o.views {
        c.views = views
            .iter()
            .map(|v| variant("views", v))
            .collect::<Result<_, _>>()?;
    }
    if let Some(v) = &o.leakage {
        c.leakage = variant("leakage", v)?;
    }
    if let Some(v) = o.k {
        c.k = v;
    }
    if let Some(v) = o.s {
        c.s = Some(v);
    }
    if let Some(v) = o.c_alpha {
        c.c_alpha = Some(v);
    }
    if let Some(v) = o.cv_k {
        c.cv_k = v;
    }
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.cap_per_anchor {
        c.cap_per_anchor = v;
    }
    if let Some(v) = &o.extra_feature_columns {
        c.extra_feature_columns = v.clone();
    }
    c.validate()?;
    Ok(c)
}

fn load(input: &Path, config: &PipelineConfig) -> Result<Dataset, PipelineError> {
    Ok(read_dataset(input, &config.extra_feature_columns)?)
}

fn summary(value: Option<molftp::modeling::MetricSummary>) -> String {
    value.map_or_else(
        || "undefined".to_string(),
        |s| format!("{:.4} ± {:.4}", s.mean, s.std),
    )
}

fn run(cli: Cli) -> Result<u8, PipelineError> {
    match cli.command {
        Command::Featurize {
            input,
            output,
            overrides,
        } => {
            let config = effective_config(&overrides)?;
            let dataset = load(&input, &config)?;
            let outcome = run_featurize(&dataset, &config, &output)?;
            println!(
                "wrote {} vectors to {} ({:.0} molecules/s)",
                outcome.rows_written,
                output.display(),
                outcome.molecules_per_second
            );
            if outcome.skipped.is_empty() {
                Ok(0)
            } else {
                println!(
                    "skipped {} unparseable rows (see warnings)",
                    outcome.skipped.len()
                );
                Ok(2)
            }
        }
        Command::Cv {
            input,
            metrics,
            folds,
            overrides,
        } => {
            let config = effective_config(&overrides)?;
            let dataset = load(&input, &config)?;
            let outcome = run_cv(&dataset, &config, &metrics, &folds)?;
            println!(
                "cv ({} folds{}, leakage = {}): AUROC {}, AUPRC {}, accuracy {:.4}",
                config.cv_k,
                if outcome.pooled_loo {
                    ", pooled leave-one-out"
                } else {
                    ""
                },
                config.leakage.label(),
                summary(outcome.report.auroc),
                summary(outcome.report.auprc),
                outcome.report.accuracy.mean,
            );
            println!("wrote {} and {}", metrics.display(), folds.display());
            Ok(0)
        }
        Command::AuditLoo {
            input,
            output,
            overrides,
        } => {
            let config = effective_config(&overrides)?;
            let dataset = load(&input, &config)?;
            let outcome = run_audit(&dataset, &config, &output)?;
            println!(
                "fraction_within = {:.4} across {} keys; wrote {}",
                outcome.fraction_within,
                outcome.keys_audited,
                output.display()
            );
            Ok(0)
        }
        Command::Flip {
            input,
            fraction,
            seed,
            output,
            mask,
        } => {
            let dataset = read_dataset_all_columns(&input)?;
            let mask_path = mask.unwrap_or_else(|| {
                let mut name = output.as_os_str().to_owned();
                name.push(".mask.csv");
                PathBuf::from(name)
            });
            let outcome = run_flip(&dataset, fraction, seed, &output, &mask_path)?;
            println!(
                "flipped {} of {} labels; wrote {} and {}",
                outcome.flips,
                dataset.len(),
                output.display(),
                mask_path.display()
            );
            Ok(0)
        }
        Command::GenSynthetic {
            n,
            seed,
            noise,
            mode,
            output,
        } => {
            let mode: SynthMode = variant("mode", &mode)?;
            let config = SynthConfig {
                n_molecules: n,
                seed,
                label_noise: noise,
                mode,
            };
            let dataset = generate(&config)?;
            molftp::dataset::write_dataset(&output, &dataset, &generation_header(&config))?;
            println!("wrote {} molecules to {}", dataset.len(), output.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(3))
        }
    }
}
