//! `leafdx` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};
use leafdx_core::classifier::{evaluate, load_model, save_model, train_with_history, TrainingConfig};
use leafdx_core::features::CSV_HEADER;
use leafdx_core::pipeline::{load_corpus, run_pipeline, AnalysisConfig, PipelineError};
use leafdx_core::synth::{generate_corpus, generate_leaf, spot_count_for_seed, truth_path};
use leafdx_core::{DiseaseClass, MlpModel};
use serde::Deserialize;

use crate::config::{AnalysisSection, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
/// Malformed flags or missing input files.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "leafdx", version, about = "Rice leaf spot diagnosis and icon knowledge service")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic train/test corpus with ground-truth masks.
    GenCorpus {
        /// Training images per class.
        #[arg(long)]
        train: usize,
        /// Test images per class.
        #[arg(long)]
        test: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one synthetic leaf image (PPM) and its truth mask.
    GenImage {
        #[arg(long, value_parser = parse_class)]
        class: DiseaseClass,
        #[arg(long)]
        seed: u64,
        /// Defaults to the corpus spot count for the seed.
        #[arg(long)]
        spots: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the spot classifier on a corpus's training split.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// TOML file whose `[analysis]` table overrides the image settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        h1: Option<usize>,
        #[arg(long)]
        h2: Option<usize>,
        #[arg(long)]
        l2: Option<f64>,
    },
    /// Diagnose images.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print one JSON object per image instead of text.
        #[arg(long)]
        json: bool,
        /// Also write per-spot features as CSV.
        #[arg(long)]
        features_csv: Option<PathBuf>,
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Report accuracy on a corpus's test split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_class(s: &str) -> Result<DiseaseClass, String> {
    DiseaseClass::from_slug(s).ok_or_else(|| format!("unknown class {s:?}; use leafblast or brownspot"))
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Failure(e)
    }
}

fn require_file(p: &Path) -> Result<(), CliError> {
    if p.is_file() { Ok(()) } else { Err(CliError::Usage(format!("no such file: {}", p.display()))) }
}

fn require_dir(p: &Path) -> Result<(), CliError> {
    if p.is_dir() { Ok(()) } else { Err(CliError::Usage(format!("no such directory: {}", p.display()))) }
}

#[derive(Deserialize)]
struct AnalysisOnly {
    #[serde(default)]
    analysis: AnalysisSection,
}

fn analysis_config(path: Option<&Path>) -> Result<AnalysisConfig<f64>, CliError> {
    let Some(path) = path else { return Ok(AnalysisConfig::default()) };
    require_file(path)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed: AnalysisOnly = toml::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(parsed.analysis.to_analysis()?)
}

fn read_model(path: &Path) -> Result<MlpModel<f64>, CliError> {
    require_file(path)?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_model(&bytes).with_context(|| format!("loading {}", path.display())).map_err(CliError::Failure)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Failure(e)) => {
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::GenCorpus { train, test, seed, out } => {
            if train == 0 || test == 0 {
                return Err(CliError::Usage("--train and --test must be at least 1".into()));
            }
            let m = generate_corpus(train, test, seed, &out).context("generating corpus")?;
            println!("wrote {} images and manifest.csv to {}", m.entries.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::GenImage { class, seed, spots, out } => {
            let g = generate_leaf(class, spots.unwrap_or_else(|| spot_count_for_seed(seed)), seed)
                .context("generating image")?;
            std::fs::write(&out, g.image.to_ppm()).with_context(|| format!("writing {}", out.display()))?;
            std::fs::write(truth_path(&out), g.spot_mask.to_pgm()).context("writing truth mask")?;
            println!("wrote {} ({class}, {} spots)", out.display(), g.spots.len());
            Ok(EXIT_OK)
        }
        Command::Train { corpus, out, config, epochs, learning_rate, batch_size, seed, h1, h2, l2 } => {
            require_dir(&corpus)?;
            let analysis = analysis_config(config.as_deref())?;
            let d = TrainingConfig::default();
            let tc = TrainingConfig {
                epochs: epochs.unwrap_or(d.epochs),
                learning_rate: learning_rate.unwrap_or(d.learning_rate),
                batch_size: batch_size.unwrap_or(d.batch_size),
                seed: seed.unwrap_or(d.seed),
                h1: h1.unwrap_or(d.h1),
                h2: h2.unwrap_or(d.h2),
                l2: l2.unwrap_or(d.l2),
            };
            tc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let t = Instant::now();
            let data = load_corpus::<f64>(&corpus, &analysis).context("loading corpus")?;
            let (model, history) = train_with_history(&data.train, &tc).context("training")?;
            std::fs::write(&out, save_model(&model)).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "trained on {} spots from {} images; final loss {:.5}; {:.1}s",
                data.train.len(),
                data.train_images,
                history.epoch_loss.last().copied().unwrap_or(f64::NAN),
                t.elapsed().as_secs_f64()
            );
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
        Command::Classify { model, config, json, features_csv, images } => {
            let model = read_model(&model)?;
            let analysis = analysis_config(config.as_deref())?;
            for p in &images {
                require_file(p)?;
            }
            let mut csv_rows = vec![format!("image,{CSV_HEADER}")];
            let mut failed = false;
            for p in &images {
                let id = p.display().to_string();
                let bytes = std::fs::read(p).with_context(|| format!("reading {id}"))?;
                match run_pipeline(&bytes, &id, &analysis, &model) {
                    Ok(out) => {
                        for (f, pred) in out.features.iter().zip(&out.diagnosis.spot_predictions) {
                            csv_rows.push(format!("{id},{}", f.to_csv_row(pred.predicted_class.slug())));
                        }
                        let d = &out.diagnosis;
                        if json {
                            let v = crate::http::DiagnosisResponse::from_output(out.clone());
                            println!("{}", serde_json::to_string(&v).context("encoding json")?);
                        } else {
                            println!(
                                "{id}\t{}\tconfidence={:.3}\tspots={}\tvotes={}/{}",
                                d.final_class,
                                d.confidence,
                                d.spot_predictions.len(),
                                d.votes[0],
                                d.votes[1]
                            );
                        }
                    }
                    Err(PipelineError::Undiagnosable { .. }) => {
                        if json {
                            println!("{}", serde_json::json!({ "image_id": id, "final_class": null, "spot_count": 0 }));
                        } else {
                            println!("{id}\tundiagnosable\tspots=0");
                        }
                    }
                    Err(e) => {
                        eprintln!("error: {id}: {e}");
                        failed = true;
                    }
                }
            }
            if let Some(path) = features_csv {
                std::fs::write(&path, csv_rows.join("\n") + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if failed { EXIT_FAILURE } else { EXIT_OK })
        }
        Command::Evaluate { model, corpus, config, csv } => {
            let model = read_model(&model)?;
            require_dir(&corpus)?;
            let analysis = analysis_config(config.as_deref())?;
            let data = load_corpus::<f64>(&corpus, &analysis).context("loading corpus")?;
            let (report, _) = evaluate(&model, &data.test).context("evaluating")?;
            print!("{}", report.to_text());
            if let Some(path) = csv {
                std::fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("image_accuracy={:.2}", 100.0 * report.image_accuracy());
            Ok(EXIT_OK)
        }
        Command::Serve { config } => {
            require_file(&config)?;
            let cfg = PipelineConfig::load(&config)?;
            crate::serve(cfg)?;
            Ok(EXIT_OK)
        }
    }
}
