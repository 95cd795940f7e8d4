use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use sign_radar::classifier::StopReason;
use sign_radar::harness::experiment::{
    evaluate, fit, generate_dataset, load_feature_dir, load_model, preprocess_dataset, run_experiment, save_model,
    split_features,
};
use sign_radar::harness::io::{load_snapshot, Manifest};
use sign_radar::harness::{preprocess, PipelineConfig};

/// Multi-person radar sign recognition: simulate, preprocess, train, evaluate.
#[derive(Parser)]
#[command(name = "sign-radar", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset and write its manifest and raw snapshots.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a generated dataset into image triples.
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the training split of a feature directory.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Confusion matrix of a model on the test split.
    Evaluate {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Text report; the CSV matrix goes next to it with a .csv extension.
        #[arg(long)]
        report: PathBuf,
    },
    /// Render one sample's spectrogram image as PGM (and optionally CSV).
    ExportSpectrogram {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = View::Combined)]
        view: View,
        /// Config to use instead of the dataset manifest's.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// generate → preprocess → train → evaluate into the config's output_dir.
    RunAll {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum View {
    Combined,
    Beam1,
    Beam2,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, out } => {
            let cfg = PipelineConfig::from_file(&config)?;
            let manifest = generate_dataset(&cfg, &out)?;
            eprintln!("wrote {} samples to {}", manifest.samples.len(), out.display());
        }
        Command::Preprocess { dataset, out } => {
            let (_, samples) = preprocess_dataset(&dataset, &out)?;
            eprintln!("wrote {} image triples to {}", samples.len(), out.display());
        }
        Command::Train { features, model } => {
            let (cfg, samples) = load_feature_dir(&features)?;
            let (train, _) = split_features(&cfg, &samples)?;
            eprintln!("training on {} samples", train.len());
            let (trained, log) = fit(&cfg, &train, |e| {
                eprintln!("epoch {:3}  loss {:.6}  batch accuracy {:.4}", e.epoch + 1, e.loss, e.accuracy)
            })?;
            if log.stop != StopReason::EpochLimit {
                eprintln!("stopped early: {:?}", log.stop);
            }
            save_model(&trained, &model)?;
        }
        Command::Evaluate { features, model, report } => {
            let (cfg, samples) = load_feature_dir(&features)?;
            let model = load_model(&model)?;
            let (confusion, text) = evaluate(&cfg, &samples, &model)?;
            let dir = report.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            fs::write(&report, &text).with_context(|| format!("writing {}", report.display()))?;
            let csv = report.with_extension("csv");
            fs::write(&csv, confusion.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
            print!("{text}");
        }
        Command::ExportSpectrogram {
            sample,
            out,
            view,
            config,
            csv,
        } => {
            let cfg = match config {
                Some(path) => PipelineConfig::from_file(&path)?,
                None => Manifest::find_for_sample(&sample)?.1.config,
            };
            let s = load_snapshot(&sample, cfg.radar.adc_rate)?;
            let [combined, beam1, beam2] = preprocess(&s, &cfg)?;
            let image = match view {
                View::Combined => combined,
                View::Beam1 => beam1,
                View::Beam2 => beam2,
            };
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            image.write_pgm(BufWriter::new(file))?;
            if let Some(path) = csv {
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                image.write_csv(BufWriter::new(file))?;
            }
        }
        Command::RunAll { config } => {
            let cfg = PipelineConfig::from_file(&config)?;
            let outcome = run_experiment(&cfg, |line| eprintln!("{line}"))?;
            print!("{}", outcome.report);
        }
    }
    Ok(())
}
