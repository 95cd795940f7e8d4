//! generate → preprocess → split → train → confusion matrix.
//!
//! Output directory layout:
//!
//! ```text
//! <output_dir>/dataset/manifest.txt     (+ samples/*.bin with save_samples)
//! <output_dir>/features/features.bin
//! <output_dir>/features/config.txt
//! <output_dir>/model.bin
//! <output_dir>/report.txt
//! <output_dir>/confusion.csv
//! ```

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;

use super::config::PipelineConfig;
use super::io::{
    load_features, load_snapshot, save_features, save_snapshot, Manifest, ManifestEntry, FEATURES_CONFIG_FILE,
};
use super::pipeline::{build_features, generate_sample, plan, preprocess, SampleTriple};
use super::split::split;
use crate::classifier::{confusion_matrix, train_with, ClassifierModel, ConfusionMatrix, EpochLog, Example, TrainLog};
use crate::seed::derive;
use crate::{Error, Result};

const INIT_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
const SPLIT_STREAM: u64 = 3;

/// Train/test partition of a feature set under `cfg`'s seed and ratio.
pub fn split_features(cfg: &PipelineConfig, samples: &[SampleTriple]) -> Result<(Vec<Example>, Vec<Example>)> {
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let (train, test) = split(&labels, cfg.split_ratio, derive(cfg.seed, &[SPLIT_STREAM]))?;
    Ok((
        train.iter().map(|&i| samples[i].to_example()).collect(),
        test.iter().map(|&i| samples[i].to_example()).collect(),
    ))
}

/// Freshly initialized model and training config for `cfg`.
pub fn model_and_train_config(cfg: &PipelineConfig) -> Result<(ClassifierModel, crate::classifier::TrainConfig)> {
    let model = ClassifierModel::new(cfg.topology()?, derive(cfg.seed, &[INIT_STREAM]))?;
    let mut train = cfg.train.clone();
    train.seed = derive(cfg.seed, &[TRAIN_STREAM]);
    Ok((model, train))
}

/// Trains a model on `train`, reporting each epoch to `on_epoch`.
pub fn fit(cfg: &PipelineConfig, train: &[Example], on_epoch: impl FnMut(&EpochLog)) -> Result<(ClassifierModel, TrainLog)> {
    let (mut model, tc) = model_and_train_config(cfg)?;
    let log = train_with(&mut model, train, &tc, on_epoch).map_err(|e| e.context("training"))?;
    Ok((model, log))
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub model: ClassifierModel,
    pub train_log: TrainLog,
    pub confusion: ConfusionMatrix,
    pub train_size: usize,
    pub test_size: usize,
    pub report: String,
}

impl ExperimentOutcome {
    pub fn accuracy(&self) -> f64 {
        self.confusion.accuracy()
    }
}

/// Plain-text report: setup, training trace and the confusion table.
pub fn render_report(cfg: &PipelineConfig, log: Option<&TrainLog>, confusion: &ConfusionMatrix, train_size: usize) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sign-radar experiment report");
    let _ = writeln!(
        s,
        "samples: {} per class per pair x {} pairs x 9 classes; train {train_size}, test {}",
        cfg.samples_per_class,
        cfg.subject_pairs,
        confusion.total()
    );
    let _ = writeln!(
        s,
        "array: {} elements at {} wavelengths; look angles {} deg and {} deg; SNR {} dB per element",
        cfg.num_elements, cfg.spacing_wavelengths, cfg.theta1_deg, cfg.theta2_deg, cfg.snr_db
    );
    let _ = writeln!(s, "seed: {}", cfg.seed);
    if let Some(log) = log {
        let _ = writeln!(s, "training: {} epochs, stopped by {:?}", log.epochs.len(), log.stop);
        for e in &log.epochs {
            let _ = write!(s, "  epoch {:3}  loss {:.6}  batch accuracy {:.4}", e.epoch + 1, e.loss, e.accuracy);
            if let Some(a) = e.eval_accuracy {
                let _ = write!(s, "  train accuracy {a:.4}");
            }
            s.push('\n');
        }
    }
    s.push('\n');
    s.push_str(&confusion.render_table());
    s
}

pub fn write_report(dir: &Path, report: &str, confusion: &ConfusionMatrix) -> Result<()> {
    fs::write(dir.join("report.txt"), report)?;
    fs::write(dir.join("confusion.csv"), confusion.to_csv())?;
    Ok(())
}

/// Trains and evaluates on already preprocessed samples, without touching
/// the file system.
pub fn run_on_features(
    cfg: &PipelineConfig,
    samples: &[SampleTriple],
    on_epoch: impl FnMut(&EpochLog),
) -> Result<ExperimentOutcome> {
    let (train, test) = split_features(cfg, samples)?;
    let (model, log) = fit(cfg, &train, on_epoch)?;
    let confusion = confusion_matrix(&model, &test)?;
    let report = render_report(cfg, Some(&log), &confusion, train.len());
    Ok(ExperimentOutcome {
        model,
        train_log: log,
        confusion,
        train_size: train.len(),
        test_size: test.len(),
        report,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))
}

/// Full experiment writing every artifact under `cfg.output_dir`.
/// `progress` receives one line per stage and per epoch.
pub fn run_experiment(cfg: &PipelineConfig, mut progress: impl FnMut(&str)) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let out = &cfg.output_dir;
    let dataset_dir = out.join("dataset");
    let features_dir = out.join("features");
    create_dir(&dataset_dir)?;
    create_dir(&features_dir)?;

    let plans = plan(cfg)?;
    let manifest = manifest_for(cfg)?;
    manifest.save(&dataset_dir)?;
    let sample_dir = if cfg.save_samples {
        create_dir(&dataset_dir.join("samples"))?;
        Some(dataset_dir.as_path())
    } else {
        None
    };

    progress(&format!("generating and preprocessing {} samples", plans.len()));
    let samples = build_features(cfg, &plans, sample_dir)?;
    save_features(&samples, &features_dir)?;
    fs::write(features_dir.join(FEATURES_CONFIG_FILE), cfg.to_text())?;

    progress("training");
    let outcome = run_on_features(cfg, &samples, |e| {
        progress(&format!("epoch {:3}  loss {:.6}  batch accuracy {:.4}", e.epoch + 1, e.loss, e.accuracy))
    })?;
    save_model(&outcome.model, &out.join("model.bin"))?;
    write_report(out, &outcome.report, &outcome.confusion)?;
    progress(&format!("test accuracy {:.2}%", 100.0 * outcome.accuracy()));
    Ok(outcome)
}

fn manifest_for(cfg: &PipelineConfig) -> Result<Manifest> {
    Ok(Manifest {
        config: cfg.clone(),
        samples: plan(cfg)?
            .iter()
            .enumerate()
            .map(|(i, p)| ManifestEntry {
                seed: p.seed,
                label: p.label,
                path: Manifest::sample_path(i),
            })
            .collect(),
    })
}

/// Writes the manifest and every raw sample of `cfg`'s dataset to `dir`.
pub fn generate_dataset(cfg: &PipelineConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    create_dir(&dir.join("samples"))?;
    let manifest = manifest_for(cfg)?;
    manifest.save(dir)?;
    let plans = plan(cfg)?;
    plans.par_iter().enumerate().try_for_each(|(i, p)| {
        let s = generate_sample(cfg, p).map_err(|e| e.context(format!("generating sample {i}")))?;
        save_snapshot(&s, &dir.join(&manifest.samples[i].path))
    })?;
    Ok(manifest)
}

/// Reads a generated dataset and writes its feature file plus a config
/// copy into `out`.
pub fn preprocess_dataset(dataset_dir: &Path, out: &Path) -> Result<(PipelineConfig, Vec<SampleTriple>)> {
    let manifest = Manifest::load(dataset_dir)?;
    let cfg = manifest.config;
    let samples = manifest
        .samples
        .par_iter()
        .map(|e| {
            let path = dataset_dir.join(&e.path);
            let s = load_snapshot(&path, cfg.radar.adc_rate)?;
            let images = preprocess(&s, &cfg).map_err(|err| err.context(format!("preprocessing {}", path.display())))?;
            Ok(SampleTriple::new(images, e.label, e.seed))
        })
        .collect::<Result<Vec<_>>>()?;
    create_dir(out)?;
    save_features(&samples, out)?;
    fs::write(out.join(FEATURES_CONFIG_FILE), cfg.to_text())?;
    Ok((cfg, samples))
}

/// Config and samples of a feature directory.
pub fn load_feature_dir(dir: &Path) -> Result<(PipelineConfig, Vec<SampleTriple>)> {
    let cfg = PipelineConfig::from_file(&dir.join(FEATURES_CONFIG_FILE))?;
    Ok((cfg, load_features(dir)?))
}

/// Confusion matrix and report of `model` on the test split of `samples`.
pub fn evaluate(cfg: &PipelineConfig, samples: &[SampleTriple], model: &ClassifierModel) -> Result<(ConfusionMatrix, String)> {
    let (train, test) = split_features(cfg, samples)?;
    let confusion = confusion_matrix(model, &test)?;
    let report = render_report(cfg, None, &confusion, train.len());
    Ok((confusion, report))
}

pub fn save_model(model: &ClassifierModel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
    model.save(BufWriter::new(file)).map_err(|e| e.context(format!("writing {}", path.display())))
}

pub fn load_model(path: &Path) -> Result<ClassifierModel> {
    let file = File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    ClassifierModel::load(std::io::BufReader::new(file)).map_err(|e| e.context(format!("reading {}", path.display())))
}
