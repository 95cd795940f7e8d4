//! Raw snapshot → three micro-Doppler images.
//!
//! ```text
//!            ┌ column 0 ─────────────┐
//! snapshot ──┼ beam θ₁ (spatial_filter) ├→ pulses → range map → collapse → STFT → image
//!            └ beam θ₂ ─────────────┘          (bins chosen on column 0)
//! ```

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use super::config::PipelineConfig;
use super::io::{quantize_f32, save_snapshot};
use crate::array::SnapshotMatrix;
use crate::beamform::{spatial_filter, weights_for};
use crate::classifier::Example;
use crate::range::{collapse_range, range_map, reshape_pulses, select_bins};
use crate::scene::{dataset_plan, synthesize_scene, ScenePlan};
use crate::tfr::{spectrogram, to_image, SpecImage};
use crate::{Error, Result};

/// Combined (single receiver) and two beamformed images of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTriple {
    pub combined: SpecImage,
    pub beam1: SpecImage,
    pub beam2: SpecImage,
    pub label: usize,
    /// Scene seed the sample was generated from.
    pub seed: u64,
}

impl SampleTriple {
    pub fn new(images: [SpecImage; 3], label: usize, seed: u64) -> Self {
        let [combined, beam1, beam2] = images;
        Self {
            combined,
            beam1,
            beam2,
            label,
            seed,
        }
    }

    pub fn images(&self) -> [&SpecImage; 3] {
        [&self.combined, &self.beam1, &self.beam2]
    }

    pub fn to_example(&self) -> Example {
        Example {
            images: self.images().map(|i| i.pixels().to_vec()),
            label: self.label,
        }
    }
}

/// Slow-time signals of the three paths and the shared range-bin
/// interval `[lo, hi]`.
pub fn slow_time_signals(s: &SnapshotMatrix, cfg: &PipelineConfig) -> Result<([Vec<Complex64>; 3], (usize, usize))> {
    let p = cfg.radar.fast_time_samples()?;
    let n = cfg.radar.total_samples()?;
    let array = cfg.array()?;
    if s.rows() != n || s.cols() != array.num_elements() {
        return Err(Error::invalid(format!(
            "snapshot is {}x{}, config expects {n}x{}",
            s.rows(),
            s.cols(),
            array.num_elements()
        )));
    }
    let combined = range_map(&reshape_pulses(s.column(0), p)?);
    let (lo, hi) = select_bins(&combined, cfg.energy_fraction).map_err(|e| e.context("combined path"))?;
    let mut out = [collapse_range(&combined, lo, hi)?, Vec::new(), Vec::new()];
    drop(combined);
    for (k, theta) in cfg.look_angles().into_iter().enumerate() {
        let x = spatial_filter(s, &weights_for(&array, theta)?)?;
        let r = range_map(&reshape_pulses(x, p)?);
        out[k + 1] = collapse_range(&r, lo, hi)?;
    }
    Ok((out, (lo, hi)))
}

/// Combined, θ₁ and θ₂ images of one snapshot.
pub fn preprocess(s: &SnapshotMatrix, cfg: &PipelineConfig) -> Result<[SpecImage; 3]> {
    let (signals, _) = slow_time_signals(s, cfg)?;
    let params = cfg.stft_params()?;
    let prf = cfg.radar.prf();
    let mut images = Vec::with_capacity(3);
    for v in &signals {
        images.push(to_image(&spectrogram(v, &params, prf)?));
    }
    Ok(images.try_into().expect("three paths"))
}

/// Sample recipes of the configured dataset.
pub fn plan(cfg: &PipelineConfig) -> Result<Vec<ScenePlan>> {
    dataset_plan(cfg.samples_per_class, cfg.subject_pairs, cfg.seed)
}

/// Snapshot of one planned sample, rounded to the sample-file precision.
pub fn generate_sample(cfg: &PipelineConfig, plan: &ScenePlan) -> Result<SnapshotMatrix> {
    let spec = plan.scene_spec(&cfg.scene_template()?)?;
    let mut s = synthesize_scene(&spec)?;
    quantize_f32(&mut s);
    Ok(s)
}

/// Generates and preprocesses every planned sample, one snapshot in
/// memory per worker. When `sample_dir` is given, each snapshot is also
/// written there under its manifest path.
pub fn build_features(cfg: &PipelineConfig, plans: &[ScenePlan], sample_dir: Option<&Path>) -> Result<Vec<SampleTriple>> {
    plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let s = generate_sample(cfg, plan).map_err(|e| e.context(format!("generating sample {i}")))?;
            if let Some(dir) = sample_dir {
                save_snapshot(&s, &dir.join(super::io::Manifest::sample_path(i)))?;
            }
            let images = preprocess(&s, cfg).map_err(|e| e.context(format!("preprocessing sample {i}")))?;
            Ok(SampleTriple::new(images, plan.label, plan.seed))
        })
        .collect()
}
