//! Uniform linear receive array: steering vectors and snapshot synthesis.
//!
//! Azimuth follows the `cos θ` convention: θ is measured from the array
//! axis (endfire), so broadside is θ = π/2 and the useful range is
//! θ ∈ [0, π]. Element `m` of the steering vector is
//! `exp(j·(2π/λ)·d·m·cos θ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Geometry of a uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayConfig {
    num_elements: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayConfig {
    pub fn new(num_elements: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::invalid("array needs at least one element"));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::invalid(format!("element spacing must be > 0, got {spacing}")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::invalid(format!("wavelength must be > 0, got {wavelength}")));
        }
        Ok(Self {
            num_elements,
            spacing,
            wavelength,
        })
    }

    /// Array with the customary half-wavelength spacing.
    pub fn half_wavelength(num_elements: usize, wavelength: f64) -> Result<Self> {
        Self::new(num_elements, wavelength / 2.0, wavelength)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// Inter-element phase step `(2π/λ)·d·cos θ` for a plane wave from `theta`.
    pub fn phase_step(&self, theta: f64) -> f64 {
        2.0 * PI / self.wavelength * self.spacing * theta.cos()
    }
}

/// A point reflector as seen by the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// Azimuth in radians, `cos θ` convention.
    pub azimuth: f64,
    /// Complex return amplitude.
    pub amplitude: Complex64,
    /// Range in meters.
    pub range: f64,
}

/// Raw array data: `rows` time samples by `cols` antennas, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: Vec<Complex64>,
    rows: usize,
    cols: usize,
    sample_rate: f64,
}

impl SnapshotMatrix {
    pub fn zeros(rows: usize, cols: usize, sample_rate: f64) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
            rows,
            cols,
            sample_rate,
        }
    }

    pub fn from_row_major(
        data: Vec<Complex64>,
        rows: usize,
        cols: usize,
        sample_rate: f64,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(Error::invalid("snapshot needs at least one antenna column"));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "snapshot data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::invalid(format!(
                "non-finite snapshot entry at row {}, column {}",
                i / cols,
                i % cols
            )));
        }
        Ok(Self {
            data,
            rows,
            cols,
            sample_rate,
        })
    }

    /// Number of time samples N.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of antennas M.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.data[n * self.cols + m]
    }

    /// Copy of antenna column `m`.
    pub fn column(&self, m: usize) -> Vec<Complex64> {
        self.data.iter().skip(m).step_by(self.cols).copied().collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Adds `baseband[n]·steering[m]` to every entry.
    pub fn add_source(&mut self, steering: &[Complex64], baseband: &[Complex64]) -> Result<()> {
        if steering.len() != self.cols {
            return Err(Error::invalid(format!(
                "steering vector length {} != {} antennas",
                steering.len(),
                self.cols
            )));
        }
        if baseband.len() != self.rows {
            return Err(Error::invalid(format!(
                "baseband length {} != {} samples",
                baseband.len(),
                self.rows
            )));
        }
        for (row, &b) in self.data.chunks_exact_mut(self.cols).zip(baseband) {
            for (z, &a) in row.iter_mut().zip(steering) {
                *z += b * a;
            }
        }
        Ok(())
    }

    /// Adds circularly-symmetric complex Gaussian noise of the given
    /// per-entry variance, drawn row-major from a generator seeded with `seed`.
    pub fn add_noise(&mut self, variance: f64, seed: u64) -> Result<()> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::invalid(format!("noise variance must be >= 0, got {variance}")));
        }
        if variance == 0.0 {
            return Ok(());
        }
        let sigma = (variance / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z in &mut self.data {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(sigma * re, sigma * im);
        }
        Ok(())
    }
}

/// Steering vector `a(θ)` of length M; element 0 is exactly 1.
pub fn steering_vector(cfg: &ArrayConfig, theta: f64) -> Result<Vec<Complex64>> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("azimuth must be finite, got {theta}")));
    }
    let step = cfg.phase_step(theta);
    Ok((0..cfg.num_elements)
        .map(|m| {
            if m == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::from_polar(1.0, step * m as f64)
            }
        })
        .collect())
}

/// One far-field source: a scatterer plus its per-sample baseband modulation.
#[derive(Debug, Clone, Copy)]
pub struct Source<'a> {
    pub scatterer: Scatterer,
    pub baseband: &'a [Complex64],
}

/// Builds `s(n,·) = Σ_l α_l·b_l(n)·a(θ_l) + v(n)` for `num_samples` rows.
///
/// Every source's baseband must have `num_samples` entries. With no sources
/// and zero noise the result is the zero matrix.
pub fn synthesize_snapshot(
    cfg: &ArrayConfig,
    sources: &[Source<'_>],
    num_samples: usize,
    sample_rate: f64,
    noise_variance: f64,
    seed: u64,
) -> Result<SnapshotMatrix> {
    if num_samples == 0 {
        return Err(Error::invalid("snapshot needs at least one sample"));
    }
    let mut snapshot = SnapshotMatrix::zeros(num_samples, cfg.num_elements, sample_rate);
    for (l, src) in sources.iter().enumerate() {
        let steering = steering_vector(cfg, src.scatterer.azimuth)?;
        let scaled: Vec<Complex64> = src
            .baseband
            .iter()
            .map(|&b| b * src.scatterer.amplitude)
            .collect();
        snapshot
            .add_source(&steering, &scaled)
            .map_err(|e| e.context(format!("source {l}")))?;
    }
    snapshot.add_noise(noise_variance, seed)?;
    Ok(snapshot)
}
