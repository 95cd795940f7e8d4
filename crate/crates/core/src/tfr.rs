//! Short-time Fourier spectrograms and their fixed-size image form.
//!
//! Frame `i` ends at slow-time sample `n = i·hop` and covers the trailing
//! window `v[n-H+1 ..= n]`, oldest sample first; samples before the start
//! of the record are zero. Each frame is the squared magnitude of the
//! H-point DFT of the windowed segment. Bins are stored centered: column
//! `c` holds signed Doppler bin `c - H/2`, so negative Doppler sits in the
//! low columns.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Side length of the square classifier images.
pub const IMAGE_SIZE: usize = 128;

/// Dynamic range kept by [`to_image`], in dB below the peak.
pub const DYNAMIC_RANGE_DB: f64 = 60.0;

const POWER_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StftParams {
    window: Vec<f64>,
    hop: usize,
}

impl StftParams {
    pub fn new(window: Vec<f64>, hop: usize) -> Result<Self> {
        let h = window.len();
        if h < 2 {
            return Err(Error::invalid(format!("window length must be >= 2, got {h}")));
        }
        if hop == 0 || hop > h {
            return Err(Error::invalid(format!("hop must lie in 1..={h}, got {hop}")));
        }
        if window.iter().any(|w| !w.is_finite()) || window.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid("window must be finite and not identically zero"));
        }
        Ok(Self { window, hop })
    }

    /// Periodic Hann window of length `len`.
    pub fn hann(len: usize, hop: usize) -> Result<Self> {
        let w = (0..len)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
            .collect();
        Self::new(w, hop)
    }

    pub fn rectangular(len: usize, hop: usize) -> Result<Self> {
        Self::new(vec![1.0; len], hop)
    }

    /// Largest hop (capped at the window length) that still yields at
    /// least [`IMAGE_SIZE`] frames from `num_samples` samples.
    pub fn auto_hop(num_samples: usize, window_len: usize) -> usize {
        let hop = num_samples.saturating_sub(1) / (IMAGE_SIZE - 1);
        hop.clamp(1, window_len.max(1))
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        (num_samples - 1) / self.hop + 1
    }
}

/// Non-negative power map, `frames × bins`, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    power: Vec<f64>,
    frames: usize,
    bins: usize,
    frame_times: Vec<f64>,
    sample_rate: f64,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.power[i * self.bins..(i + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.power
    }

    pub fn frame_times(&self) -> &[f64] {
        &self.frame_times
    }

    /// Column holding signed bin `k` (taken modulo the bin count).
    pub fn column_of_bin(&self, k: i64) -> usize {
        let h = self.bins as i64;
        (k + h / 2).rem_euclid(h) as usize
    }

    pub fn power_at(&self, frame: usize, k: i64) -> f64 {
        self.frame(frame)[self.column_of_bin(k)]
    }

    /// Doppler frequency in Hz of every column.
    pub fn column_frequencies(&self) -> Vec<f64> {
        let h = self.bins as f64;
        (0..self.bins)
            .map(|c| (c as f64 - (self.bins / 2) as f64) * self.sample_rate / h)
            .collect()
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// Spectrogram of the slow-time signal `v` sampled at `sample_rate` Hz.
pub fn spectrogram(v: &[Complex64], params: &StftParams, sample_rate: f64) -> Result<Spectrogram> {
    let h = params.window_len();
    if v.len() < h {
        return Err(Error::invalid(format!(
            "signal has {} samples, fewer than the window length {h}",
            v.len()
        )));
    }
    let frames = params.num_frames(v.len());
    let fft = FftPlanner::new().plan_fft_forward(h);
    let mut buf = vec![Complex64::new(0.0, 0.0); h];
    let mut power = Vec::with_capacity(frames * h);
    let half = h / 2;
    for i in 0..frames {
        let end = i * params.hop;
        for (j, (b, &w)) in buf.iter_mut().zip(params.window()).enumerate() {
            // sample index end - (h-1) + j
            *b = match (end + j + 1).checked_sub(h) {
                Some(n) => v[n] * w,
                None => Complex64::new(0.0, 0.0),
            };
        }
        fft.process(&mut buf);
        // centered: column c <- DFT bin (c - half) mod h
        power.extend((0..h).map(|c| buf[(c + h - half) % h].norm_sqr()));
    }
    let frame_times = (0..frames)
        .map(|i| (i * params.hop) as f64 / sample_rate)
        .collect();
    Ok(Spectrogram {
        power,
        frames,
        bins: h,
        frame_times,
        sample_rate,
    })
}

/// Normalized `IMAGE_SIZE × IMAGE_SIZE` rendering of a spectrogram.
///
/// Row 0 is the most positive Doppler column, column 0 the first frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecImage {
    pixels: Vec<f32>,
}

impl SpecImage {
    pub fn from_pixels(pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != IMAGE_SIZE * IMAGE_SIZE {
            return Err(Error::invalid(format!(
                "image needs {} pixels, got {}",
                IMAGE_SIZE * IMAGE_SIZE,
                pixels.len()
            )));
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * IMAGE_SIZE + col]
    }

    /// Binary PGM (P5), 8-bit grayscale.
    pub fn write_pgm(&self, mut out: impl Write) -> Result<()> {
        write!(out, "P5\n{IMAGE_SIZE} {IMAGE_SIZE}\n255\n")?;
        let bytes: Vec<u8> = self
            .pixels
            .iter()
            .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        out.write_all(&bytes)?;
        Ok(())
    }

    /// One line per row, comma-separated shortest round-trip decimals.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        for row in self.pixels.chunks_exact(IMAGE_SIZE) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Cosine similarity of the two pixel vectors.
    pub fn cosine_similarity(&self, other: &SpecImage) -> f64 {
        let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
        for (&a, &b) in self.pixels.iter().zip(&other.pixels) {
            let (a, b) = (a as f64, b as f64);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Renders a spectrogram as a normalized image.
///
/// Power goes to dB with a 1e-12 floor, both axes are bilinearly resampled
/// (corner-aligned) to `IMAGE_SIZE`, values more than [`DYNAMIC_RANGE_DB`]
/// below the peak are clipped, and the result is min-max scaled to [0, 1].
/// A flat spectrogram renders as all zeros.
pub fn to_image(s: &Spectrogram) -> SpecImage {
    let db: Vec<f64> = s
        .power
        .iter()
        .map(|&p| 10.0 * (p + POWER_FLOOR).log10())
        .collect();
    // db is frames × bins; the image is bins (flipped) × frames
    let src_rows = s.bins;
    let src_cols = s.frames;
    let at = |r: usize, c: usize| db[c * s.bins + (s.bins - 1 - r)];
    let row_map = axis_map(src_rows, IMAGE_SIZE);
    let col_map = axis_map(src_cols, IMAGE_SIZE);
    let mut pixels = Vec::with_capacity(IMAGE_SIZE * IMAGE_SIZE);
    for &(r0, r1, fr) in &row_map {
        for &(c0, c1, fc) in &col_map {
            let top = at(r0, c0) * (1.0 - fc) + at(r0, c1) * fc;
            let bottom = at(r1, c0) * (1.0 - fc) + at(r1, c1) * fc;
            pixels.push(top * (1.0 - fr) + bottom * fr);
        }
    }
    let max = pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = pixels.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = min.max(max - DYNAMIC_RANGE_DB);
    let span = max - floor;
    let pixels = pixels
        .into_iter()
        .map(|v| {
            if span > 0.0 {
                ((v.max(floor) - floor) / span) as f32
            } else {
                0.0
            }
        })
        .collect();
    SpecImage { pixels }
}

/// For each destination index: (lower source, upper source, weight of upper).
fn axis_map(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            if src == 1 || dst == 1 {
                return (0, 0, 0.0);
            }
            let x = i as f64 * (src - 1) as f64 / (dst - 1) as f64;
            let lo = (x.floor() as usize).min(src - 1);
            let hi = (lo + 1).min(src - 1);
            (lo, hi, x - lo as f64)
        })
        .collect()
}
