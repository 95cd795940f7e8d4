//! Fast-time / slow-time reshaping and the per-pulse range map.
//!
//! Both [`PulseMatrix`] and [`RangeMap`] store one pulse per contiguous
//! column (`data[q*P + p]`). The range map uses the unnormalized forward DFT
//! of length P:
//!
//! ```text
//! r[l,q] = Σ_{p=0}^{P-1} x[p,q]·exp(-j2πlp/P)
//! ```

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Fast-time × pulse matrix, `fast_time` rows by `pulses` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseMatrix {
    data: Vec<Complex64>,
    fast_time: usize,
    pulses: usize,
}

/// Range bins × pulses after the fast-time DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeMap {
    data: Vec<Complex64>,
    bins: usize,
    pulses: usize,
}

macro_rules! column_major_accessors {
    ($t:ty, $rows:ident) => {
        impl $t {
            pub fn pulses(&self) -> usize {
                self.pulses
            }

            pub fn get(&self, row: usize, pulse: usize) -> Complex64 {
                self.data[pulse * self.$rows + row]
            }

            pub fn column(&self, pulse: usize) -> &[Complex64] {
                &self.data[pulse * self.$rows..(pulse + 1) * self.$rows]
            }

            pub fn as_slice(&self) -> &[Complex64] {
                &self.data
            }

            /// Flattens back to the pulse-after-pulse sample order.
            pub fn into_vec(self) -> Vec<Complex64> {
                self.data
            }
        }
    };
}

column_major_accessors!(PulseMatrix, fast_time);
column_major_accessors!(RangeMap, bins);

impl PulseMatrix {
    pub fn fast_time(&self) -> usize {
        self.fast_time
    }
}

impl RangeMap {
    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Range bin `l` across all pulses.
    pub fn row(&self, l: usize) -> Vec<Complex64> {
        (0..self.pulses).map(|q| self.get(l, q)).collect()
    }

    /// Energy per range bin summed over pulses.
    pub fn bin_energy(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.bins];
        for col in self.data.chunks_exact(self.bins) {
            for (acc, z) in e.iter_mut().zip(col) {
                *acc += z.norm_sqr();
            }
        }
        e
    }

    /// Inverse DFT per column, restoring the pulse matrix.
    pub fn inverse(&self) -> PulseMatrix {
        let mut data = self.data.clone();
        let fft = FftPlanner::new().plan_fft_inverse(self.bins);
        fft.process(&mut data);
        let scale = 1.0 / self.bins as f64;
        data.iter_mut().for_each(|z| *z *= scale);
        PulseMatrix {
            data,
            fast_time: self.bins,
            pulses: self.pulses,
        }
    }
}

/// Stacks consecutive runs of `fast_time` samples into columns.
pub fn reshape_pulses(x: Vec<Complex64>, fast_time: usize) -> Result<PulseMatrix> {
    if fast_time == 0 || x.len() % fast_time != 0 || x.is_empty() {
        return Err(Error::invalid(format!(
            "pulse length {fast_time} does not divide signal length {}",
            x.len()
        )));
    }
    let pulses = x.len() / fast_time;
    Ok(PulseMatrix {
        data: x,
        fast_time,
        pulses,
    })
}

/// Column-wise forward DFT of a pulse matrix.
pub fn range_map(x: &PulseMatrix) -> RangeMap {
    let mut data = x.data.clone();
    // rustfft processes a buffer holding several consecutive transforms
    let fft = FftPlanner::new().plan_fft_forward(x.fast_time);
    fft.process(&mut data);
    RangeMap {
        data,
        bins: x.fast_time,
        pulses: x.pulses,
    }
}

/// Slow-time signal `v[q] = Σ_{l=lo}^{hi} r[l,q]`.
pub fn collapse_range(r: &RangeMap, lo: usize, hi: usize) -> Result<Vec<Complex64>> {
    if lo > hi || hi >= r.bins {
        return Err(Error::invalid(format!(
            "range interval [{lo}, {hi}] outside 0..{}",
            r.bins
        )));
    }
    Ok(r.data
        .chunks_exact(r.bins)
        .map(|col| col[lo..=hi].iter().sum())
        .collect())
}

/// Smallest contiguous bin interval `[lo, hi]` holding at least
/// `energy_fraction` of the map's energy; ties go to the lowest `lo`.
pub fn select_bins(r: &RangeMap, energy_fraction: f64) -> Result<(usize, usize)> {
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "energy fraction must lie in (0, 1], got {energy_fraction}"
        )));
    }
    let energy = r.bin_energy();
    let total: f64 = energy.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("range map carries no energy"));
    }
    // slack for summation-order rounding, so fraction 1 reaches the full support
    let target = energy_fraction * total * (1.0 - 1e-12);

    let mut best: Option<(usize, usize)> = None;
    let mut end = 0;
    for lo in 0..energy.len() {
        // the minimal end never moves left as the start advances
        end = end.max(lo);
        let mut acc: f64 = energy[lo..end].iter().sum();
        while acc < target && end < energy.len() {
            acc += energy[end];
            end += 1;
        }
        if acc < target {
            break;
        }
        if best.is_none_or(|(b_lo, b_hi)| end - lo < b_hi - b_lo + 1) {
            best = Some((lo, end - 1));
        }
    }
    best.ok_or_else(|| Error::invalid("no bin interval reaches the requested energy"))
}
