//! Delay-and-sum receive beamforming.
//!
//! Weights are the conjugate steering vector, unnormalized, so a unit
//! plane wave from the look direction comes out with real gain `M`.

use num_complex::Complex64;

use crate::array::{steering_vector, ArrayConfig, SnapshotMatrix};
use crate::{Error, Result};

/// Beamformer weights `conj(a(θ_k))` for one look angle.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamWeights {
    weights: Vec<Complex64>,
    look_angle: f64,
}

impl BeamWeights {
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn look_angle(&self) -> f64 {
        self.look_angle
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Combines one array snapshot: `Σ_m w_m·s_m`.
    pub fn apply(&self, snapshot: &[Complex64]) -> Complex64 {
        self.weights.iter().zip(snapshot).map(|(w, s)| w * s).sum()
    }
}

pub fn weights_for(cfg: &ArrayConfig, look_angle: f64) -> Result<BeamWeights> {
    let weights = steering_vector(cfg, look_angle)?
        .into_iter()
        .map(|a| a.conj())
        .collect();
    Ok(BeamWeights {
        weights,
        look_angle,
    })
}

/// Spatially filtered signal `x[n] = Σ_m S[n,m]·w_m`, length N.
pub fn spatial_filter(snapshot: &SnapshotMatrix, weights: &BeamWeights) -> Result<Vec<Complex64>> {
    if snapshot.cols() != weights.len() {
        return Err(Error::invalid(format!(
            "snapshot has {} antennas but weights have {}",
            snapshot.cols(),
            weights.len()
        )));
    }
    Ok(snapshot
        .as_slice()
        .chunks_exact(snapshot.cols())
        .map(|row| weights.apply(row))
        .collect())
}

/// Gain magnitude `|Σ_m w_m·a_m(θ)|` of the beam steered to `look_angle`
/// at every angle of `grid`.
pub fn beampattern(cfg: &ArrayConfig, look_angle: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("beampattern grid is empty"));
    }
    let w = weights_for(cfg, look_angle)?;
    let m = cfg.num_elements() as f64;
    grid.iter()
        .map(|&theta| {
            let a = steering_vector(cfg, theta)?;
            // rounding can push the coherent sum a hair past M
            Ok(w.apply(&a).norm().min(m))
        })
        .collect()
}
