//! Multi-person FMCW radar sign recognition.
//!
//! The processing chain turns raw array returns into sign labels:
//!
//! ```text
//! scene ──► snapshot (N×M) ──┬── antenna 0 ───────────┐
//!                            ├── beam θ₁ ─────────────┼─► pulses ─► range map ─► collapse ─► spectrogram ─► 128×128 image ─┐
//!                            └── beam θ₂ ─────────────┘                                                                     │
//!                                                         three-branch CNN (3×3 ∥ 9×9 conv stacks, shared dense head) ◄────┘
//! ```
//!
//! Modules map one-to-one onto the stages: [`array`] (steering vectors and
//! snapshot synthesis), [`scene`] (sign kinematics and FMCW beat signals),
//! [`beamform`], [`range`], [`tfr`], [`classifier`] and [`harness`] (dataset
//! files, preprocessing, experiments and the CLI plumbing).

pub mod array;
pub mod beamform;
pub mod classifier;
pub mod error;
pub mod harness;
pub mod range;
pub mod scene;
pub mod tfr;

mod seed;

pub use error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
