//! Stratified train/test split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::seed::derive;
use crate::{Error, Result};

/// Splits sample indices by label: each class contributes
/// `floor(ratio · n_class)` randomly chosen samples to the training set
/// and the rest to the test set. Both index lists come back sorted.
pub fn split(labels: &[usize], ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio {ratio} outside (0, 1)")));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[class as u64]));
        members.shuffle(&mut rng);
        // the epsilon absorbs products such as 0.29·100 = 28.999…
        let k = (ratio * members.len() as f64 + 1e-9).floor() as usize;
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    if test.is_empty() {
        return Err(Error::invalid(format!(
            "split ratio {ratio} leaves the test set empty"
        )));
    }
    if train.is_empty() {
        return Err(Error::invalid(format!(
            "split ratio {ratio} leaves the training set empty"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
