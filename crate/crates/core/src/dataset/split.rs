use serde::{Deserialize, Serialize};

use super::{DatasetError, DatasetManifest};
use crate::nn::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    /// Sorted entry indices.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `k` independent random train/test resamplings of the same entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub folds: Vec<Fold>,
    pub ratio: f64,
    pub seed: u64,
    pub stratified: bool,
}

/// Splits `labels.len()` entries `k` times. Fold `i` draws from
/// `Rng::new(seed).fork(i)`. Unstratified folds have exactly
/// `round(ratio · n)` training entries; stratified folds round per class.
pub fn split_indices(
    labels: &[usize],
    ratio: f64,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<SplitPlan, DatasetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DatasetError::DatasetTooSmall(format!("ratio {ratio} not in (0, 1)")));
    }
    if k == 0 {
        return Err(DatasetError::DatasetTooSmall("k must be at least 1".into()));
    }
    let n = labels.len();
    let base = Rng::new(seed);
    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let mut rng = base.fork(i as u64);
        let (mut train, mut test) = if stratified {
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut train = Vec::new();
            let mut test = Vec::new();
            for c in 0..n_classes {
                let mut members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                rng.shuffle(&mut members);
                let cut = (ratio * members.len() as f64).round() as usize;
                train.extend_from_slice(&members[..cut]);
                test.extend_from_slice(&members[cut..]);
            }
            (train, test)
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let cut = (ratio * n as f64).round() as usize;
            let test = order.split_off(cut);
            (order, test)
        };
        if train.is_empty() || test.is_empty() {
            return Err(DatasetError::DatasetTooSmall(format!(
                "{n} entries give {} train / {} test",
                train.len(),
                test.len()
            )));
        }
        train.sort_unstable();
        test.sort_unstable();
        folds.push(Fold { train, test });
    }
    Ok(SplitPlan {
        folds,
        ratio,
        seed,
        stratified,
    })
}

/// Monte Carlo cross-validation plan over a manifest (unstratified).
pub fn monte_carlo_split(manifest: &DatasetManifest, ratio: f64, k: usize, seed: u64) -> Result<SplitPlan, DatasetError> {
    split_indices(&manifest.labels(), ratio, k, seed, false)
}

pub fn monte_carlo_split_stratified(
    manifest: &DatasetManifest,
    ratio: f64,
    k: usize,
    seed: u64,
) -> Result<SplitPlan, DatasetError> {
    split_indices(&manifest.labels(), ratio, k, seed, true)
}
