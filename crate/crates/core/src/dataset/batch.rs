use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::dsp::FeatureMap;
use crate::nn::{Extent, Rng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// Zero-pad each batch to its largest member and record true extents.
    #[default]
    PadMask,
    /// Group by exact shape so no batch needs padding.
    EqualShapeBuckets,
}

impl std::str::FromStr for BatchMode {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pad_mask" => Ok(BatchMode::PadMask),
            "equal_shape_buckets" | "buckets" => Ok(BatchMode::EqualShapeBuckets),
            other => Err(DatasetError::BadManifest(format!("unknown batch mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// `(N, H_max, W_max, 1)`, zero outside each sample's extent.
    pub features: Tensor<f32>,
    pub extents: Vec<Extent>,
    /// One-hot `(N, C)`.
    pub labels: Tensor<f32>,
    /// Positions of the members in the input list.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Packs the given members into one padded batch.
pub fn pack_batch<F: Borrow<FeatureMap>>(
    features: &[F],
    labels: &[usize],
    n_classes: usize,
    members: &[usize],
) -> Batch {
    let h = members.iter().map(|&i| features[i].borrow().bins()).max().unwrap_or(0);
    let w = members.iter().map(|&i| features[i].borrow().frames()).max().unwrap_or(0);
    let n = members.len();
    let mut data = vec![0.0f32; n * h * w];
    let mut onehot = vec![0.0f32; n * n_classes];
    let mut extents = Vec::with_capacity(n);
    for (b, &i) in members.iter().enumerate() {
        let fm = features[i].borrow();
        for r in 0..fm.bins() {
            let dst = (b * h + r) * w;
            for (d, &v) in data[dst..dst + fm.frames()].iter_mut().zip(fm.row(r)) {
                *d = v as f32;
            }
        }
        extents.push(Extent::new(fm.bins(), fm.frames()));
        onehot[b * n_classes + labels[i]] = 1.0;
    }
    Batch {
        features: Tensor::from_vec(&[n, h, w, 1], data).expect("sized above"),
        extents,
        labels: Tensor::from_vec(&[n, n_classes], onehot).expect("sized above"),
        indices: members.to_vec(),
    }
}

/// Shuffles (when `rng` is given) and groups feature maps into batches of
/// at most `batch_size`.
pub fn make_batches<F: Borrow<FeatureMap>>(
    features: &[F],
    labels: &[usize],
    n_classes: usize,
    batch_size: usize,
    mode: BatchMode,
    min_shape: (usize, usize),
    rng: Option<&mut Rng>,
) -> Result<Vec<Batch>, DatasetError> {
    assert_eq!(features.len(), labels.len(), "one label per feature map");
    if batch_size == 0 {
        return Err(DatasetError::BadManifest("batch size must be at least 1".into()));
    }
    for (i, f) in features.iter().enumerate() {
        let (h, w) = f.borrow().shape();
        if h < min_shape.0 || w < min_shape.1 {
            return Err(DatasetError::FeatureBelowMinimum {
                index: i,
                h,
                w,
                min_h: min_shape.0,
                min_w: min_shape.1,
            });
        }
        if labels[i] >= n_classes {
            return Err(DatasetError::BadManifest(format!("label {} out of range", labels[i])));
        }
    }
    let mut order: Vec<usize> = (0..features.len()).collect();
    if let Some(rng) = rng {
        rng.shuffle(&mut order);
    }
    let groups: Vec<Vec<usize>> = match mode {
        BatchMode::PadMask => order.chunks(batch_size).map(<[usize]>::to_vec).collect(),
        BatchMode::EqualShapeBuckets => {
            // Buckets in order of first appearance keep the shuffle meaningful.
            let mut buckets: Vec<((usize, usize), Vec<usize>)> = Vec::new();
            for i in order {
                let shape = features[i].borrow().shape();
                match buckets.iter_mut().find(|(s, _)| *s == shape) {
                    Some((_, members)) => members.push(i),
                    None => buckets.push((shape, vec![i])),
                }
            }
            buckets
                .into_iter()
                .flat_map(|(_, m)| m.chunks(batch_size).map(<[usize]>::to_vec).collect::<Vec<_>>())
                .collect()
        }
    };
    Ok(groups
        .iter()
        .map(|g| pack_batch(features, labels, n_classes, g))
        .collect())
}
