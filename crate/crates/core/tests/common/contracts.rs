//! Model-level contracts shared by the test suites and the acceptance run.

use emovox::dataset::pack_batch;
use emovox::dsp::{Descriptor, FeatureMap};
use emovox::model::{build_fcn, load_model, save_model, FcnConfig, FcnModel, ModelError};
use emovox::nn::{Extent, Rng, Tensor};

/// Glorot weights with small random biases, so every layer matters.
pub fn small_model(n_classes: usize, filters: usize, seed: u64) -> FcnModel {
    let mut cfg = FcnConfig::new(n_classes);
    cfg.conv1.filters = filters;
    cfg.conv2.filters = filters;
    let mut rng = Rng::new(seed);
    let names = (0..n_classes).map(|k| format!("c{k}")).collect();
    let mut model = build_fcn(cfg, names, &mut rng).unwrap();
    for p in model.params.tensors_mut() {
        if p.shape().len() == 1 {
            p.data_mut().iter_mut().for_each(|v| *v = 0.1 * rng.uniform_range(-1.0, 1.0) as f32);
        }
    }
    model
}

pub fn random_map(bins: usize, frames: usize, rng: &mut Rng) -> FeatureMap {
    let values = (0..bins * frames).map(|_| rng.uniform_range(-3.0, 3.0)).collect();
    let times = (0..frames).map(|t| t as f64 * 0.02).collect();
    FeatureMap::new(bins, frames, values, times, Descriptor::Mfcc).unwrap()
}

fn between(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Padded batches of up to three samples with H, W in `[17, max_side]`:
/// the output is `(N, C)` with rows summing to one. Returns the worst row
/// sum deviation.
pub fn variable_length(model: &FcnModel, draws: usize, max_side: usize, seed: u64) -> Result<f64, String> {
    let mut rng = Rng::new(seed);
    let c = model.n_classes();
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let n = between(&mut rng, 1, 3);
        let maps: Vec<FeatureMap> = (0..n)
            .map(|_| {
                let (h, w) = (between(&mut rng, 17, max_side), between(&mut rng, 17, max_side));
                random_map(h, w, &mut rng)
            })
            .collect();
        let members: Vec<usize> = (0..n).collect();
        let batch = pack_batch(&maps, &vec![0; n], c, &members);
        let probs = model
            .predict_batch(&batch.features, Some(&batch.extents))
            .map_err(|e| e.to_string())?;
        if probs.shape() != [n, c] {
            return Err(format!("output shape {:?}, expected [{n}, {c}]", probs.shape()));
        }
        for row in probs.data().chunks(c) {
            let s: f64 = row.iter().map(|&p| p as f64).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Every input with either side below 17 fails with `InputBelowMinimum`.
pub fn rejects_below_minimum(model: &FcnModel) -> Result<(), String> {
    for (h, w) in [(16, 17), (17, 16), (1, 1), (16, 200), (200, 10)] {
        let x = Tensor::<f32>::zeros(&[1, h, w, 1]);
        match model.predict_batch(&x, None) {
            Err(ModelError::InputBelowMinimum { min_h: 17, min_w: 17, .. }) => {}
            other => return Err(format!("{h}x{w}: {other:?}")),
        }
    }
    // A large batch does not excuse a short member.
    let x = Tensor::<f32>::zeros(&[2, 30, 30, 1]);
    match model.predict_batch(&x, Some(&[Extent::new(30, 30), Extent::new(30, 12)])) {
        Err(ModelError::InputBelowMinimum { .. }) => Ok(()),
        other => Err(format!("short extent: {other:?}")),
    }
}

/// Largest gap between padded-batch probabilities and per-sample
/// unpadded ones over `batches` random mixed-length batches.
pub fn padding_gap(model: &FcnModel, batches: usize, seed: u64) -> f64 {
    let mut rng = Rng::new(seed);
    let c = model.n_classes();
    let mut worst: f64 = 0.0;
    for _ in 0..batches {
        let n = between(&mut rng, 2, 5);
        let maps: Vec<FeatureMap> = (0..n)
            .map(|_| {
                let (h, w) = (between(&mut rng, 17, 40), between(&mut rng, 17, 90));
                random_map(h, w, &mut rng)
            })
            .collect();
        let members: Vec<usize> = (0..n).collect();
        let batch = pack_batch(&maps, &vec![0; n], c, &members);
        let padded = model.predict_batch(&batch.features, Some(&batch.extents)).unwrap();
        for (i, fm) in maps.iter().enumerate() {
            let alone = model.predict(fm).unwrap();
            for (a, &b) in alone.probs.iter().zip(&padded.data()[i * c..(i + 1) * c]) {
                worst = worst.max((a - b as f64).abs());
            }
        }
    }
    worst
}

/// Save, load, then compare predictions on `inputs` random maps bit for bit.
pub fn persistence_bitwise(model: &FcnModel, inputs: usize, seed: u64) -> Result<(), String> {
    let mut bytes = Vec::new();
    save_model(model, &mut bytes).map_err(|e| e.to_string())?;
    let loaded = load_model(bytes.as_slice()).map_err(|e| e.to_string())?;
    if &loaded != model {
        return Err("loaded model differs".into());
    }
    let mut rng = Rng::new(seed);
    for i in 0..inputs {
        let fm = random_map(between(&mut rng, 17, 100), between(&mut rng, 17, 130), &mut rng);
        let a = model.predict(&fm).unwrap();
        let b = loaded.predict(&fm).unwrap();
        let same = a.probs.iter().zip(&b.probs).all(|(x, y)| x.to_bits() == y.to_bits());
        if !same || a.label != b.label {
            return Err(format!("input {i}: {:?} vs {:?}", a.probs, b.probs));
        }
    }
    Ok(())
}

/// Each corruption and the error name it must produce.
pub fn corruption_cases(model: &FcnModel) -> Vec<(&'static str, &'static str, Result<FcnModel, ModelError>)> {
    let mut good = Vec::new();
    save_model(model, &mut good).unwrap();
    let load = |b: Vec<u8>| load_model(b.as_slice());
    let mut cases = Vec::new();

    let mut b = good.clone();
    b[0] = b'X';
    cases.push(("magic", "BadMagic", load(b)));

    let mut b = good.clone();
    b[4..8].copy_from_slice(&99u32.to_le_bytes());
    cases.push(("version", "UnsupportedVersion", load(b)));

    cases.push(("truncated", "TruncatedPayload", load(good[..good.len() - 9].to_vec())));
    cases.push(("preamble", "TruncatedPayload", load(good[..6].to_vec())));

    let mut b = good.clone();
    let mid = b.len() - 40;
    b[mid] ^= 0x40;
    cases.push(("payload bit flip", "ChecksumMismatch", load(b)));

    let mut b = good.clone();
    let last = b.len() - 1;
    b[last] ^= 1;
    cases.push(("checksum bit flip", "ChecksumMismatch", load(b)));
    cases
}
