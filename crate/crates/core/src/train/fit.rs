use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};
use crate::dataset::make_batches;
use crate::dsp::FeatureMap;
use crate::model::{fcn_forward, fcn_loss_and_grads, FcnModel};
use crate::nn::{adam_step, softmax_cross_entropy, AdamState, Rng, Tensor};

/// Rng sub-streams derived from the training seed.
const VAL_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Number of epochs run (1-based index of the last one).
    pub stopped_epoch: usize,
    /// 1-based epoch whose weights were returned.
    pub best_epoch: usize,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// CSV with columns `epoch,train_loss,train_acc,val_loss,val_acc`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.history {
            w.serialize(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Vec<EpochRecord>, TrainError> {
        csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| TrainError::BadReport(e.to_string()))
    }
}

fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Mean loss and accuracy (%) of `model` in inference mode.
fn score(model: &FcnModel, features: &[&FeatureMap], labels: &[usize], batch_size: usize) -> Result<(f64, f64), TrainError> {
    let c = model.n_classes();
    let min = model.config.min_input_shape();
    let batches = make_batches(features, labels, c, batch_size, crate::dataset::BatchMode::PadMask, min, None)?;
    let (mut loss, mut correct) = (0.0, 0usize);
    for b in &batches {
        let cache = fcn_forward(&model.config, &model.params, &b.features, Some(&b.extents), None, false)?;
        let out = softmax_cross_entropy(&cache.logits, &b.labels).map_err(crate::model::ModelError::from)?;
        loss += out.loss * b.len() as f64;
        correct += count_correct(&cache.probs, b.indices.iter().map(|&i| labels[i]), c);
    }
    let n = features.len() as f64;
    Ok((loss / n, 100.0 * correct as f64 / n))
}

fn count_correct(probs: &Tensor<f32>, truth: impl Iterator<Item = usize>, c: usize) -> usize {
    probs
        .data()
        .chunks_exact(c)
        .zip(truth)
        .filter(|(row, t)| argmax(row) == *t)
        .count()
}

/// Trains `model` on `features`/`labels`, holding out `val_fraction` of
/// them for early stopping on validation loss.
///
/// The patience counter resets only on an improvement larger than
/// `min_delta`; the restored weights are those of the epoch with the lowest
/// validation loss seen. A non-finite batch loss aborts training.
pub fn train(
    mut model: FcnModel,
    features: &[FeatureMap],
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(FcnModel, TrainReport), TrainError> {
    cfg.validate()?;
    assert_eq!(features.len(), labels.len(), "one label per feature map");
    let start = Instant::now();
    let n = features.len();
    let n_val = ((cfg.val_fraction * n as f64).round() as usize).max(1);
    if n < 2 || n_val >= n {
        return Err(TrainError::DatasetTooSmall(format!(
            "{n} examples leave no training data after a {n_val}-example validation carve-out"
        )));
    }
    let base = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    base.fork(VAL_STREAM).shuffle(&mut order);
    let (val_idx, train_idx) = order.split_at(n_val);
    let train_feats: Vec<&FeatureMap> = train_idx.iter().map(|&i| &features[i]).collect();
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let val_feats: Vec<&FeatureMap> = val_idx.iter().map(|&i| &features[i]).collect();
    let val_labels: Vec<usize> = val_idx.iter().map(|&i| labels[i]).collect();

    let c = model.n_classes();
    let min = model.config.min_input_shape();
    let mut shuffle_rng = base.fork(SHUFFLE_STREAM);
    let mut dropout_rng = base.fork(DROPOUT_STREAM);
    if model.optimizer.is_none() {
        let refs: Vec<&Tensor<f32>> = model.params.tensors().iter().collect();
        model.optimizer = Some(AdamState::new(cfg.adam, &refs));
    }
    if let Some(opt) = model.optimizer.as_mut() {
        opt.config = cfg.adam;
    }

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, FcnModel)> = None;
    let mut reference = f64::INFINITY;
    let mut wait = 0;
    for epoch in 1..=cfg.max_epochs {
        let batches = make_batches(
            &train_feats,
            &train_labels,
            c,
            cfg.batch_size,
            cfg.batch_mode,
            min,
            Some(&mut shuffle_rng),
        )?;
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (bi, b) in batches.iter().enumerate() {
            let (out, grads) = fcn_loss_and_grads(
                &model.config,
                &model.params,
                &b.features,
                Some(&b.extents),
                &b.labels,
                Some(&mut dropout_rng),
            )?;
            if !out.loss.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: bi });
            }
            loss_sum += out.loss * b.len() as f64;
            correct += count_correct(&out.probs, b.indices.iter().map(|&i| train_labels[i]), c);
            let state = model.optimizer.as_mut().expect("initialised above");
            let mut params: Vec<&mut Tensor<f32>> = model.params.tensors_mut().iter_mut().collect();
            let grad_refs: Vec<&Tensor<f32>> = grads.tensors().iter().collect();
            adam_step(&mut params, &grad_refs, state).map_err(crate::model::ModelError::from)?;
        }
        let (val_loss, val_acc) = score(&model, &val_feats, &val_labels, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(TrainError::NonFiniteLoss { epoch, batch: batches.len() });
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_feats.len() as f64,
            train_acc: 100.0 * correct as f64 / train_feats.len() as f64,
            val_loss,
            val_acc,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} acc {:.2}% val_loss {:.4} val_acc {:.2}%",
            record.train_loss,
            record.train_acc,
            val_loss,
            val_acc
        );
        history.push(record);

        if best.as_ref().is_none_or(|(l, _, _)| val_loss < *l) {
            best = Some((val_loss, epoch, model.clone()));
        }
        if val_loss < reference - cfg.early_stop.min_delta {
            reference = val_loss;
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.early_stop.patience {
                break;
            }
        }
    }
    let stopped_epoch = history.len();
    let (_, best_epoch, best_model) = best.expect("at least one epoch ran");
    let (model, best_epoch) = if cfg.early_stop.restore_best {
        (best_model, best_epoch)
    } else {
        (model, stopped_epoch)
    };
    Ok((
        model,
        TrainReport {
            history,
            stopped_epoch,
            best_epoch,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Descriptor;
    use crate::model::{build_fcn, FcnConfig};
    use crate::train::EarlyStopping;

    fn toy(n: usize, c: usize, seed: u64) -> (Vec<FeatureMap>, Vec<usize>) {
        let mut rng = Rng::new(seed);
        (0..n)
            .map(|i| {
                let (h, w) = (18 + rng.below(4), 18 + rng.below(6));
                let label = i % c;
                let vals = (0..h * w).map(|_| rng.normal() + label as f64).collect();
                let times = (0..w).map(|t| t as f64).collect();
                (FeatureMap::new(h, w, vals, times, Descriptor::Mfcc).unwrap(), label)
            })
            .unzip()
    }

    fn model(c: usize) -> FcnModel {
        let mut cfg = FcnConfig::new(c);
        cfg.conv1.filters = 4;
        cfg.conv2.filters = 4;
        build_fcn(cfg, (0..c).map(|k| format!("c{k}")).collect(), &mut Rng::new(1)).unwrap()
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            max_epochs: 40,
            batch_size: 4,
            early_stop: EarlyStopping {
                patience: 3,
                ..EarlyStopping::default()
            },
            val_fraction: 0.25,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn frozen_weights_stop_after_patience() {
        let (f, l) = toy(12, 2, 3);
        let mut cfg = quick_cfg();
        cfg.adam.lr = 0.0;
        let start = model(2);
        let (trained, report) = train(start.clone(), &f, &l, &cfg).unwrap();
        assert_eq!(report.stopped_epoch, 1 + cfg.early_stop.patience);
        assert_eq!(report.best_epoch, 1);
        assert_eq!(report.history.len(), report.stopped_epoch);
        assert_eq!(trained.params, start.params);
    }

    #[test]
    fn same_seed_same_result() {
        let (f, l) = toy(12, 2, 4);
        let cfg = TrainConfig { max_epochs: 5, ..quick_cfg() };
        let (ma, mut ra) = train(model(2), &f, &l, &cfg).unwrap();
        let (mb, mut rb) = train(model(2), &f, &l, &cfg).unwrap();
        ra.wall_time_s = 0.0;
        rb.wall_time_s = 0.0;
        assert_eq!(ra, rb);
        assert_eq!(ma, mb);
    }

    #[test]
    fn restored_weights_have_the_lowest_val_loss() {
        let (f, l) = toy(16, 2, 5);
        let cfg = TrainConfig { max_epochs: 12, ..quick_cfg() };
        let (_, r) = train(model(2), &f, &l, &cfg).unwrap();
        let best = r.history[r.best_epoch - 1].val_loss;
        assert!(r.history.iter().all(|h| best <= h.val_loss));
        let csv = r.to_csv();
        assert!(csv.starts_with("epoch,train_loss,train_acc,val_loss,val_acc\n"));
        assert_eq!(TrainReport::from_csv(&csv).unwrap(), r.history);
    }

    #[test]
    fn rejects_too_small_and_bad_config() {
        let (f, l) = toy(1, 2, 6);
        assert!(matches!(train(model(2), &f, &l, &quick_cfg()), Err(TrainError::DatasetTooSmall(_))));
        let (f, l) = toy(8, 2, 6);
        let cfg = TrainConfig { val_fraction: 1.0, ..quick_cfg() };
        assert!(matches!(train(model(2), &f, &l, &cfg), Err(TrainError::InvalidConfig(_))));
    }
}
