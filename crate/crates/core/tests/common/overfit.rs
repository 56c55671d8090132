//! A hand-written training loop built from the public kernels, used to
//! check that the network can memorise a small set.

use emovox::dataset::{make_batches, synth_clips, BatchMode, SynthSpec};
use emovox::dsp::{FeatureConfig, FeatureExtractor, FeatureMap};
use emovox::model::{fcn_loss_and_grads, FcnModel};
use emovox::nn::{adam_step, AdamConfig, AdamState, Rng, Tensor};
use emovox::train::evaluate;

/// Features and labels of `n_classes × per_class` synthetic clips.
pub fn synthetic_features(n_classes: usize, per_class: usize, features: &FeatureConfig, seed: u64) -> (Vec<FeatureMap>, Vec<usize>) {
    let mut ex = FeatureExtractor::new(*features).unwrap();
    synth_clips(&SynthSpec::new(n_classes, per_class), seed)
        .unwrap()
        .into_iter()
        .map(|(_, class, clip)| (ex.extract(&clip).unwrap(), class))
        .unzip()
}

#[derive(Debug, Clone, Copy)]
pub struct Overfit {
    /// First epoch after which every training clip was classified
    /// correctly, if any.
    pub solved_at: Option<usize>,
    pub final_accuracy: f64,
    pub epochs_run: usize,
}

pub fn overfit(mut model: FcnModel, features: &[FeatureMap], labels: &[usize], batch_size: usize, max_epochs: usize, seed: u64) -> Overfit {
    let c = model.n_classes();
    let min = model.config.min_input_shape();
    let refs: Vec<&Tensor<f32>> = model.params.tensors().iter().collect();
    let mut adam = AdamState::new(AdamConfig::default(), &refs);
    let base = Rng::new(seed);
    let (mut shuffle, mut drop) = (base.fork(1), base.fork(2));
    let mut accuracy = 0.0;
    for epoch in 1..=max_epochs {
        let batches = make_batches(features, labels, c, batch_size, BatchMode::PadMask, min, Some(&mut shuffle)).unwrap();
        for b in &batches {
            let (_, grads) =
                fcn_loss_and_grads(&model.config, &model.params, &b.features, Some(&b.extents), &b.labels, Some(&mut drop))
                    .unwrap();
            let mut params: Vec<&mut Tensor<f32>> = model.params.tensors_mut().iter_mut().collect();
            let grads: Vec<&Tensor<f32>> = grads.tensors().iter().collect();
            adam_step(&mut params, &grads, &mut adam).unwrap();
        }
        accuracy = evaluate(&model, features, labels).unwrap().accuracy;
        if accuracy == 100.0 {
            return Overfit {
                solved_at: Some(epoch),
                final_accuracy: accuracy,
                epochs_run: epoch,
            };
        }
    }
    Overfit {
        solved_at: None,
        final_accuracy: accuracy,
        epochs_run: max_epochs,
    }
}
