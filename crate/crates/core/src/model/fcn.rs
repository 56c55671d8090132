use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dsp::{FeatureConfig, FeatureMap};
use crate::nn::{
    conv_image_backward, conv_image_forward, dropout, dropout_backward, flip_kernel,
    global_average_pool, global_average_pool_backward, glorot_uniform_init, shape_err, softmax,
    softmax_cross_entropy, AdamState, ConvShape, Extent, LossOutput, Rng, Scalar, Tensor,
};

/// Parameter tensor names, in storage and optimizer order.
pub const PARAM_NAMES: [&str; 6] = ["conv1.w", "conv1.b", "conv2.w", "conv2.b", "conv3.w", "conv3.b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    /// `(height, width)`: height runs along feature bins, width along frames.
    pub kernel: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcnConfig {
    pub n_classes: usize,
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    /// Always `n_classes` filters.
    pub conv3: ConvSpec,
    pub dropout_rate: f64,
    pub input_channels: usize,
}

impl FcnConfig {
    pub fn new(n_classes: usize) -> Self {
        Self {
            n_classes,
            conv1: ConvSpec {
                filters: 64,
                kernel: (7, 11),
            },
            conv2: ConvSpec {
                filters: 64,
                kernel: (11, 7),
            },
            conv3: ConvSpec {
                filters: n_classes,
                kernel: (1, 1),
            },
            dropout_rate: 0.5,
            input_channels: 1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.n_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.n_classes));
        }
        if self.conv3.filters != self.n_classes {
            return bad(format!(
                "conv3 has {} filters but there are {} classes",
                self.conv3.filters, self.n_classes
            ));
        }
        for (name, c) in [("conv1", self.conv1), ("conv2", self.conv2), ("conv3", self.conv3)] {
            if c.filters == 0 || c.kernel.0 == 0 || c.kernel.1 == 0 {
                return bad(format!("{name} has a zero extent"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} not in [0, 1)", self.dropout_rate));
        }
        if self.input_channels == 0 {
            return bad("input_channels must be positive".into());
        }
        Ok(())
    }

    fn layers(&self) -> [ConvShape; 3] {
        let shape = |spec: ConvSpec, cin: usize| ConvShape {
            kh: spec.kernel.0,
            kw: spec.kernel.1,
            cin,
            cout: spec.filters,
        };
        [
            shape(self.conv1, self.input_channels),
            shape(self.conv2, self.conv1.filters),
            shape(self.conv3, self.conv2.filters),
        ]
    }

    /// Rows and columns lost to the three valid convolutions.
    fn shrink(&self) -> (usize, usize) {
        self.layers()
            .iter()
            .fold((0, 0), |(h, w), s| (h + s.kh - 1, w + s.kw - 1))
    }

    pub fn min_input_shape(&self) -> (usize, usize) {
        let (h, w) = self.shrink();
        (h + 1, w + 1)
    }

    pub fn parameter_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut out = Vec::with_capacity(6);
        for (i, s) in self.layers().iter().enumerate() {
            out.push((PARAM_NAMES[2 * i], vec![s.kh, s.kw, s.cin, s.cout]));
            out.push((PARAM_NAMES[2 * i + 1], vec![s.cout]));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}

/// Smallest `(height, width)` input the network accepts.
pub fn min_input_shape(config: &FcnConfig) -> (usize, usize) {
    config.min_input_shape()
}

/// The six parameter tensors, in [`PARAM_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnParams<T: Scalar = f32> {
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> FcnParams<T> {
    /// Glorot-uniform weights and zero biases.
    pub fn init(config: &FcnConfig, rng: &mut Rng) -> Self {
        let tensors = config
            .parameter_shapes()
            .into_iter()
            .map(|(_, shape)| {
                if shape.len() == 4 {
                    let field = shape[0] * shape[1];
                    glorot_uniform_init(&shape, field * shape[2], field * shape[3], rng)
                } else {
                    Tensor::zeros(&shape)
                }
            })
            .collect();
        Self { tensors }
    }

    pub fn zeros(config: &FcnConfig) -> Self {
        Self {
            tensors: config
                .parameter_shapes()
                .iter()
                .map(|(_, s)| Tensor::zeros(s))
                .collect(),
        }
    }

    /// Checks every tensor against the shapes `config` implies.
    pub fn from_tensors(config: &FcnConfig, tensors: Vec<Tensor<T>>) -> Result<Self, ModelError> {
        let shapes = config.parameter_shapes();
        if tensors.len() != shapes.len() {
            return Err(ModelError::InvalidConfig(format!("expected 6 tensors, got {}", tensors.len())));
        }
        for ((name, shape), t) in shapes.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(ModelError::InvalidConfig(format!(
                    "{name} has shape {:?}, config implies {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(Self { tensors })
    }

    pub fn tensors(&self) -> &[Tensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        PARAM_NAMES.iter().position(|n| *n == name).map(|i| &self.tensors[i])
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> FcnParams<U> {
        FcnParams {
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }
}

/// Activations kept by [`fcn_forward`] for [`fcn_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Scalar = f32> {
    input_extents: Vec<Extent>,
    head_extents: Vec<Extent>,
    head_shape: [usize; 4],
    inputs: Vec<Vec<T>>,
    /// Post-ReLU activations of the first two layers, per sample.
    act1: Vec<Vec<T>>,
    act2: Vec<Vec<T>>,
    dropout_mask: Option<Tensor<T>>,
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn head_extents(&self) -> &[Extent] {
        &self.head_extents
    }

    /// Post-ReLU activations of hidden layer `layer` (0 or 1), one vector
    /// per sample. Empty unless the pass kept its cache.
    pub fn hidden_activations(&self, layer: usize) -> &[Vec<T>] {
        match layer {
            0 => &self.act1,
            1 => &self.act2,
            _ => panic!("the network has two hidden layers, not {}", layer + 1),
        }
    }
}

fn check_extents(
    config: &FcnConfig,
    n: usize,
    h: usize,
    w: usize,
    extents: Option<&[Extent]>,
) -> Result<Vec<Extent>, ModelError> {
    let (min_h, min_w) = config.min_input_shape();
    let extents = match extents {
        Some(e) if e.len() != n => {
            return Err(shape_err(format!("{} extents for a batch of {n}", e.len())).into())
        }
        Some(e) => e.to_vec(),
        None => vec![Extent::new(h, w); n],
    };
    for e in &extents {
        if e.h > h || e.w > w {
            return Err(shape_err(format!("extent {}x{} exceeds batch {h}x{w}", e.h, e.w)).into());
        }
        if e.h < min_h || e.w < min_w {
            return Err(ModelError::InputBelowMinimum {
                h: e.h,
                w: e.w,
                min_h,
                min_w,
            });
        }
    }
    Ok(extents)
}

fn relu_in_place<T: Scalar>(v: &mut [T]) {
    for x in v {
        if !(*x > T::ZERO) {
            *x = T::ZERO;
        }
    }
}

/// Zeroes `grad` wherever the post-ReLU activation is not positive.
fn relu_gate<T: Scalar>(grad: &mut [T], act: &[T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if !(a > T::ZERO) {
            *g = T::ZERO;
        }
    }
}

/// Network forward pass on a zero-padded `(N, H, W, cin)` batch.
///
/// Each sample is cropped to its extent before the convolutions, so padding
/// never reaches the activations; the pooled head only averages the region
/// produced by real input. Dropout is applied iff `dropout_rng` is given.
pub fn fcn_forward<T: Scalar>(
    config: &FcnConfig,
    params: &FcnParams<T>,
    batch: &Tensor<T>,
    extents: Option<&[Extent]>,
    dropout_rng: Option<&mut Rng>,
    keep_cache: bool,
) -> Result<ForwardCache<T>, ModelError> {
    let (n, h, w, cin) = batch.dims4("network input")?;
    if cin != config.input_channels {
        return Err(shape_err(format!(
            "input has {cin} channels, model expects {}",
            config.input_channels
        ))
        .into());
    }
    let input_extents = check_extents(config, n, h, w, extents)?;
    let [s1, s2, s3] = config.layers();
    let (dh, dw) = config.shrink();
    let head_shape = [n, h - dh, w - dw, s3.cout];
    let head_extents: Vec<Extent> = input_extents
        .iter()
        .map(|e| Extent::new(e.h - dh, e.w - dw))
        .collect();
    let p = params.tensors();

    let mut head = Tensor::zeros(&head_shape);
    let mut cache_inputs = Vec::new();
    let mut cache_a1 = Vec::new();
    let mut cache_a2 = Vec::new();
    for (b, e) in input_extents.iter().enumerate() {
        let mut x = Vec::with_capacity(e.h * e.w * cin);
        for i in 0..e.h {
            let row = ((b * h + i) * w) * cin;
            x.extend_from_slice(&batch.data()[row..row + e.w * cin]);
        }
        let (h1, w1) = (e.h - s1.kh + 1, e.w - s1.kw + 1);
        let mut a1 = conv_image_forward(&x, e.h, e.w, p[0].data(), p[1].data(), s1);
        relu_in_place(&mut a1);
        let (h2, w2) = (h1 - s2.kh + 1, w1 - s2.kw + 1);
        let mut a2 = conv_image_forward(&a1, h1, w1, p[2].data(), p[3].data(), s2);
        relu_in_place(&mut a2);
        let (h3, w3) = (h2 - s3.kh + 1, w2 - s3.kw + 1);
        let z = conv_image_forward(&a2, h2, w2, p[4].data(), p[5].data(), s3);
        let c = s3.cout;
        for i in 0..h3 {
            let dst = ((b * head_shape[1] + i) * head_shape[2]) * c;
            head.data_mut()[dst..dst + w3 * c].copy_from_slice(&z[i * w3 * c..(i + 1) * w3 * c]);
        }
        if keep_cache {
            cache_inputs.push(x);
            cache_a1.push(a1);
            cache_a2.push(a2);
        }
    }

    let (head, dropout_mask) = match dropout_rng {
        Some(rng) => {
            let (out, mask) = dropout(&head, config.dropout_rate, rng, true);
            (out, Some(mask))
        }
        None => (head, None),
    };
    let logits = global_average_pool(&head, Some(&head_extents))?;
    let probs = softmax(&logits)?;
    Ok(ForwardCache {
        input_extents,
        head_extents,
        head_shape,
        inputs: cache_inputs,
        act1: cache_a1,
        act2: cache_a2,
        dropout_mask,
        logits,
        probs,
    })
}

/// Parameter gradients given the loss gradient with respect to the logits.
pub fn fcn_backward<T: Scalar>(
    config: &FcnConfig,
    params: &FcnParams<T>,
    cache: &ForwardCache<T>,
    grad_logits: &Tensor<T>,
) -> Result<FcnParams<T>, ModelError> {
    if cache.act1.len() != cache.input_extents.len() {
        return Err(ModelError::InvalidConfig("forward cache was not kept".into()));
    }
    let [s1, s2, s3] = config.layers();
    let p = params.tensors();
    let mut grads = FcnParams::zeros(config);
    let mut dhead = global_average_pool_backward(grad_logits, &cache.head_shape, Some(&cache.head_extents))?;
    if let Some(mask) = &cache.dropout_mask {
        dhead = dropout_backward(&dhead, mask)?;
    }
    let flip3 = flip_kernel(p[4].data(), s3);
    let flip2 = flip_kernel(p[2].data(), s2);
    let [_, hh, hw, c] = cache.head_shape;

    let g = grads.tensors_mut();
    let (g1, rest) = g.split_at_mut(2);
    let (g2, g3) = rest.split_at_mut(2);
    let (g1w, g1b) = g1.split_at_mut(1);
    let (g2w, g2b) = g2.split_at_mut(1);
    let (g3w, g3b) = g3.split_at_mut(1);
    for (b, e) in cache.input_extents.iter().enumerate() {
        let (h1, w1) = (e.h - s1.kh + 1, e.w - s1.kw + 1);
        let (h2, w2) = (h1 - s2.kh + 1, w1 - s2.kw + 1);
        let (h3, w3) = (h2 - s3.kh + 1, w2 - s3.kw + 1);
        let mut d3 = Vec::with_capacity(h3 * w3 * c);
        for i in 0..h3 {
            let src = ((b * hh + i) * hw) * c;
            d3.extend_from_slice(&dhead.data()[src..src + w3 * c]);
        }
        let a2 = &cache.act2[b];
        let a1 = &cache.act1[b];
        let mut da2 = conv_image_backward(
            &d3,
            a2,
            h2,
            w2,
            s3,
            Some(&flip3),
            g3w[0].data_mut(),
            g3b[0].data_mut(),
        )
        .expect("input gradient requested");
        relu_gate(&mut da2, a2);
        let mut da1 = conv_image_backward(
            &da2,
            a1,
            h1,
            w1,
            s2,
            Some(&flip2),
            g2w[0].data_mut(),
            g2b[0].data_mut(),
        )
        .expect("input gradient requested");
        relu_gate(&mut da1, a1);
        conv_image_backward(
            &da1,
            &cache.inputs[b],
            e.h,
            e.w,
            s1,
            None,
            g1w[0].data_mut(),
            g1b[0].data_mut(),
        );
    }
    Ok(grads)
}

/// Forward, cross-entropy and backward in one call.
pub fn fcn_loss_and_grads<T: Scalar>(
    config: &FcnConfig,
    params: &FcnParams<T>,
    batch: &Tensor<T>,
    extents: Option<&[Extent]>,
    onehot: &Tensor<T>,
    dropout_rng: Option<&mut Rng>,
) -> Result<(LossOutput<T>, FcnParams<T>), ModelError> {
    let cache = fcn_forward(config, params, batch, extents, dropout_rng, true)?;
    let loss = softmax_cross_entropy(&cache.logits, onehot)?;
    let grads = fcn_backward(config, params, &cache, &loss.grad_logits)?;
    Ok((loss, grads))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probs: Vec<f64>,
    pub label: String,
    pub argmax_index: usize,
}

impl Prediction {
    /// Argmax with ties going to the lowest index.
    pub fn from_probs(probs: Vec<f64>, class_names: &[String]) -> Self {
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Self {
            label: class_names[best].clone(),
            argmax_index: best,
            probs,
        }
    }
}

/// Anything that maps a feature map to a class prediction.
pub trait Classifier {
    fn class_names(&self) -> &[String];
    fn predict(&self, features: &FeatureMap) -> Result<Prediction, ModelError>;
}

/// Architecture, weights, class names and (when trained) optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnModel {
    pub config: FcnConfig,
    pub params: FcnParams<f32>,
    pub class_names: Vec<String>,
    pub optimizer: Option<AdamState<f32>>,
    /// Feature extraction the model was trained on, if recorded.
    pub features: Option<FeatureConfig>,
}

/// Fresh model with Glorot-initialised weights.
pub fn build_fcn(config: FcnConfig, class_names: Vec<String>, rng: &mut Rng) -> Result<FcnModel, ModelError> {
    config.validate()?;
    if class_names.len() != config.n_classes {
        return Err(ModelError::InvalidConfig(format!(
            "{} class names for {} classes",
            class_names.len(),
            config.n_classes
        )));
    }
    let params = FcnParams::init(&config, rng);
    Ok(FcnModel {
        config,
        params,
        class_names,
        optimizer: None,
        features: None,
    })
}

impl FcnModel {
    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Returns class probabilities `(N, C)` and the cache for a backward
    /// pass. `training` enables dropout and then requires `rng`.
    pub fn forward(
        &self,
        batch: &Tensor<f32>,
        extents: Option<&[Extent]>,
        training: bool,
        rng: Option<&mut Rng>,
    ) -> Result<(Tensor<f32>, ForwardCache<f32>), ModelError> {
        let rng = match (training, rng) {
            (true, None) => {
                return Err(ModelError::InvalidConfig("training forward needs an rng".into()))
            }
            (true, r) => r,
            (false, _) => None,
        };
        let cache = fcn_forward(&self.config, &self.params, batch, extents, rng, training)?;
        Ok((cache.probs.clone(), cache))
    }

    /// Inference-mode probabilities without keeping activations.
    pub fn predict_batch(&self, batch: &Tensor<f32>, extents: Option<&[Extent]>) -> Result<Tensor<f32>, ModelError> {
        Ok(fcn_forward(&self.config, &self.params, batch, extents, None, false)?.probs)
    }

    pub fn predict(&self, features: &FeatureMap) -> Result<Prediction, ModelError> {
        let (bins, frames) = features.shape();
        let data = features.values().iter().map(|&v| v as f32).collect();
        let batch = Tensor::from_vec(&[1, bins, frames, 1], data)?;
        let probs = self.predict_batch(&batch, None)?;
        let probs = probs.data().iter().map(|&p| p as f64).collect();
        Ok(Prediction::from_probs(probs, &self.class_names))
    }
}

impl Classifier for FcnModel {
    fn class_names(&self) -> &[String] {
        &self.class_names
    }

    fn predict(&self, features: &FeatureMap) -> Result<Prediction, ModelError> {
        FcnModel::predict(self, features)
    }
}
