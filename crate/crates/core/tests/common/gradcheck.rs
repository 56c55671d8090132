//! Finite-difference checks. Each returns the worst relative error seen
//! and how many coordinates were compared.

use emovox::model::{fcn_forward, fcn_loss_and_grads, FcnConfig, FcnParams};
use emovox::nn::{
    conv2d_backward, conv2d_forward, dropout, dropout_backward, global_average_pool, global_average_pool_backward,
    relu, relu_backward, softmax_cross_entropy, Extent, Rng, Tensor,
};

use super::{central_diff, dot, random_tensor, rel_err};

pub const H: f64 = 1e-4;
pub const TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, Default)]
pub struct Check {
    pub worst: f64,
    pub compared: usize,
    pub skipped: usize,
}

impl Check {
    fn add(&mut self, analytic: f64, numeric: f64) {
        self.worst = self.worst.max(rel_err(analytic, numeric));
        self.compared += 1;
    }

    pub fn merge(mut self, other: Check) -> Check {
        self.worst = self.worst.max(other.worst);
        self.compared += other.compared;
        self.skipped += other.skipped;
        self
    }

    pub fn ok(&self) -> bool {
        self.compared > 0 && self.worst < TOL
    }
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

/// Random shapes; probes `Σ probe ⊙ conv(x, w, b)` along every coordinate.
pub fn conv2d(seed: u64, trials: usize) -> Check {
    let mut rng = Rng::new(seed);
    let mut check = Check::default();
    for _ in 0..trials {
        let (n, cin, cout) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(4));
        let (kh, kw) = (1 + rng.below(4), 1 + rng.below(4));
        let (h, w) = (kh + rng.below(5), kw + rng.below(5));
        let (xs, ws) = ([n, h, w, cin], [kh, kw, cin, cout]);
        let x = random_tensor(&xs, &mut rng, 1.0);
        let wts = random_tensor(&ws, &mut rng, 1.0);
        let b = random_tensor(&[cout], &mut rng, 1.0);
        let probe = random_tensor(&[n, h - kh + 1, w - kw + 1, cout], &mut rng, 1.0);
        let g = conv2d_backward(&probe, &x, &wts).unwrap();
        let f = |xv: &[f64], wv: &[f64], bv: &[f64]| {
            let out = conv2d_forward(&t(&xs, xv), &t(&ws, wv), &t(&[cout], bv)).unwrap();
            dot(out.data(), probe.data())
        };
        let (mut xv, mut wv, mut bv) = (x.data().to_vec(), wts.data().to_vec(), b.data().to_vec());
        let gin = g.input.unwrap();
        for i in 0..xv.len() {
            let num = central_diff(&mut xv, i, H, |v| f(v, &wv, &bv));
            check.add(gin.data()[i], num);
        }
        for i in 0..wv.len() {
            let num = central_diff(&mut wv, i, H, |v| f(&xv, v, &bv));
            check.add(g.weights.data()[i], num);
        }
        for i in 0..bv.len() {
            let num = central_diff(&mut bv, i, H, |v| f(&xv, &wv, v));
            check.add(g.bias.data()[i], num);
        }
    }
    check
}

/// Inputs closer than `2h` to the kink are skipped.
pub fn relu_away_from_kink(seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    let x = random_tensor(&[2, 5, 6, 3], &mut rng, 1.0);
    let probe = random_tensor(x.shape(), &mut rng, 1.0);
    let g = relu_backward(&probe, &x).unwrap();
    let mut xv = x.data().to_vec();
    let mut check = Check::default();
    for i in 0..xv.len() {
        if xv[i].abs() < 2.0 * H {
            check.skipped += 1;
            continue;
        }
        let num = central_diff(&mut xv, i, H, |v| dot(relu(&t(x.shape(), v)).data(), probe.data()));
        check.add(g.data()[i], num);
    }
    check
}

/// The mask is held fixed by replaying the same generator state.
pub fn dropout_fixed_mask(seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    let x = random_tensor(&[2, 4, 5, 3], &mut rng, 1.0);
    let probe = random_tensor(x.shape(), &mut rng, 1.0);
    let mask_rng = rng.fork(7);
    let (_, mask) = dropout(&x, 0.5, &mut mask_rng.clone(), true);
    let g = dropout_backward(&probe, &mask).unwrap();
    let mut xv = x.data().to_vec();
    let mut check = Check::default();
    for i in 0..xv.len() {
        let num = central_diff(&mut xv, i, H, |v| {
            let (out, _) = dropout(&t(x.shape(), v), 0.5, &mut mask_rng.clone(), true);
            dot(out.data(), probe.data())
        });
        check.add(g.data()[i], num);
    }
    check
}

pub fn masked_pool(seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    let shape = [3, 6, 7, 2];
    let x = random_tensor(&shape, &mut rng, 1.0);
    let extents = [Extent::new(6, 7), Extent::new(2, 3), Extent::new(5, 1)];
    let probe = random_tensor(&[3, 2], &mut rng, 1.0);
    let g = global_average_pool_backward(&probe, &shape, Some(&extents)).unwrap();
    let mut xv = x.data().to_vec();
    let mut check = Check::default();
    for i in 0..xv.len() {
        let num = central_diff(&mut xv, i, H, |v| {
            dot(global_average_pool(&t(&shape, v), Some(&extents)).unwrap().data(), probe.data())
        });
        check.add(g.data()[i], num);
    }
    check
}

/// Soft targets as well as one-hot ones.
pub fn cross_entropy(seed: u64) -> Check {
    let mut rng = Rng::new(seed);
    let mut check = Check::default();
    for soft in [false, true] {
        let (n, c) = (4, 5);
        let logits = random_tensor(&[n, c], &mut rng, 3.0);
        let mut targets = vec![0.0; n * c];
        for row in targets.chunks_mut(c) {
            if soft {
                let raw: Vec<f64> = (0..c).map(|_| rng.uniform()).collect();
                let s: f64 = raw.iter().sum();
                row.iter_mut().zip(&raw).for_each(|(t, r)| *t = r / s);
            } else {
                row[rng.below(c)] = 1.0;
            }
        }
        let y = t(&[n, c], &targets);
        let out = softmax_cross_entropy(&logits, &y).unwrap();
        let mut lv = logits.data().to_vec();
        for i in 0..lv.len() {
            let num = central_diff(&mut lv, i, H, |v| softmax_cross_entropy(&t(&[n, c], v), &y).unwrap().loss);
            check.add(out.grad_logits.data()[i], num);
        }
    }
    check
}

/// Small-filter network with the full kernel geometry, so the minimum
/// input stays 17×17.
pub fn small_config(n_classes: usize, filters: usize) -> FcnConfig {
    let mut cfg = FcnConfig::new(n_classes);
    cfg.conv1.filters = filters;
    cfg.conv2.filters = filters;
    cfg
}

/// Whole network on a padded batch of two samples with distinct extents,
/// dropout on. A subset of coordinates of every parameter tensor is
/// checked; coordinates whose ±h perturbation changes any hidden ReLU's
/// on/off state are skipped.
pub fn full_model(seed: u64, per_tensor: usize) -> Check {
    let mut rng = Rng::new(seed);
    let cfg = small_config(3, 3);
    let mut params: FcnParams<f64> = FcnParams::init(&cfg, &mut rng);
    for p in params.tensors_mut() {
        if p.shape().len() == 1 {
            p.data_mut().iter_mut().for_each(|v| *v = 0.1 * rng.uniform_range(-1.0, 1.0));
        }
    }
    let extents = [
        Extent::new(17 + rng.below(4), 17 + rng.below(8)),
        Extent::new(17 + rng.below(4), 17 + rng.below(8)),
    ];
    let (h, w) = (extents[0].h.max(extents[1].h), extents[0].w.max(extents[1].w));
    let mut data = vec![0.0; 2 * h * w];
    for (b, e) in extents.iter().enumerate() {
        for i in 0..e.h {
            for j in 0..e.w {
                data[(b * h + i) * w + j] = rng.uniform_range(-1.0, 1.0);
            }
        }
    }
    let batch = t(&[2, h, w, 1], &data);
    let mut onehot = vec![0.0; 2 * 3];
    onehot[rng.below(3)] = 1.0;
    onehot[3 + rng.below(3)] = 1.0;
    let onehot = t(&[2, 3], &onehot);
    let drop_rng = rng.fork(99);

    let (_, grads) =
        fcn_loss_and_grads(&cfg, &params, &batch, Some(&extents), &onehot, Some(&mut drop_rng.clone())).unwrap();
    let eval = |p: &FcnParams<f64>| {
        let cache = fcn_forward(&cfg, p, &batch, Some(&extents), Some(&mut drop_rng.clone()), true).unwrap();
        let loss = softmax_cross_entropy(&cache.logits, &onehot).unwrap().loss;
        let pattern: Vec<bool> = (0..2)
            .flat_map(|l| cache.hidden_activations(l).iter().flatten().map(|&a| a > 0.0).collect::<Vec<_>>())
            .collect();
        (loss, pattern)
    };

    let mut check = Check::default();
    for k in 0..params.tensors().len() {
        let len = params.tensors()[k].len();
        let coords: Vec<usize> = if len <= per_tensor {
            (0..len).collect()
        } else {
            (0..per_tensor).map(|_| rng.below(len)).collect()
        };
        for i in coords {
            let orig = params.tensors()[k].data()[i];
            let mut probe = params.clone();
            probe.tensors_mut()[k].data_mut()[i] = orig + H;
            let (plus, pat_plus) = eval(&probe);
            probe.tensors_mut()[k].data_mut()[i] = orig - H;
            let (minus, pat_minus) = eval(&probe);
            if pat_plus != pat_minus {
                check.skipped += 1;
                continue;
            }
            check.add(grads.tensors()[k].data()[i], (plus - minus) / (2.0 * H));
        }
    }
    check
}

/// Every check above with fixed seeds.
pub fn full_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("conv2d", conv2d(11, 6)),
        ("relu", relu_away_from_kink(12)),
        ("dropout", dropout_fixed_mask(13)),
        ("masked_pool", masked_pool(14)),
        ("cross_entropy", cross_entropy(15)),
        ("full_model", (0..3).map(|s| full_model(16 + s, 40)).fold(Check::default(), Check::merge)),
    ]
}
