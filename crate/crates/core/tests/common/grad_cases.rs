//! Finite-difference gradient cases, one per differentiable operation.
//!
//! Each case builds random inputs in [-1, 1] from `seed`, projects the
//! output onto a random direction and returns the worst relative error.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seld_core::data::EventLabelGrid;
use seld_core::gradcheck::{random_projection, uniform_variable, GradCheck, GradReport};
use seld_core::model::{seld_loss, LabelBatch, ModelConfig, SeldModel};
use seld_core::nn::{BiGru, Merge, Parameter};
use seld_core::ops::{self, Activation, BatchNormParams, Mode, Padding, RunningStats};
use seld_core::se::{ChannelSe, Combine, ResidualBlock, ResidualBlockConfig, ScSe, SeConfig, SpatialSe};
use seld_core::{Result, Tensor};

pub const OP_TOLERANCE: f64 = 1e-4;
pub const MODEL_TOLERANCE: f64 = 1e-3;
pub const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

pub type Case = fn(u64) -> Result<GradReport>;

/// Every per-operation case, by name.
pub const CASES: &[(&str, Case)] = &[
    ("conv2d same", conv2d_same),
    ("conv2d valid", conv2d_valid),
    ("conv2d 1x1", conv2d_pointwise),
    ("batch_norm2d train", batch_norm_train),
    ("batch_norm2d eval", batch_norm_eval),
    ("max_pool2d", max_pool),
    ("global_avg_pool2d", global_avg_pool),
    ("dense", dense),
    ("relu", relu),
    ("sigmoid", sigmoid),
    ("tanh", tanh),
    ("elementwise", elementwise),
    ("shape ops", shape_ops),
    ("gru bidirectional multiply", bigru_multiply),
    ("gru bidirectional concat", bigru_concat),
    ("cSE", cse),
    ("sSE", sse),
    ("scSE add", scse_add),
    ("scSE max", scse_max),
    ("conv-residual block", residual_block),
    ("conv-residual block projection", residual_block_projection),
    ("conv-standard-post block", standard_post_block),
    ("binary cross-entropy", bce),
    ("masked mse", masked_mse),
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9).wrapping_add(17))
}

fn var(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    uniform_variable(shape, rng).expect("valid shape")
}

/// Moves biases and BN affine parameters off their all-zero / all-one
/// initial values, so no ReLU sits exactly at its kink.
pub fn randomize_offsets(params: &[&Parameter<f64>], rng: &mut ChaCha8Rng) {
    for p in params {
        let range = if p.name().ends_with("gamma") {
            0.5..1.5
        } else if p.name().ends_with("bias") || p.name().ends_with("beta") {
            -0.5..0.5
        } else {
            continue;
        };
        let n = p.numel();
        *p.tensor().data_mut() = (0..n).map(|_| rng.gen_range(range.clone())).collect();
    }
}

fn named<'a>(params: &[&'a Parameter<f64>]) -> Vec<(&'a str, &'a Tensor<f64>)> {
    params.iter().map(|p| (p.name(), p.tensor())).collect()
}

fn check(seed: u64, inputs: &[(&str, &Tensor<f64>)], f: impl Fn() -> Result<Tensor<f64>>) -> Result<GradReport> {
    GradCheck::default().run(inputs, || random_projection(&f()?, seed))
}

fn conv_case(seed: u64, x: [usize; 4], w: [usize; 4], padding: Padding) -> Result<GradReport> {
    let mut r = rng(seed);
    let (x, w, b) = (var(&x, &mut r), var(&w, &mut r), var(&[w[0]], &mut r));
    check(seed, &[("x", &x), ("w", &w), ("b", &b)], || {
        ops::conv2d(&x, &w, Some(&b), padding)
    })
}

pub fn conv2d_same(seed: u64) -> Result<GradReport> {
    conv_case(seed, [2, 3, 8, 8], [4, 3, 3, 3], Padding::Same)
}

pub fn conv2d_valid(seed: u64) -> Result<GradReport> {
    conv_case(seed, [1, 2, 5, 6], [3, 2, 3, 3], Padding::Valid)
}

pub fn conv2d_pointwise(seed: u64) -> Result<GradReport> {
    conv_case(seed, [2, 3, 4, 5], [4, 3, 1, 1], Padding::Same)
}

pub fn batch_norm_train(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let (x, g, b) = (var(&[2, 3, 4, 4], &mut r), var(&[3], &mut r), var(&[3], &mut r));
    let stats = RefCell::new(None);
    check(seed, &[("x", &x), ("gamma", &g), ("beta", &b)], || {
        ops::batch_norm2d(&x, &g, &b, &stats, Mode::Train, BatchNormParams::default())
    })
}

pub fn batch_norm_eval(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let (x, g, b) = (var(&[2, 3, 4, 4], &mut r), var(&[3], &mut r), var(&[3], &mut r));
    let stats = RefCell::new(Some(RunningStats {
        mean: (0..3).map(|_| r.gen_range(-0.5..0.5)).collect(),
        var: (0..3).map(|_| r.gen_range(0.5..2.0)).collect(),
    }));
    check(seed, &[("x", &x), ("gamma", &g), ("beta", &b)], || {
        ops::batch_norm2d(&x, &g, &b, &stats, Mode::Eval, BatchNormParams::default())
    })
}

pub fn max_pool(seed: u64) -> Result<GradReport> {
    let x = var(&[2, 3, 4, 6], &mut rng(seed));
    check(seed, &[("x", &x)], || ops::max_pool2d(&x, 2, 3))
}

pub fn global_avg_pool(seed: u64) -> Result<GradReport> {
    let x = var(&[2, 3, 4, 5], &mut rng(seed));
    check(seed, &[("x", &x)], || ops::global_avg_pool2d(&x))
}

pub fn dense(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let (x, w, b) = (var(&[2, 3, 5], &mut r), var(&[5, 4], &mut r), var(&[4], &mut r));
    check(seed, &[("x", &x), ("w", &w), ("b", &b)], || {
        ops::dense(&x, &w, Some(&b))
    })
}

fn activation_case(seed: u64, kind: Activation) -> Result<GradReport> {
    let x = var(&[3, 4, 5], &mut rng(seed));
    check(seed, &[("x", &x)], || Ok(ops::activation(&x, kind)))
}

pub fn relu(seed: u64) -> Result<GradReport> {
    activation_case(seed, Activation::Relu)
}

pub fn sigmoid(seed: u64) -> Result<GradReport> {
    activation_case(seed, Activation::Sigmoid)
}

pub fn tanh(seed: u64) -> Result<GradReport> {
    activation_case(seed, Activation::Tanh)
}

/// add, sub, mul, maximum, scale, sum and mean composed in one graph.
pub fn elementwise(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let (a, b) = (var(&[3, 4], &mut r), var(&[3, 4], &mut r));
    GradCheck::default().run(&[("a", &a), ("b", &b)], || {
        let s = ops::add(&a, &b)?;
        let d = ops::sub(&a, &b)?;
        let m = ops::mul(&s, &d)?;
        let mx = ops::maximum(&m, &ops::scale(&a, 0.7))?;
        let extra = ops::scale(&ops::mean(&ops::mul(&a, &a)?), 0.3);
        ops::add(&random_projection(&mx, seed)?, &ops::add(&extra, &ops::sum(&b))?)
    })
}

/// reshape, permute, concat and dropout with a fixed mask.
pub fn shape_ops(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let (a, b) = (var(&[2, 3, 4], &mut r), var(&[2, 3, 2], &mut r));
    check(seed, &[("a", &a), ("b", &b)], || {
        let c = ops::concat_last(&a, &b)?;
        let p = ops::permute(&c, &[2, 0, 1])?;
        let p = ops::reshape(&p, &[6, 6])?;
        let mut drop_rng = ChaCha8Rng::seed_from_u64(seed);
        ops::dropout(&p, 0.3, &mut drop_rng)
    })
}

fn bigru_case(seed: u64, merge: Merge) -> Result<GradReport> {
    let mut r = rng(seed);
    let layer = BiGru::<f64>::new("rnn", 5, 4, merge, &mut r)?;
    for p in layer.parameters() {
        let n = p.numel();
        *p.tensor().data_mut() = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
    }
    let x = var(&[2, 3, 5], &mut r);
    let params = layer.parameters();
    let mut inputs = named(&params);
    inputs.push(("x", &x));
    check(seed, &inputs, || layer.forward(&x))
}

pub fn bigru_multiply(seed: u64) -> Result<GradReport> {
    bigru_case(seed, Merge::Multiply)
}

pub fn bigru_concat(seed: u64) -> Result<GradReport> {
    bigru_case(seed, Merge::Concat)
}

fn se_input(r: &mut ChaCha8Rng) -> Tensor<f64> {
    var(&[2, 8, 5, 6], r)
}

pub fn cse(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let m = ChannelSe::<f64>::new("cse", SeConfig::new(2, 8)?, &mut r)?;
    randomize_offsets(&m.parameters(), &mut r);
    let x = se_input(&mut r);
    let params = m.parameters();
    let mut inputs = named(&params);
    inputs.push(("x", &x));
    check(seed, &inputs, || m.forward(&x))
}

pub fn sse(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let m = SpatialSe::<f64>::new("sse", 8, &mut r)?;
    randomize_offsets(&m.parameters(), &mut r);
    let x = se_input(&mut r);
    let params = m.parameters();
    let mut inputs = named(&params);
    inputs.push(("x", &x));
    check(seed, &inputs, || m.forward(&x))
}

fn scse_case(seed: u64, combine: Combine) -> Result<GradReport> {
    let mut r = rng(seed);
    let cfg = SeConfig {
        combine,
        ..SeConfig::new(2, 8)?
    };
    let m = ScSe::<f64>::new("scse", cfg, &mut r)?;
    randomize_offsets(&m.parameters(), &mut r);
    let x = se_input(&mut r);
    let params = m.parameters();
    let mut inputs = named(&params);
    inputs.push(("x", &x));
    check(seed, &inputs, || m.forward(&x))
}

pub fn scse_add(seed: u64) -> Result<GradReport> {
    scse_case(seed, Combine::Add)
}

pub fn scse_max(seed: u64) -> Result<GradReport> {
    scse_case(seed, Combine::Max)
}

fn block_case(seed: u64, cfg: ResidualBlockConfig) -> Result<GradReport> {
    let mut r = rng(seed);
    let block = ResidualBlock::<f64>::new("block", cfg, &mut r)?;
    randomize_offsets(&block.parameters(), &mut r);
    let x = var(&[1, cfg.in_channels, 6, 6], &mut r);
    let params = block.parameters();
    let mut inputs = named(&params);
    inputs.push(("x", &x));
    check(seed, &inputs, || block.forward(&x, Mode::Train))
}

pub fn residual_block(seed: u64) -> Result<GradReport> {
    block_case(seed, ResidualBlockConfig::plain(4, 4))
}

pub fn residual_block_projection(seed: u64) -> Result<GradReport> {
    block_case(seed, ResidualBlockConfig::plain(4, 8))
}

pub fn standard_post_block(seed: u64) -> Result<GradReport> {
    block_case(seed, ResidualBlockConfig::standard_post(4, 8, 2)?)
}

pub fn bce(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let n = 24;
    let pred = Tensor::variable(&[4, 6], (0..n).map(|_| r.gen_range(0.05..0.95)).collect())?;
    let target = Tensor::from_vec(
        &[4, 6],
        (0..n)
            .map(|i| {
                if i % 3 == 0 {
                    r.gen_range(0.0..1.0)
                } else {
                    f64::from(r.gen_range(0..2u8))
                }
            })
            .collect(),
    )?;
    check(seed, &[("pred", &pred)], || ops::binary_cross_entropy(&pred, &target))
}

pub fn masked_mse(seed: u64) -> Result<GradReport> {
    let mut r = rng(seed);
    let pred = var(&[3, 6], &mut r);
    let target = uniform_variable(&[3, 6], &mut r)?.detach();
    let mask = Tensor::from_vec(&[3, 6], (0..18).map(|i| f64::from(u8::from(i % 4 != 1))).collect())?;
    check(seed, &[("pred", &pred)], || ops::masked_mse(&pred, &target, &mask))
}

/// Full model in train mode (dropout off) on a `[1, 10, 60, 64]` input with
/// the joint loss; `coords` coordinates sampled per parameter tensor.
/// Central-difference step for the full network. Smaller than the default
/// so perturbations rarely carry a ReLU or max-pool input across its kink.
pub const MODEL_STEP: f64 = 1e-6;
/// Coordinates sampled per parameter tensor in the full-network check.
pub const MODEL_COORDS: usize = 4;

pub fn full_model(seed: u64) -> Result<GradReport> {
    full_model_with(
        seed,
        GradCheck {
            step: MODEL_STEP,
            ..GradCheck::sampled(MODEL_COORDS, seed)
        },
    )
}

pub fn full_model_with(seed: u64, check: GradCheck) -> Result<GradReport> {
    let mut cfg = ModelConfig::standard_post(1)?.with_input_frames(60)?;
    cfg.dropout = 0.0;
    let model = SeldModel::<f64>::new(cfg.clone(), seed)?;
    let mut r = rng(seed);
    randomize_offsets(&model.parameters(), &mut r);
    let x = uniform_variable(&[1, 10, 60, 64], &mut r)?.detach();
    let (l, k) = (cfg.label_frames(), cfg.n_classes);
    let mut grid = EventLabelGrid::new(l, k);
    for frame in 0..l {
        for class in 0..k {
            if r.gen_bool(0.15) {
                let v: [f64; 3] = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                grid.set(frame, class, [v[0] / n, v[1] / n, v[2] / n]);
            }
        }
    }
    let labels = LabelBatch::<f64>::from_grids(&[&grid])?;
    let params = model.parameters();
    let inputs = named(&params);
    let (w_sed, w_doa) = cfg.loss_weights;
    check.run(&inputs, || {
        let out = model.forward(&x, Mode::Train)?;
        Ok(seld_loss(&out, &labels, w_sed, w_doa)?.total)
    })
}
