//! Seeded mini-batch Adam on mean squared error.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, FlatParams, NetSpec, Tape};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(xs: Vec<Vec<f64>>, ys: Vec<Vec<f64>>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::invalid("inputs and targets differ in count"));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainOptions {
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    /// Learning rate multiplier reached at the last epoch (geometric decay).
    pub final_lr_scale: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { lr: 1e-3, epochs: 500, batch: 32, seed: 0, final_lr_scale: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub params: FlatParams,
    /// Running minimum of the per-epoch loss.
    pub loss_trace: Vec<f64>,
    pub raw_trace: Vec<f64>,
    /// Mean squared error of the returned parameters on the training set.
    pub mse: f64,
    /// Largest absolute residual of the returned parameters on the training set.
    pub max_abs_err: f64,
}

/// Seeded He-uniform initialization.
pub fn init_params(spec: &NetSpec, seed: u64) -> FlatParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut th = vec![0.0; spec.param_count()];
    for j in 0..spec.depth() {
        let o = spec.layer(j);
        let bound = (6.0 / o.cols as f64).sqrt();
        for w in &mut th[o.a..o.b] {
            *w = rng.random_range(-bound..bound);
        }
        th[o.alpha] = match (spec.activation(), j) {
            (Activation::Relu, _) => 0.0,
            (Activation::Prelu, 0) => 1.0,
            (Activation::Prelu, _) => 0.25,
        };
    }
    FlatParams(th)
}

fn loss_stats(spec: &NetSpec, th: &[f64], data: &Dataset) -> (f64, f64) {
    let mut sq = 0.0;
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        let out = super::forward_raw(spec, th, x);
        for (o, t) in out.iter().zip(y) {
            let r = o - t;
            sq += r * r;
            worst = worst.max(r.abs());
            count += 1;
        }
    }
    (sq / count.max(1) as f64, worst)
}

pub fn train(spec: &NetSpec, data: &Dataset, opts: &TrainOptions) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.xs.iter().any(|x| x.len() != spec.input_dim())
        || data.ys.iter().any(|y| y.len() != spec.output_dim())
    {
        return Err(Error::invalid("training pairs do not match the net's input/output dims"));
    }
    if opts.batch == 0 || !(opts.lr > 0.0) {
        return Err(Error::invalid("batch must be positive and lr > 0"));
    }

    let mut params = init_params(spec, opts.seed);
    let (mut best_loss, _) = loss_stats(spec, params.as_slice(), data);
    if !best_loss.is_finite() {
        return Err(Error::TrainingDiverged { epoch: 0, last_finite: Box::new(params.into_inner()) });
    }
    let mut best = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let n_params = spec.param_count();
    let (mut m, mut v) = (vec![0.0; n_params], vec![0.0; n_params]);
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut tape = Tape::default();
    let mut g = vec![0.0; n_params];
    let mut upstream = vec![0.0; spec.output_dim()];
    let mut raw_trace = Vec::with_capacity(opts.epochs);
    let mut loss_trace = Vec::with_capacity(opts.epochs);
    let scale = 2.0 / spec.output_dim() as f64;
    let learn_alpha = spec.activation() == Activation::Prelu;

    for epoch in 0..opts.epochs {
        let frac = if opts.epochs > 1 { epoch as f64 / (opts.epochs - 1) as f64 } else { 0.0 };
        let lr = opts.lr * opts.final_lr_scale.powf(frac);
        order.shuffle(&mut rng);
        for chunk in order.chunks(opts.batch) {
            g.iter_mut().for_each(|x| *x = 0.0);
            for &i in chunk {
                tape.record(spec, params.as_slice(), &data.xs[i]);
                for ((u, o), t) in upstream.iter_mut().zip(tape.output()).zip(&data.ys[i]) {
                    *u = scale * (o - t) / chunk.len() as f64;
                }
                tape.backward(spec, params.as_slice(), &upstream, &mut g);
            }
            step += 1;
            let (c1, c2) = (1.0 - b1.powi(step), 1.0 - b2.powi(step));
            let th = params.as_mut_slice();
            for k in 0..n_params {
                m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                th[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
            if !learn_alpha {
                for j in 0..spec.depth() {
                    th[spec.layer(j).alpha] = 0.0;
                }
            }
        }
        let (loss, _) = loss_stats(spec, params.as_slice(), data);
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, last_finite: Box::new(best.into_inner()) });
        }
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&params);
        }
        raw_trace.push(loss);
        loss_trace.push(best_loss);
    }

    let (mse, max_abs_err) = loss_stats(spec, best.as_slice(), data);
    Ok(TrainReport { params: best, loss_trace, raw_trace, mse, max_abs_err })
}
