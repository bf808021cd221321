//! Causal neural operators: per-window neural filters trained in parallel,
//! padded to a common shape and woven into one hypernetwork rollout.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{error_decomposition, snap_ceil, ErrorSplit, NeuralFilter};
use crate::net::{self, Activation, Dataset, FlatParams, NetSpec, TrainOptions};
use crate::spaces::{Element, SchauderSpace};
use crate::weave::{build_weave_with, horizon_capacity, hyper_report, HyperReport, WeaveModel, WeaveOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::invalid("time grid must start at t = 0"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("time grid must be finite and strictly increasing"));
        }
        Ok(Self { times })
    }

    pub fn uniform(points: usize, dt: f64) -> Result<Self> {
        if points == 0 || !(dt > 0.0) {
            return Err(Error::invalid("uniform grid needs points ≥ 1 and dt > 0"));
        }
        Self::new((0..points).map(|i| i as f64 * dt).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(times: Vec<f64>) -> Result<Self> {
        Self::new(times)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.times
    }
}

/// One input path (coordinates per grid time) and its per-window targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

/// Sampled paths with per-window targets. Window `i` reads inputs
/// `i + 1 − M ..= i`, left-padded with `initial`, and targets `targets[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalDataset {
    pub grid: TimeGrid,
    pub memory: usize,
    pub input_spaces: Vec<SchauderSpace>,
    pub output_spaces: Vec<SchauderSpace>,
    pub initial: Vec<f64>,
    pub samples: Vec<PathSample>,
}

impl CausalDataset {
    pub fn windows(&self) -> usize {
        self.output_spaces.len()
    }

    pub fn in_dim(&self) -> usize {
        self.initial.len()
    }

    pub fn out_dim(&self) -> usize {
        self.samples.first().and_then(|s| s.targets.first()).map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let windows = self.windows();
        if self.memory == 0 {
            return Err(Error::invalid("memory must be at least 1"));
        }
        if windows == 0 || self.samples.is_empty() {
            return Err(Error::invalid("dataset needs at least one window and one sample"));
        }
        if self.grid.len() < windows || self.input_spaces.len() != windows {
            return Err(Error::invalid("grid and input spaces must cover every window"));
        }
        if self.initial.is_empty() {
            return Err(Error::invalid("initial element must be nonempty"));
        }
        let (d_in, d_out) = (self.in_dim(), self.out_dim());
        for (s, sample) in self.samples.iter().enumerate() {
            if sample.inputs.len() < windows || sample.targets.len() != windows {
                return Err(Error::invalid(format!("sample {s} does not cover {windows} windows")));
            }
            if sample.inputs.iter().any(|x| x.len() != d_in) || sample.targets.iter().any(|y| y.len() != d_out) {
                return Err(Error::invalid(format!("sample {s} has inconsistent element dims")));
            }
        }
        for (space, n) in self.output_spaces.iter().map(|s| (s, d_out)).chain(self.input_spaces.iter().map(|s| (s, d_in))) {
            if space.max_level().is_some_and(|max| n > max) {
                return Err(Error::invalid(format!("{} cannot hold {n} coordinates", space.tag())));
            }
        }
        Ok(())
    }

    pub fn window(&self, inputs: &[Vec<f64>], i: usize) -> Result<Vec<f64>> {
        window_coords(inputs, i, self.memory, &self.initial)
    }
}

/// Concatenated coordinates of inputs `i + 1 − M ..= i`, left-padded with `initial`.
pub fn window_coords(inputs: &[Vec<f64>], i: usize, memory: usize, initial: &[f64]) -> Result<Vec<f64>> {
    if i >= inputs.len() {
        return Err(Error::invalid(format!("window {i} needs an input at index {i}")));
    }
    let mut out = Vec::with_capacity(memory * initial.len());
    for back in (0..memory).rev() {
        let x = match i.checked_sub(back) {
            Some(k) => &inputs[k],
            None => initial,
        };
        if x.len() != initial.len() {
            return Err(Error::invalid(format!("input element has dim {}, expected {}", x.len(), initial.len())));
        }
        out.extend_from_slice(x);
    }
    Ok(out)
}

/// Ground-truth window maps, evaluated on window coordinates.
pub trait CausalOracle: Sync {
    fn eval_window(&self, i: usize, window: &[f64]) -> Result<Vec<f64>>;
}

impl<F> CausalOracle for F
where
    F: Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync,
{
    fn eval_window(&self, i: usize, window: &[f64]) -> Result<Vec<f64>> {
        self(i, window)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CnoOptions {
    pub eps_d: f64,
    pub eps_a: f64,
    pub q: usize,
    pub delta: f64,
    pub radius: f64,
    pub seed: u64,
    /// Hidden widths: one entry shared by all windows, or one entry per window.
    pub hidden: Vec<Vec<usize>>,
    pub activation: Activation,
    pub train: TrainOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub index: usize,
    pub seed: u64,
    pub dims: Vec<usize>,
    /// Largest coordinate 2-norm residual on the training samples.
    pub train_max_err: f64,
    pub train_mse: f64,
    pub gate: f64,
    pub shortfall: bool,
    pub split: ErrorSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructReport {
    pub windows: Vec<WindowReport>,
    pub synced_dims: Vec<usize>,
    pub param_count: usize,
    pub m_t: f64,
    pub anchor_residual: f64,
    pub hyper: HyperReport,
    /// Padded per-window parameters, in window order.
    pub filters: Vec<FlatParams>,
}

impl ConstructReport {
    pub fn any_shortfall(&self) -> bool {
        self.windows.iter().any(|w| w.shortfall)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnoModel {
    pub weave: WeaveModel,
    pub synced: NetSpec,
    pub grid: TimeGrid,
    pub memory: usize,
    pub initial: Vec<f64>,
    pub input_spaces: Vec<SchauderSpace>,
    pub output_spaces: Vec<SchauderSpace>,
    pub window_seeds: Vec<u64>,
}

impl CnoModel {
    pub fn horizon(&self) -> usize {
        self.weave.horizon()
    }

    pub fn in_dim(&self) -> usize {
        self.initial.len()
    }

    pub fn out_dim(&self) -> usize {
        self.synced.output_dim()
    }
}

/// SplitMix64 of the master seed and window index.
pub fn derive_seed(master: u64, i: usize) -> u64 {
    let mut z = master ^ (i as u64).wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct TrainedWindow {
    spec: NetSpec,
    params: FlatParams,
    report: WindowReport,
}

pub fn construct_cno(
    oracle: &dyn CausalOracle,
    ds: &CausalDataset,
    opts: &CnoOptions,
) -> Result<(CnoModel, ConstructReport)> {
    ds.validate()?;
    let windows = ds.windows();
    let cap = horizon_capacity(opts.delta, opts.q);
    if windows > cap {
        return Err(Error::invalid(format!("{windows} windows exceed ⌊δ^(−Q)⌋ = {cap}")));
    }
    if opts.hidden.len() != 1 && opts.hidden.len() != windows {
        return Err(Error::invalid("hidden widths must be given once or once per window"));
    }
    if !(opts.eps_a > 0.0 && opts.eps_d >= 0.0) {
        return Err(Error::invalid("ε_A must be positive and ε_D nonnegative"));
    }
    let n_in = ds.memory * ds.in_dim();
    let n_out = ds.out_dim();

    let trained = (0..windows)
        .into_par_iter()
        .map(|i| train_window(oracle, ds, opts, i, n_in, n_out))
        .collect::<Result<Vec<_>>>()?;

    let depth = trained.iter().map(|w| w.spec.depth()).max().unwrap_or(1);
    let mut synced_dims = vec![0usize; depth + 1];
    for w in &trained {
        for (j, d) in synced_dims.iter_mut().enumerate() {
            let own = w.spec.dims().get(j).copied().unwrap_or(n_out);
            *d = (*d).max(own);
        }
    }
    synced_dims[depth] = n_out;
    let mut synced = NetSpec::new(synced_dims.clone(), opts.activation)?;
    let mut filters = Vec::with_capacity(windows);
    for w in &trained {
        let (s, p) = net::pad_to(&w.spec, &w.params, &synced_dims)?;
        if s.activation() == Activation::Prelu {
            synced = synced.with_activation(Activation::Prelu);
        }
        filters.push(p);
    }
    let thetas: Vec<Vec<f64>> = filters.iter().map(|p| p.as_slice().to_vec()).collect();
    let weave = build_weave_with(
        &thetas,
        &WeaveOptions { q: opts.q, delta: opts.delta, radius: opts.radius, seed: opts.seed },
    )?;
    let hyper = hyper_report(synced.param_count(), opts.q, opts.delta, windows)?.with_measured(&weave);
    let report = ConstructReport {
        windows: trained.iter().map(|w| w.report.clone()).collect(),
        synced_dims,
        param_count: synced.param_count(),
        m_t: weave.m_t,
        anchor_residual: weave.anchor_residual,
        hyper,
        filters,
    };
    let model = CnoModel {
        weave,
        synced,
        grid: ds.grid.clone(),
        memory: ds.memory,
        initial: ds.initial.clone(),
        input_spaces: ds.input_spaces.clone(),
        output_spaces: ds.output_spaces.clone(),
        window_seeds: report.windows.iter().map(|w| w.seed).collect(),
    };
    Ok((model, report))
}

fn train_window(
    oracle: &dyn CausalOracle,
    ds: &CausalDataset,
    opts: &CnoOptions,
    i: usize,
    n_in: usize,
    n_out: usize,
) -> Result<TrainedWindow> {
    let seed = derive_seed(opts.seed, i);
    let hidden = if opts.hidden.len() == 1 { &opts.hidden[0] } else { &opts.hidden[i] };
    let mut dims = vec![n_in];
    dims.extend_from_slice(hidden);
    dims.push(n_out);
    let spec = NetSpec::new(dims, opts.activation)?;
    let xs = ds.samples.iter().map(|s| ds.window(&s.inputs, i)).collect::<Result<Vec<_>>>()?;
    let ys: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.targets[i].clone()).collect();
    let data = Dataset::new(xs, ys)?;
    let tr = net::train(&spec, &data, &TrainOptions { seed, ..opts.train.clone() })?;

    let mut worst: f64 = 0.0;
    for (x, y) in data.xs.iter().zip(&data.ys) {
        worst = worst.max(l2(&net::forward(&spec, &tr.params, x)?, y));
    }
    let gate = opts.eps_a + opts.eps_d;

    let filter = NeuralFilter::new(
        SchauderSpace::euclidean(n_in)?,
        ds.output_spaces[i].clone(),
        spec.clone(),
        tr.params.clone(),
    )?;
    let target = |x: &Element| -> Result<Element> {
        match x {
            Element::Coords(w) => Ok(Element::Coords(oracle.eval_window(i, w)?)),
            Element::Samples(_) => Err(Error::invalid("window oracle takes coordinates")),
        }
    };
    let samples: Vec<Element> = data.xs.iter().cloned().map(Element::Coords).collect();
    let split = error_decomposition(&target, &filter, &samples)?;

    Ok(TrainedWindow {
        report: WindowReport {
            index: i,
            seed,
            dims: spec.dims().to_vec(),
            train_max_err: worst,
            train_mse: tr.mse,
            gate,
            shortfall: !(worst < gate),
            split,
        },
        spec,
        params: tr.params,
    })
}

/// Causal rollout: `θ_i = L(z_i)`, `y_i = f̂_{θ_i}(window_i)`, `z_{i+1} = ĥ(z_i)`.
pub fn predict(model: &CnoModel, x_path: &[Vec<f64>], horizon: usize) -> Result<Vec<Vec<f64>>> {
    if horizon > model.horizon() {
        return Err(Error::invalid(format!("horizon {horizon} exceeds the model's {}", model.horizon())));
    }
    if x_path.len() < horizon {
        return Err(Error::invalid("input path is shorter than the horizon"));
    }
    let mut z = model.weave.z0().to_vec();
    let mut out = Vec::with_capacity(horizon);
    for i in 0..horizon {
        let theta = model.weave.readout(&z);
        let w = window_coords(x_path, i, model.memory, &model.initial)?;
        out.push(net::forward_raw(&model.synced, &theta, &w));
        if i + 1 < horizon {
            z = model.weave.step(&z)?;
        }
    }
    Ok(out)
}

/// Predictions decoded into each window's output space.
pub fn predict_elements(model: &CnoModel, x_path: &[Vec<f64>], horizon: usize) -> Result<Vec<Element>> {
    predict(model, x_path, horizon)?
        .into_iter()
        .zip(&model.output_spaces)
        .map(|(y, space)| {
            let n = y.len();
            space.reconstruct(&crate::spaces::CoordVector { coords: y, space_tag: space.tag(), level: n })
        })
        .collect()
}

/// True iff outputs at times `≤ i` are bit-identical for two paths that agree up to `i`.
pub fn causality_audit(model: &CnoModel, a: &[Vec<f64>], b: &[Vec<f64>], i: usize) -> Result<bool> {
    if i >= a.len().min(b.len()) {
        return Err(Error::invalid("audit index lies beyond the paths"));
    }
    let same = |u: &Vec<f64>, v: &Vec<f64>| u.len() == v.len() && u.iter().zip(v).all(|(x, y)| x.to_bits() == y.to_bits());
    if !a[..=i].iter().zip(&b[..=i]).all(|(u, v)| same(u, v)) {
        return Err(Error::invalid(format!("paths differ at or before index {i}")));
    }
    let horizon = model.horizon().min(a.len()).min(b.len());
    let (ya, yb) = (predict(model, a, horizon)?, predict(model, b, horizon)?);
    let upto = (i + 1).min(horizon);
    Ok(ya[..upto].iter().zip(&yb[..upto]).all(|(u, v)| same(u, v)))
}

/// `M = max(1, ⌈c_mem · ε_A^{−r}⌉)`.
pub fn memory_for(eps_a: f64, r: f64, c_mem: f64) -> Result<usize> {
    if !(eps_a > 0.0) || !(r >= 0.0) || !(c_mem > 0.0) {
        return Err(Error::invalid("memory_for needs ε_A > 0, r ≥ 0, c_mem > 0"));
    }
    let m = snap_ceil(c_mem * eps_a.powf(-r));
    if !m.is_finite() || m > 1e12 {
        return Err(Error::invalid(format!("memory {m} is too large")));
    }
    Ok((m as usize).max(1))
}
