//! Recursive causal targets, CNO versus plain feedforward trade-offs, and the
//! Euclidean CNO-as-RNN reduction.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cno::{self, derive_seed, window_coords, CausalDataset, CnoModel, CnoOptions, PathSample, TimeGrid};
use crate::error::{Error, Result};
use crate::net::{self, Activation, Dataset, FlatParams, NetSpec, TrainOptions};
use crate::spaces::SchauderSpace;

/// A map `[0,1]² → [0,1]` that is 1-Lipschitz for the ℓ1 norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum GMap {
    Mean,
    AbsDiff,
    /// `clamp(w1·a + w2·b + c, 0, 1)` with `|w1|, |w2| ≤ 1`.
    ClippedAffine { w1: f64, w2: f64, c: f64 },
}

impl Default for GMap {
    fn default() -> Self {
        GMap::Mean
    }
}

impl GMap {
    pub fn validate(&self) -> Result<()> {
        if let GMap::ClippedAffine { w1, w2, c } = *self {
            if !(w1.abs() <= 1.0 && w2.abs() <= 1.0 && c.is_finite()) {
                return Err(Error::invalid("clipped affine map needs |w1|, |w2| ≤ 1 and finite c"));
            }
        }
        Ok(())
    }

    pub fn apply(&self, a: f64, b: f64) -> f64 {
        match *self {
            GMap::Mean => 0.5 * (a + b),
            GMap::AbsDiff => (a - b).abs(),
            GMap::ClippedAffine { w1, w2, c } => (w1 * a + w2 * b + c).clamp(0.0, 1.0),
        }
    }

    /// Largest `|G(u) − G(v)| / ‖u − v‖₁` over random pairs in the square.
    pub fn sampled_lipschitz(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let u: [f64; 4] = rng.random();
            let d = (u[0] - u[2]).abs() + (u[1] - u[3]).abs();
            if d > 0.0 {
                worst = worst.max((self.apply(u[0], u[1]) - self.apply(u[2], u[3])).abs() / d);
            }
        }
        worst
    }
}

/// `z^{(t)} = G(z_t, z^{(t−1)})`, `z^{(0)} = 0`, target value `z^{(T)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursiveTarget {
    pub horizon: usize,
    #[serde(default)]
    pub g: GMap,
}

impl RecursiveTarget {
    pub fn new(horizon: usize, g: GMap) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("recursive target needs T ≥ 1"));
        }
        g.validate()?;
        Ok(Self { horizon, g })
    }

    /// Every intermediate value `z^{(1)}, …, z^{(T)}`.
    pub fn trajectory(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.horizon {
            return Err(Error::invalid(format!("expected {} inputs, got {}", self.horizon, z.len())));
        }
        if let Some(bad) = z.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("input {bad} lies outside [0, 1]")));
        }
        let mut acc = 0.0;
        Ok(z.iter()
            .map(|&zt| {
                acc = self.g.apply(zt, acc);
                acc
            })
            .collect())
    }

    /// Uniform draws from `[0,1]^T`.
    pub fn sample_inputs(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..self.horizon).map(|_| rng.random::<f64>()).collect()).collect()
    }

    /// Windowed presentation: scalar inputs `z_t`, targets `z^{(t)}`, memory `M`.
    pub fn causal_dataset(&self, zs: &[Vec<f64>], memory: usize) -> Result<CausalDataset> {
        let samples = zs
            .iter()
            .map(|z| {
                Ok(PathSample {
                    inputs: z.iter().map(|&v| vec![v]).collect(),
                    targets: self.trajectory(z)?.into_iter().map(|v| vec![v]).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let t = self.horizon;
        let ds = CausalDataset {
            grid: TimeGrid::uniform(t, 1.0)?,
            memory,
            input_spaces: vec![SchauderSpace::euclidean(1)?; t],
            output_spaces: vec![SchauderSpace::euclidean(1)?; t],
            initial: vec![0.0],
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    /// Window oracle for the causal presentation with memory `M`. The window
    /// holds `z_{t+1−M}, …, z_t` with zeros before time 0; when `M ≤ t` the
    /// recursion restarts from 0 at the window's left edge, which is the
    /// target's memory-`M` truncation.
    pub fn window_oracle(&self, memory: usize) -> impl Fn(usize, &[f64]) -> Result<Vec<f64>> + Sync + '_ {
        move |i: usize, w: &[f64]| {
            if w.len() != memory {
                return Err(Error::invalid("window length differs from the memory"));
            }
            let mut acc = 0.0;
            for &zt in &w[memory - memory.min(i + 1)..] {
                acc = self.g.apply(zt, acc);
            }
            Ok(vec![acc])
        }
    }
}

pub fn eval_recursive(target: &RecursiveTarget, z: &[f64]) -> Result<f64> {
    Ok(*target.trajectory(z)?.last().expect("T ≥ 1"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Ffnn { name: String, hidden: Vec<usize> },
    /// Per-window filters `[M, hidden.., 1]` woven with latent dim `q` and separation `delta`.
    Cno { name: String, hidden: Vec<usize>, memory: usize, q: usize, delta: f64 },
}

impl ModelConfig {
    pub fn name(&self) -> &str {
        match self {
            ModelConfig::Ffnn { name, .. } | ModelConfig::Cno { name, .. } => name,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Ffnn { .. } => ModelKind::Ffnn,
            ModelConfig::Cno { .. } => ModelKind::Cno,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ffnn,
    Cno,
}

/// Four feedforward sizes and two CNO sizes for horizon `t`.
pub fn default_ladder(t: usize) -> Vec<ModelConfig> {
    let ffnn = |name: &str, hidden: Vec<usize>| ModelConfig::Ffnn { name: name.into(), hidden };
    let cno = |name: &str, hidden: Vec<usize>| ModelConfig::Cno { name: name.into(), hidden, memory: t, q: 3, delta: 0.5 };
    vec![
        ffnn("ffnn-16", vec![16]),
        ffnn("ffnn-64", vec![64]),
        ffnn("ffnn-32x32", vec![32, 32]),
        ffnn("ffnn-64x64", vec![64, 64]),
        cno("cno-4", vec![4]),
        cno("cno-8", vec![8]),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareOptions {
    pub eps_a: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub seeds: Vec<u64>,
    pub activation: Activation,
    pub train: TrainOptions,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            eps_a: 0.05,
            n_train: 512,
            n_test: 512,
            seeds: (0..5).collect(),
            activation: Activation::Prelu,
            train: TrainOptions { lr: 1e-2, epochs: 400, batch: 32, seed: 0, final_lr_scale: 0.05 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub model: String,
    pub kind: ModelKind,
    /// Recounted from the built specs.
    pub params: usize,
    /// `NaN` when training failed; see `error`.
    pub max_err: f64,
    pub seconds: f64,
    pub seed: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffReport {
    pub target: RecursiveTarget,
    pub eps_a: f64,
    pub rows: Vec<TradeoffRow>,
}

pub const COMPARE_CSV_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub model: String,
    pub kind: ModelKind,
    pub params: usize,
    pub median_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub best_cno: MedianRow,
    /// Best feedforward row with at least as many parameters as `best_cno`.
    pub best_ffnn: Option<MedianRow>,
}

impl Direction {
    /// `None` when no feedforward row is large enough to compare against.
    pub fn holds(&self) -> Option<bool> {
        self.best_ffnn.as_ref().map(|f| self.best_cno.median_err <= f.median_err)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl TradeoffReport {
    /// Rows with the wall-clock column zeroed, for determinism checks.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.seconds = 0.0);
        r
    }

    /// Median max-error per model over seeds; failed runs count as `+∞`.
    pub fn medians(&self) -> Vec<MedianRow> {
        let mut names: Vec<&str> = Vec::new();
        for row in &self.rows {
            if !names.contains(&row.model.as_str()) {
                names.push(&row.model);
            }
        }
        names
            .into_iter()
            .map(|name| {
                let rows: Vec<&TradeoffRow> = self.rows.iter().filter(|r| r.model == name).collect();
                MedianRow {
                    model: name.to_string(),
                    kind: rows[0].kind,
                    params: rows[0].params,
                    median_err: median(rows.iter().map(|r| if r.max_err.is_nan() { f64::INFINITY } else { r.max_err }).collect()),
                }
            })
            .collect()
    }

    /// Best CNO by median error, against feedforward rows of equal or larger size.
    pub fn direction(&self) -> Option<Direction> {
        let med = self.medians();
        let best = |it: &mut dyn Iterator<Item = &MedianRow>| it.min_by(|a, b| a.median_err.total_cmp(&b.median_err)).cloned();
        let best_cno = best(&mut med.iter().filter(|m| m.kind == ModelKind::Cno))?;
        let best_ffnn = best(&mut med.iter().filter(|m| m.kind == ModelKind::Ffnn && m.params >= best_cno.params));
        Some(Direction { best_cno, best_ffnn })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["schema_version", "model", "params", "max_err", "seconds", "seed"]).map_err(fmt)?;
        for r in &self.rows {
            w.write_record([
                COMPARE_CSV_SCHEMA.to_string(),
                r.model.clone(),
                r.params.to_string(),
                format!("{:e}", r.max_err),
                format!("{:.6}", r.seconds),
                r.seed.to_string(),
            ])
            .map_err(fmt)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
    }
}

struct Cell<'a> {
    config: &'a ModelConfig,
    seed: u64,
}

fn run_ffnn(hidden: &[usize], train: &[Vec<f64>], test: &[Vec<f64>], target: &RecursiveTarget, o: &CompareOptions, seed: u64) -> Result<(usize, f64)> {
    let mut dims = vec![target.horizon];
    dims.extend_from_slice(hidden);
    dims.push(1);
    let spec = NetSpec::new(dims, o.activation)?;
    let ys = train.iter().map(|z| Ok(vec![eval_recursive(target, z)?])).collect::<Result<Vec<_>>>()?;
    let rep = net::train(&spec, &Dataset::new(train.to_vec(), ys)?, &TrainOptions { seed, ..o.train.clone() })?;
    let mut worst: f64 = 0.0;
    for z in test {
        let y = net::forward(&spec, &rep.params, z)?[0];
        worst = worst.max((y - eval_recursive(target, z)?).abs());
    }
    Ok((spec.param_count(), worst))
}

fn run_cno(
    hidden: &[usize],
    memory: usize,
    q: usize,
    delta: f64,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
    target: &RecursiveTarget,
    o: &CompareOptions,
    seed: u64,
) -> Result<(usize, f64)> {
    let ds = target.causal_dataset(train, memory)?;
    let oracle = target.window_oracle(memory);
    let opts = CnoOptions {
        eps_d: 0.0,
        eps_a: o.eps_a,
        q,
        delta,
        radius: 1.0,
        seed,
        hidden: vec![hidden.to_vec()],
        activation: o.activation,
        train: o.train.clone(),
    };
    let (model, _) = cno::construct_cno(&oracle, &ds, &opts)?;
    let params = model.weave.hyper_spec.param_count() + model.weave.z0().len();
    let t = target.horizon;
    let mut worst: f64 = 0.0;
    for z in test {
        let path: Vec<Vec<f64>> = z.iter().map(|&v| vec![v]).collect();
        let y = cno::predict(&model, &path, t)?;
        worst = worst.max((y[t - 1][0] - eval_recursive(target, z)?).abs());
    }
    Ok((params, worst))
}

/// Trains every configuration on a shared per-seed dataset and scores the
/// final output `z^{(T)}` on a shared held-out set.
pub fn compare(target: &RecursiveTarget, configs: &[ModelConfig], o: &CompareOptions) -> Result<TradeoffReport> {
    let kinds: Vec<ModelKind> = configs.iter().map(ModelConfig::kind).collect();
    if !kinds.contains(&ModelKind::Ffnn) || !kinds.contains(&ModelKind::Cno) {
        return Err(Error::invalid("compare needs at least one FFNN and one CNO configuration"));
    }
    if o.seeds.is_empty() || o.n_train == 0 || o.n_test == 0 {
        return Err(Error::invalid("compare needs seeds and nonempty train/test sets"));
    }
    let test = target.sample_inputs(o.n_test, u64::MAX);
    let cells: Vec<Cell> = o.seeds.iter().flat_map(|&seed| configs.iter().map(move |config| Cell { config, seed })).collect();
    let rows = cells
        .par_iter()
        .map(|cell| {
            let train = target.sample_inputs(o.n_train, derive_seed(cell.seed, usize::MAX));
            let start = Instant::now();
            let out = match cell.config {
                ModelConfig::Ffnn { hidden, .. } => run_ffnn(hidden, &train, &test, target, o, cell.seed),
                ModelConfig::Cno { hidden, memory, q, delta, .. } => {
                    run_cno(hidden, *memory, *q, *delta, &train, &test, target, o, cell.seed)
                }
            };
            let seconds = start.elapsed().as_secs_f64();
            let (params, max_err, error) = match out {
                Ok((p, e)) => (p, e, None),
                Err(e) => (0, f64::NAN, Some(e.to_string())),
            };
            TradeoffRow { model: cell.config.name().to_string(), kind: cell.config.kind(), params, max_err, seconds, seed: cell.seed, error }
        })
        .collect();
    Ok(TradeoffReport { target: *target, eps_a: o.eps_a, rows })
}

/// Cell parameters `[A' | b' | α' = 1] ++ θ` for `y_t = f̂_θ(A(y_{t−1}, x_t))` with `A(y, x) = x`.
fn rnn_cell(spec: &NetSpec, theta: &[f64]) -> Result<(NetSpec, FlatParams)> {
    let (n_in, n_out) = (spec.input_dim(), spec.output_dim());
    let mut dims = vec![n_out + n_in];
    dims.extend_from_slice(spec.dims());
    let cell = NetSpec::new(dims, Activation::Prelu)?;
    let mut p = Vec::with_capacity(cell.param_count());
    for r in 0..n_in {
        p.extend((0..n_out + n_in).map(|c| if c == n_out + r { 1.0 } else { 0.0 }));
    }
    p.extend(std::iter::repeat_n(0.0, n_out + n_in));
    p.push(1.0);
    p.extend_from_slice(theta);
    Ok((cell.clone(), FlatParams::new(&cell, p)?))
}

/// Replays the model as `y_t = f̂_{θ_t}(y_{t−1}, x_t)`, `θ_t = L(z_t)`,
/// `z_{t+1} = ĥ(z_t)` on random paths and compares with `predict`.
pub fn rnn_reduction_check(model: &CnoModel, trials: usize, seed: u64) -> Result<bool> {
    if let Some(s) = model.input_spaces.iter().chain(&model.output_spaces).find(|s| !s.is_euclidean()) {
        return Err(Error::Unsupported(format!("RNN reduction needs Euclidean spaces, found {}", s.tag())));
    }
    let t = model.horizon();
    let d = model.in_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let path: Vec<Vec<f64>> = (0..t).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let direct = cno::predict(model, &path, t)?;
        let mut y = vec![0.0; model.out_dim()];
        let mut z = model.weave.z0().to_vec();
        for (i, expect) in direct.iter().enumerate() {
            let (cell, p) = rnn_cell(&model.synced, &model.weave.readout(&z))?;
            let mut input = y.clone();
            input.extend(window_coords(&path, i, model.memory, &model.initial)?);
            y = net::forward(&cell, &p, &input)?;
            if &y != expect {
                return Ok(false);
            }
            if i + 1 < t {
                z = model.weave.step(&z)?;
            }
        }
    }
    Ok(true)
}
