//! Scalar SDE solution operators on first-order Wiener chaos coordinates,
//! with a seeded Euler–Maruyama Monte Carlo oracle on common random numbers.
//!
//! A first-chaos variable on `[0, t]` is `η = mean + Σ_k c_k ∫₀ᵗ f_k dB` with
//! `f_k(s) = √(2/t) sin(kπs/t)`. Stochastic integrals are left-point sums over
//! the recorded increments, which makes the modes `k < t/dt` exactly
//! orthonormal on the grid.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cno::{CausalDataset, CausalOracle, PathSample, TimeGrid};
use crate::error::{Error, Result};
use crate::spaces::SchauderSpace;

type Field = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift `α(t, x)`, diffusion `β(t, x)` and growth constant `M_g`.
#[derive(Clone)]
pub struct SdeCoeffs {
    drift: Field,
    diffusion: Field,
    pub m_g: f64,
    pub label: String,
}

impl fmt::Debug for SdeCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeCoeffs").field("label", &self.label).field("m_g", &self.m_g).finish()
    }
}

impl SdeCoeffs {
    pub fn new(
        label: impl Into<String>,
        drift: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        diffusion: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        m_g: f64,
    ) -> Result<Self> {
        if !(m_g > 0.0) {
            return Err(Error::invalid("growth constant must be positive"));
        }
        Ok(Self { drift: Arc::new(drift), diffusion: Arc::new(diffusion), m_g, label: label.into() })
    }

    /// `dX = −κ X dt + σ dB`, with `M_g = max(κ, tiny)`.
    pub fn ornstein_uhlenbeck(kappa: f64, sigma: f64) -> Result<Self> {
        Self::new(format!("ou(kappa={kappa}, sigma={sigma})"), move |_, x| -kappa * x, move |_, _| sigma, kappa.abs().max(f64::MIN_POSITIVE))
    }

    pub fn drift(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }

    pub fn diffusion(&self, t: f64, x: f64) -> f64 {
        (self.diffusion)(t, x)
    }

    /// Largest sampled `√(|Δα|² + |Δβ|²) / |Δx|`; consistent coefficients stay ≤ `M_g`.
    pub fn sampled_lipschitz(&self, t_max: f64, x_range: f64, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let t = rng.random::<f64>() * t_max;
            let (x1, x2) = (rng.random_range(-x_range..x_range), rng.random_range(-x_range..x_range));
            if x1 == x2 {
                continue;
            }
            let da = self.drift(t, x1) - self.drift(t, x2);
            let db = self.diffusion(t, x1) - self.diffusion(t, x2);
            worst = worst.max((da * da + db * db).sqrt() / (x1 - x2).abs());
        }
        worst
    }

    /// `√3 · exp(3/2 · M_g² (Δ + 1) Δ)`.
    pub fn lipschitz_bound(&self, delta: f64) -> f64 {
        3f64.sqrt() * (1.5 * self.m_g * self.m_g * (delta + 1.0) * delta).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosCoords {
    pub mean: f64,
    pub coeffs: Vec<f64>,
    pub horizon: f64,
}

impl ChaosCoords {
    pub fn constant(mean: f64, modes: usize) -> Self {
        Self { mean, coeffs: vec![0.0; modes], horizon: 0.0 }
    }

    pub fn from_coords(v: &[f64], horizon: f64) -> Result<Self> {
        let (mean, coeffs) = v.split_first().ok_or_else(|| Error::invalid("chaos coordinates are empty"))?;
        Ok(Self { mean: *mean, coeffs: coeffs.to_vec(), horizon })
    }

    pub fn to_coords(&self) -> Vec<f64> {
        std::iter::once(self.mean).chain(self.coeffs.iter().copied()).collect()
    }

    /// `E[η²] = mean² + ‖c‖²`.
    pub fn second_moment(&self) -> f64 {
        self.mean * self.mean + self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McOracle {
    pub n_paths: usize,
    /// Euler steps per unit time.
    pub steps_per_unit: usize,
    pub seed: u64,
    pub tamed: bool,
}

impl McOracle {
    pub fn dt(&self) -> f64 {
        1.0 / self.steps_per_unit as f64
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths < 2 || self.steps_per_unit == 0 {
            return Err(Error::invalid("oracle needs at least two paths and one step per unit time"));
        }
        Ok(())
    }
}

/// Brownian increments `ΔB_{p,j}` over `[j dt, (j+1) dt)`, one seeded stream per path.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianRecord {
    pub dt: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    increments: Vec<f64>,
}

impl BrownianRecord {
    /// Path `p` uses stream `p` of the seed, so a longer record extends a shorter one.
    pub fn generate(n_paths: usize, n_steps: usize, dt: f64, seed: u64) -> Self {
        let mut increments = vec![0.0; n_paths * n_steps];
        let sd = dt.sqrt();
        if n_steps > 0 {
            increments.par_chunks_mut(n_steps).enumerate().for_each(|(p, row)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(p as u64);
                for v in row {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = sd * z;
                }
            });
        }
        Self { dt, n_paths, n_steps, increments }
    }

    pub fn path(&self, p: usize) -> &[f64] {
        &self.increments[p * self.n_steps..(p + 1) * self.n_steps]
    }

    /// Number of steps covering `[0, t]`; `t` must lie on the step grid.
    pub fn steps_until(&self, t: f64) -> Result<usize> {
        let k = t / self.dt;
        let r = k.round();
        if !(t >= 0.0) || (k - r).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::invalid(format!("time {t} is not a multiple of dt = {}", self.dt)));
        }
        let r = r as usize;
        if r > self.n_steps {
            return Err(Error::invalid(format!("time {t} is beyond the recorded {} steps", self.n_steps)));
        }
        Ok(r)
    }
}

/// Samples of `Z_k = ∫₀ᵗ f_k dB` for `k = 1..=modes`, per path.
#[derive(Clone, Debug)]
pub struct ChaosBasis {
    pub horizon: f64,
    pub n_paths: usize,
    /// `z[k][p]`
    pub z: Vec<Vec<f64>>,
}

impl ChaosBasis {
    pub fn new(record: &BrownianRecord, horizon: f64, modes: usize) -> Result<Self> {
        let steps = record.steps_until(horizon)?;
        if steps == 0 {
            return Ok(Self { horizon, n_paths: record.n_paths, z: vec![vec![0.0; record.n_paths]; modes] });
        }
        if modes >= steps {
            return Err(Error::invalid(format!(
                "{modes} modes need more than the {steps} increments recorded on [0, {horizon}]"
            )));
        }
        let scale = (2.0 / horizon).sqrt();
        let weights: Vec<Vec<f64>> = (1..=modes)
            .map(|k| {
                (0..steps)
                    .map(|j| scale * (k as f64 * std::f64::consts::PI * j as f64 / steps as f64).sin())
                    .collect()
            })
            .collect();
        let z = weights
            .par_iter()
            .map(|w| {
                (0..record.n_paths)
                    .map(|p| w.iter().zip(record.path(p)).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect();
        Ok(Self { horizon, n_paths: record.n_paths, z })
    }

    pub fn modes(&self) -> usize {
        self.z.len()
    }

    pub fn synthesize(&self, eta: &ChaosCoords) -> Result<Vec<f64>> {
        if eta.coeffs.len() > self.modes() {
            return Err(Error::invalid("η has more modes than the basis"));
        }
        if (eta.horizon - self.horizon).abs() > 1e-12 {
            return Err(Error::invalid("η and the basis live on different horizons"));
        }
        if self.horizon == 0.0 && eta.coeffs.iter().any(|&c| c != 0.0) {
            return Err(Error::invalid("a horizon-0 variable has no stochastic part"));
        }
        let mut out = vec![eta.mean; self.n_paths];
        for (c, zk) in eta.coeffs.iter().zip(&self.z) {
            for (o, z) in out.iter_mut().zip(zk) {
                *o += c * z;
            }
        }
        Ok(out)
    }

    pub fn project(&self, samples: &[f64]) -> Result<ChaosProjection> {
        let n = samples.len();
        if n < 2 || n != self.n_paths {
            return Err(Error::invalid("samples do not pair with the recorded paths"));
        }
        let nf = n as f64;
        let mean = samples.iter().sum::<f64>() / nf;
        let mean_se = (samples.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (nf * (nf - 1.0))).sqrt();
        let var = samples.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / nf;
        let mut coeffs = Vec::with_capacity(self.modes());
        let mut std_errors = Vec::with_capacity(self.modes());
        for zk in &self.z {
            let norm = zk.iter().map(|z| z * z).sum::<f64>() / nf;
            if self.horizon == 0.0 || norm == 0.0 {
                coeffs.push(0.0);
                std_errors.push(0.0);
                continue;
            }
            let prods: Vec<f64> = samples.iter().zip(zk).map(|(y, z)| (y - mean) * z).collect();
            let m = prods.iter().sum::<f64>() / nf;
            let v = prods.iter().map(|q| (q - m) * (q - m)).sum::<f64>() / (nf - 1.0);
            coeffs.push(m / norm);
            std_errors.push((v / nf).sqrt() / norm);
        }
        let residual = (var - coeffs.iter().map(|c| c * c).sum::<f64>()).max(0.0);
        Ok(ChaosProjection {
            coords: ChaosCoords { mean, coeffs, horizon: self.horizon },
            residual,
            std_errors,
            mean_se,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChaosProjection {
    pub coords: ChaosCoords,
    /// `L²` mass outside the retained modes, `Var(Y) − Σ c_k²` clamped at 0.
    pub residual: f64,
    pub std_errors: Vec<f64>,
    pub mean_se: f64,
}

pub fn project_chaos(samples: &[f64], record: &BrownianRecord, t: f64, n_modes: usize) -> Result<ChaosProjection> {
    if samples.len() != record.n_paths {
        return Err(Error::invalid("one sample per recorded path is required"));
    }
    ChaosBasis::new(record, t, n_modes)?.project(samples)
}

/// Euler–Maruyama from `t0` to `t1` on the record's increments, one path per start value.
pub fn solve_on_record(
    c: &SdeCoeffs,
    start: &[f64],
    record: &BrownianRecord,
    t0: f64,
    t1: f64,
    tamed: bool,
) -> Result<Vec<f64>> {
    if !(t0 < t1) {
        return Err(Error::invalid("solve needs t0 < t1"));
    }
    if start.len() != record.n_paths {
        return Err(Error::invalid("one start value per recorded path is required"));
    }
    let (j0, j1) = (record.steps_until(t0)?, record.steps_until(t1)?);
    let dt = record.dt;
    start
        .par_iter()
        .enumerate()
        .map(|(p, &x0)| {
            let inc = record.path(p);
            let mut x = x0;
            for j in j0..j1 {
                let t = j as f64 * dt;
                let a = c.drift(t, x);
                let drift = if tamed { a * dt / (1.0 + dt * a.abs()) } else { a * dt };
                x += drift + c.diffusion(t, x) * inc[j];
                if !x.is_finite() {
                    return Err(Error::OracleDiverged { step: j, time: t + dt });
                }
            }
            Ok(x)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SdeSolution {
    pub record: BrownianRecord,
    pub start: Vec<f64>,
    pub endpoints: Vec<f64>,
}

/// Solves from a chaos-coded `η ∈ F_{t0}` to `t1` with a fresh record.
pub fn sde_solve_mc(c: &SdeCoeffs, eta: &ChaosCoords, t0: f64, t1: f64, o: &McOracle) -> Result<SdeSolution> {
    o.validate()?;
    if eta.horizon > t0 + 1e-12 {
        return Err(Error::invalid("η must be measurable at the start time"));
    }
    let dt = o.dt();
    let steps = (t1 / dt).round() as usize;
    let record = BrownianRecord::generate(o.n_paths, steps, dt, o.seed);
    let start = ChaosBasis::new(&record, eta.horizon, eta.coeffs.len())?.synthesize(eta)?;
    let endpoints = solve_on_record(c, &start, &record, t0, t1, o.tamed)?;
    Ok(SdeSolution { record, start, endpoints })
}

fn rms_diff(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub bound: f64,
    pub skipped: usize,
}

impl LipschitzReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= self.bound
    }
}

/// `‖X^{η̂} − X^{η̃}‖ / ‖η̂ − η̃‖` on common random numbers, against the
/// `√3 e^{3/2 M_g² (Δ+1)Δ}` bound.
pub fn lipschitz_check(
    c: &SdeCoeffs,
    pairs: &[(ChaosCoords, ChaosCoords)],
    t0: f64,
    t1: f64,
    o: &McOracle,
) -> Result<LipschitzReport> {
    o.validate()?;
    let dt = o.dt();
    let record = BrownianRecord::generate(o.n_paths, (t1 / dt).round() as usize, dt, o.seed);
    let mut ratios = Vec::new();
    let mut skipped = 0;
    for (a, b) in pairs {
        if a == b {
            skipped += 1;
            continue;
        }
        let modes = a.coeffs.len().max(b.coeffs.len());
        let (ia, ib) = (
            ChaosBasis::new(&record, a.horizon, modes)?.synthesize(a)?,
            ChaosBasis::new(&record, b.horizon, modes)?.synthesize(b)?,
        );
        let denom = rms_diff(&ia, &ib);
        if denom == 0.0 {
            skipped += 1;
            continue;
        }
        let xa = solve_on_record(c, &ia, &record, t0, t1, o.tamed)?;
        let xb = solve_on_record(c, &ib, &record, t0, t1, o.tamed)?;
        ratios.push(rms_diff(&xa, &xb) / denom);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzReport { ratios, max_ratio, bound: c.lipschitz_bound(t1 - t0), skipped })
}

/// Initial conditions: deterministic means drawn uniformly from a box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitBox {
    pub mean_lo: f64,
    pub mean_hi: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl InitBox {
    pub fn draw(&self) -> Result<Vec<f64>> {
        if self.n_samples == 0 || !(self.mean_lo <= self.mean_hi) {
            return Err(Error::invalid("init box needs samples and lo ≤ hi"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok((0..self.n_samples)
            .map(|_| {
                if self.mean_lo == self.mean_hi {
                    self.mean_lo
                } else {
                    rng.random_range(self.mean_lo..self.mean_hi)
                }
            })
            .collect())
    }
}

/// Window maps `η_{t_i} ↦ Solve_{t_i → t_{i+1}}(η_{t_i})` in chaos coordinates,
/// all on one shared Brownian record.
pub struct SdeWindowOracle {
    pub coeffs: SdeCoeffs,
    pub grid: TimeGrid,
    pub modes: usize,
    pub tamed: bool,
    record: BrownianRecord,
    bases: Vec<ChaosBasis>,
}

impl SdeWindowOracle {
    pub fn new(coeffs: SdeCoeffs, grid: TimeGrid, modes: usize, o: &McOracle) -> Result<Self> {
        o.validate()?;
        if grid.len() < 2 {
            return Err(Error::invalid("SDE grid needs at least two times"));
        }
        let dt = o.dt();
        let t_end = *grid.times().last().expect("nonempty grid");
        let record = BrownianRecord::generate(o.n_paths, (t_end / dt).round() as usize, dt, o.seed);
        let bases = grid.times().iter().map(|&t| ChaosBasis::new(&record, t, modes)).collect::<Result<Vec<_>>>()?;
        Ok(Self { coeffs, grid, modes, tamed: o.tamed, record, bases })
    }

    pub fn windows(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn record(&self) -> &BrownianRecord {
        &self.record
    }

    pub fn basis(&self, i: usize) -> &ChaosBasis {
        &self.bases[i]
    }

    /// One chained step from grid index `i` to `i + 1`.
    pub fn advance(&self, i: usize, eta: &ChaosCoords) -> Result<ChaosProjection> {
        if i + 1 >= self.grid.len() {
            return Err(Error::invalid(format!("no window after grid index {i}")));
        }
        let t = self.grid.times();
        let start = self.bases[i].synthesize(eta)?;
        let end = solve_on_record(&self.coeffs, &start, &self.record, t[i], t[i + 1], self.tamed)?;
        self.bases[i + 1].project(&end)
    }
}

impl CausalOracle for SdeWindowOracle {
    fn eval_window(&self, i: usize, window: &[f64]) -> Result<Vec<f64>> {
        let eta = ChaosCoords::from_coords(window, self.grid.times()[i])?;
        Ok(self.advance(i, &eta)?.coords.to_coords())
    }
}

#[derive(Clone, Debug)]
pub struct SdeDataset {
    pub dataset: CausalDataset,
    /// Per window, the largest `√residual` over samples: the measured truncation error.
    pub truncation: Vec<f64>,
}

/// Orbits `η_{t_{i+1}} = Solve(η_{t_i})` from initial means in the box, with `M = 1`.
pub fn build_sde_dataset(oracle: &SdeWindowOracle, init: &InitBox) -> Result<SdeDataset> {
    let windows = oracle.windows();
    let times = oracle.grid.times();
    let mut truncation = vec![0.0f64; windows];
    let mut samples = Vec::with_capacity(init.n_samples);
    for m in init.draw()? {
        let mut eta = ChaosCoords::constant(m, oracle.modes);
        let mut inputs = Vec::with_capacity(windows);
        let mut targets = Vec::with_capacity(windows);
        for (i, tr) in truncation.iter_mut().enumerate() {
            inputs.push(eta.to_coords());
            let proj = oracle.advance(i, &eta)?;
            *tr = tr.max(proj.residual.sqrt());
            targets.push(proj.coords.to_coords());
            eta = proj.coords;
        }
        samples.push(PathSample { inputs, targets });
    }
    let space = |t: f64| SchauderSpace::chaos(oracle.modes, t);
    let dataset = CausalDataset {
        grid: oracle.grid.clone(),
        memory: 1,
        input_spaces: times[..windows].iter().map(|&t| space(t)).collect::<Result<_>>()?,
        output_spaces: times[1..].iter().map(|&t| space(t)).collect::<Result<_>>()?,
        initial: vec![0.0; oracle.modes + 1],
        samples,
    };
    dataset.validate()?;
    Ok(SdeDataset { dataset, truncation })
}
