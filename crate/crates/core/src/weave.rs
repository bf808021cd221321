//! Dynamic weaving: a δ-packing of a latent ball, latent codes
//! `z_t = (θ_t / M_T, z̃_t)`, an exact memorizing ReLU net `ĥ` with
//! `ĥ(z_t) = z_{t+1}`, and the readout `L(z) = M_T · z[..P]`.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::snap_floor;
use crate::net::io::{read_model_from, Cursor};
use crate::net::{self, write_model, FlatParams, Layer, NetSpec};

pub const WEAVE_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CNOWEAVE";
const PACKING_RESTARTS: usize = 8;
const DIRECTION_TRIALS: usize = 64;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `I_{δ,Q} = ⌊δ^{−Q}⌋`.
pub fn horizon_capacity(delta: f64, q: usize) -> usize {
    let v = snap_floor(delta.powf(-(q as f64)));
    if v >= usize::MAX as f64 {
        usize::MAX
    } else {
        v.max(0.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub q: usize,
    pub radius: f64,
    pub delta: f64,
    pub points: Vec<Vec<f64>>,
}

impl Packing {
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.points.len() {
            for j in 0..i {
                best = best.min(dist(&self.points[i], &self.points[j]));
            }
        }
        best
    }

    /// Strict separation and ball containment, checked exhaustively.
    pub fn is_valid(&self) -> bool {
        let inside = self.points.iter().all(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() <= self.radius + 1e-12);
        inside && (self.points.len() < 2 || self.min_separation() > self.delta)
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, q: usize, radius: f64) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = radius * rng.random::<f64>().powf(1.0 / q as f64);
            return g.into_iter().map(|v| v / norm * r).collect();
        }
    }
}

fn greedy_insert(cands: &[Vec<f64>], order: &[usize], delta: f64, want: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for &i in order {
        if chosen.iter().all(|&j| dist(&cands[i], &cands[j]) > delta) {
            chosen.push(i);
            if chosen.len() == want {
                break;
            }
        }
    }
    chosen
}

fn farthest_point(cands: &[Vec<f64>], start: usize, delta: f64, want: usize) -> Vec<usize> {
    let mut chosen = vec![start];
    let mut gap: Vec<f64> = cands.iter().map(|c| dist(c, &cands[start])).collect();
    while chosen.len() < want {
        let (best, &d) = gap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("candidate set is nonempty");
        if !(d > delta) {
            break;
        }
        chosen.push(best);
        for (g, c) in gap.iter_mut().zip(cands) {
            *g = g.min(dist(c, &cands[best]));
        }
    }
    chosen
}

/// Greedy δ-packing of the closed `radius`-ball in `ℝ^q` with `t_needed` points.
pub fn pack_ball(q: usize, radius: f64, delta: f64, t_needed: usize, seed: u64) -> Result<Packing> {
    if q == 0 || t_needed == 0 {
        return Err(Error::invalid("packing needs q ≥ 1 and at least one point"));
    }
    if !(delta > 0.0 && delta < radius) {
        return Err(Error::invalid(format!("need 0 < δ < R, got δ = {delta}, R = {radius}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cand = 2048usize.max(32 * t_needed);
    let cands: Vec<Vec<f64>> = (0..n_cand).map(|_| sample_ball(&mut rng, q, radius)).collect();
    let mut best: Vec<usize> = Vec::new();
    for restart in 0..PACKING_RESTARTS {
        let chosen = match restart {
            0 => farthest_point(&cands, rng.random_range(0..n_cand), delta, t_needed),
            1 => {
                let mut order: Vec<usize> = (0..n_cand).collect();
                order.sort_by(|&a, &b| cands[a][0].total_cmp(&cands[b][0]));
                greedy_insert(&cands, &order, delta, t_needed)
            }
            r if r % 2 == 0 => farthest_point(&cands, rng.random_range(0..n_cand), delta, t_needed),
            _ => {
                let mut order: Vec<usize> = (0..n_cand).collect();
                order.shuffle(&mut rng);
                greedy_insert(&cands, &order, delta, t_needed)
            }
        };
        if chosen.len() > best.len() {
            best = chosen;
        }
        if best.len() >= t_needed {
            break;
        }
    }
    if best.len() < t_needed {
        return Err(Error::PackingInfeasible { wanted: t_needed, achieved: best.len() });
    }
    Ok(Packing { q, radius, delta, points: best.into_iter().map(|i| cands[i].clone()).collect() })
}

/// `max ‖x_i − x_j‖ / min_{i≠j} ‖x_i − x_j‖`.
pub fn aspect_ratio(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("aspect ratio needs at least two points"));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..points.len() {
        for j in 0..i {
            let d = dist(&points[i], &points[j]);
            if d == 0.0 {
                return Err(Error::invalid("aspect ratio of a set with duplicate points"));
            }
            lo = lo.min(d);
            hi = hi.max(d);
        }
    }
    Ok(hi / lo)
}

/// An exact interpolating ReLU network and its bookkeeping.
#[derive(Clone, Debug)]
pub struct Memorizer {
    pub spec: NetSpec,
    pub params: FlatParams,
    /// Largest absolute residual at the anchors.
    pub anchor_residual: f64,
    /// `D · N + 12` for `N` anchors in `ℝ^D`.
    pub width_bound: usize,
}

impl Memorizer {
    pub fn within_bound(&self) -> bool {
        self.spec.width() <= self.width_bound
    }
}

pub fn memorize(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Memorizer> {
    memorize_seeded(pairs, 0)
}

/// Projects anchors to a line, then fits a plateau piecewise-linear interpolant:
/// flat within a quarter gap of each anchor, linear in between. When the plateau
/// layout would exceed the width bound (scalar inputs, more than 14 anchors) it
/// falls back to plain linear interpolation with one knot per anchor.
pub fn memorize_seeded(pairs: &[(Vec<f64>, Vec<f64>)], seed: u64) -> Result<Memorizer> {
    let (x0, y0) = pairs.first().ok_or_else(|| Error::invalid("memorize needs at least one pair"))?;
    let (d_in, d_out) = (x0.len(), y0.len());
    if d_in == 0 || d_out == 0 {
        return Err(Error::invalid("memorize needs nonempty vectors"));
    }
    if pairs.iter().any(|(x, y)| x.len() != d_in || y.len() != d_out) {
        return Err(Error::invalid("memorize pairs have inconsistent dims"));
    }
    if pairs.iter().flat_map(|(x, y)| x.iter().chain(y)).any(|v| !v.is_finite()) {
        return Err(Error::invalid("memorize pairs must be finite"));
    }
    for i in 0..pairs.len() {
        for j in 0..i {
            if pairs[i].0 == pairs[j].0 {
                return Err(Error::invalid(format!("anchors {j} and {i} coincide")));
            }
        }
    }
    let n = pairs.len();
    let width_bound = d_in * n + 12;

    if n == 1 {
        let spec = NetSpec::relu(vec![d_in, 1, d_out])?;
        let mut th = vec![0.0; spec.param_count()];
        let c0 = spec.c_offset();
        th[c0..].copy_from_slice(y0);
        let params = FlatParams::new(&spec, th)?;
        return Ok(Memorizer { spec, params, anchor_residual: 0.0, width_bound });
    }

    // Shift so every anchor coordinate is nonnegative; the first ReLU is then exact on anchors.
    let shift: Vec<f64> =
        (0..d_in).map(|d| -pairs.iter().map(|(x, _)| x[d]).fold(f64::INFINITY, f64::min)).collect();
    let lifted: Vec<Vec<f64>> =
        pairs.iter().map(|(x, _)| x.iter().zip(&shift).map(|(a, b)| (a + b).max(0.0)).collect()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for _ in 0..DIRECTION_TRIALS {
        let u: Vec<f64> = (0..d_in).map(|_| rng.sample(StandardNormal)).collect();
        let s: Vec<f64> = lifted.iter().map(|x| net::dot(&u, x)).collect();
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| gap > b.0) {
            best = Some((gap, u, s));
        }
    }
    let (gap, u, s) = best.expect("at least one direction tried");
    if !(gap > 0.0) {
        return Err(Error::invalid("could not separate anchors along any direction"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let h = gap / 4.0;
    let plateau = 2 * (n - 1) <= width_bound;
    let width = if plateau { 2 * (n - 1) } else { n - 1 };
    let spec = NetSpec::relu(vec![d_in, width, d_out])?;

    let mut a0 = Vec::with_capacity(width * d_in);
    for _ in 0..width {
        a0.extend_from_slice(&u);
    }
    let mut b1 = vec![0.0; width];
    let mut a1 = vec![0.0; d_out * width];
    let slope = |lo: usize, hi: usize, e: usize, run: f64| (pairs[hi].1[e] - pairs[lo].1[e]) / run;
    for k in 0..n - 1 {
        let (lo, hi) = (order[k], order[k + 1]);
        if plateau {
            let (ak, bk) = (s[lo] + h, s[hi] - h);
            b1[2 * k] = -ak;
            b1[2 * k + 1] = -bk;
            for e in 0..d_out {
                let m = slope(lo, hi, e, bk - ak);
                a1[e * width + 2 * k] = m;
                a1[e * width + 2 * k + 1] = -m;
            }
        } else {
            // Knot at each anchor; the weight is the change of slope there.
            b1[k] = -s[lo];
            for e in 0..d_out {
                let prev = if k == 0 { 0.0 } else { slope(order[k - 1], lo, e, s[lo] - s[order[k - 1]]) };
                a1[e * width + k] = slope(lo, hi, e, s[hi] - s[lo]) - prev;
            }
        }
    }
    let layers = [Layer { a: a0, b: shift, alpha: 0.0 }, Layer { a: a1, b: b1, alpha: 0.0 }];
    let params = net::pack(&spec, &layers, &pairs[order[0]].1)?;

    let mut anchor_residual: f64 = 0.0;
    for (x, y) in pairs {
        let out = net::forward(&spec, &params, x)?;
        for (o, t) in out.iter().zip(y) {
            anchor_residual = anchor_residual.max((o - t).abs());
        }
    }
    Ok(Memorizer { spec, params, anchor_residual, width_bound })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeaveModel {
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    pub radius: f64,
    pub seed: u64,
    /// `M_T = max(1, max_{t,s} ‖θ_t − θ_s‖₂)`.
    pub m_t: f64,
    pub packing: Packing,
    pub codes: Vec<Vec<f64>>,
    pub hyper_spec: NetSpec,
    pub hyper_params: FlatParams,
    pub anchor_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeaveOptions {
    pub q: usize,
    pub delta: f64,
    pub radius: f64,
    pub seed: u64,
}

impl WeaveOptions {
    pub fn new(q: usize, delta: f64, seed: u64) -> Self {
        Self { q, delta, radius: 1.0, seed }
    }
}

pub fn build_weave(thetas: &[Vec<f64>], q: usize, delta: f64, seed: u64) -> Result<WeaveModel> {
    build_weave_with(thetas, &WeaveOptions::new(q, delta, seed))
}

pub fn build_weave_with(thetas: &[Vec<f64>], o: &WeaveOptions) -> Result<WeaveModel> {
    let t = thetas.len();
    let p = thetas.first().ok_or_else(|| Error::invalid("weave needs at least one θ"))?.len();
    if p == 0 || thetas.iter().any(|th| th.len() != p) {
        return Err(Error::invalid("all θ_t must share one positive length"));
    }
    if thetas.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("θ_t must be finite"));
    }
    let cap = horizon_capacity(o.delta, o.q);
    if t > cap {
        return Err(Error::invalid(format!("horizon {t} exceeds ⌊δ^(−Q)⌋ = {cap}")));
    }
    let mut m_t: f64 = 1.0;
    for i in 0..t {
        for j in 0..i {
            m_t = m_t.max(dist(&thetas[i], &thetas[j]));
        }
    }
    let packing = pack_ball(o.q, o.radius, o.delta, t, o.seed)?;
    let codes: Vec<Vec<f64>> = thetas
        .iter()
        .zip(&packing.points)
        .map(|(th, z)| th.iter().map(|v| v / m_t).chain(z.iter().copied()).collect())
        .collect();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = if t == 1 {
        vec![(codes[0].clone(), codes[0].clone())]
    } else {
        codes.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
    };
    let mem = memorize_seeded(&pairs, o.seed)?;
    Ok(WeaveModel {
        p,
        q: o.q,
        delta: o.delta,
        radius: o.radius,
        seed: o.seed,
        m_t,
        packing,
        codes,
        hyper_spec: mem.spec,
        hyper_params: mem.params,
        anchor_residual: mem.anchor_residual,
    })
}

impl WeaveModel {
    pub fn horizon(&self) -> usize {
        self.codes.len()
    }

    pub fn z0(&self) -> &[f64] {
        &self.codes[0]
    }

    pub fn readout(&self, z: &[f64]) -> Vec<f64> {
        z[..self.p].iter().map(|v| v * self.m_t).collect()
    }

    pub fn step(&self, z: &[f64]) -> Result<Vec<f64>> {
        net::forward(&self.hyper_spec, &self.hyper_params, z)
    }

    /// Width bound `(P + Q) I_{δ,Q} + 12`.
    pub fn width_bound(&self) -> usize {
        (self.p + self.q) * horizon_capacity(self.delta, self.q) + 12
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&WEAVE_FORMAT_VERSION.to_le_bytes());
        for v in [self.p as u64, self.q as u64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.delta.to_le_bytes());
        out.extend_from_slice(&self.radius.to_le_bytes());
        out.extend_from_slice(&(self.horizon() as u64).to_le_bytes());
        out.extend_from_slice(&self.m_t.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.anchor_residual.to_le_bytes());
        for z in self.packing.points.iter().chain(&self.codes) {
            for v in z {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let model = write_model(&self.hyper_spec, &self.hyper_params);
        out.extend_from_slice(&(model.len() as u64).to_le_bytes());
        out.extend_from_slice(&model);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(bytes);
        if cur.take(8)? != MAGIC {
            return Err(Error::Format("not a weave file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != WEAVE_FORMAT_VERSION {
            return Err(Error::Format(format!("unknown weave format version {version}")));
        }
        let (p, q) = (cur.usize()?, cur.usize()?);
        let (delta, radius) = (cur.f64()?, cur.f64()?);
        let t = cur.usize()?;
        let (m_t, seed, anchor_residual) = (cur.f64()?, cur.u64()?, cur.f64()?);
        if p == 0 || q == 0 || t == 0 || t > 1 << 24 || p > 1 << 28 {
            return Err(Error::Format("implausible weave header".into()));
        }
        let points = (0..t).map(|_| cur.f64s(q)).collect::<Result<Vec<_>>>()?;
        let codes = (0..t).map(|_| cur.f64s(p + q)).collect::<Result<Vec<_>>>()?;
        let model_len = cur.usize()?;
        let mut inner = Cursor::new(cur.take(model_len)?);
        let (hyper_spec, hyper_params) = read_model_from(&mut inner)?;
        if !inner.finished() || !cur.finished() {
            return Err(Error::Format("trailing bytes in weave file".into()));
        }
        if hyper_spec.input_dim() != p + q || hyper_spec.output_dim() != p + q {
            return Err(Error::Format("hypernetwork dims do not match P + Q".into()));
        }
        Ok(Self {
            p,
            q,
            delta,
            radius,
            seed,
            m_t,
            packing: Packing { q, radius, delta, points },
            codes,
            hyper_spec,
            hyper_params,
            anchor_residual,
        })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Iterates `ĥ` from `z_0` and reads out `θ̂_t = L(z_t)` for `t < steps`.
pub fn rollout(w: &WeaveModel, steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps > w.horizon() {
        return Err(Error::invalid(format!("rollout of {steps} steps exceeds horizon {}", w.horizon())));
    }
    let mut z = w.z0().to_vec();
    let mut out = Vec::with_capacity(steps);
    for t in 0..steps {
        out.push(w.readout(&z));
        if t + 1 < steps {
            z = w.step(&z)?;
        }
    }
    Ok(out)
}

/// Hypernetwork complexity: the closed-form width bound and the O(·)
/// depth/parameter expressions evaluated with unit constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperReport {
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    pub horizon: usize,
    pub capacity: usize,
    pub width_bound: usize,
    pub dimensional_constant: f64,
    /// `None` when `I_{δ,Q} ≤ 1` (the expressions divide by `log I`).
    pub depth_expr: Option<f64>,
    pub params_expr: Option<f64>,
    pub measured: Option<MeasuredHyper>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredHyper {
    pub width: usize,
    pub depth: usize,
    pub params: usize,
    pub m_t: f64,
    pub aspect_ratio: Option<f64>,
}

pub fn hyper_report(p: usize, q: usize, delta: f64, t: usize) -> Result<HyperReport> {
    if p == 0 || q == 0 || !(delta > 0.0) {
        return Err(Error::invalid("table 2 needs P, Q ≥ 1 and δ > 0"));
    }
    let cap = horizon_capacity(delta, q);
    if t > cap {
        return Err(Error::invalid(format!("horizon {t} exceeds ⌊δ^(−Q)⌋ = {cap}")));
    }
    let d = (p + q) as f64;
    let c_d = (2.0 * (5.0 * (2.0 * std::f64::consts::PI).sqrt()).ln() + 3.0 * d.ln() - (d + 1.0).ln())
        / (2.0 * std::f64::consts::LN_2);
    let (depth_expr, params_expr) = if cap <= 1 {
        (None, None)
    } else {
        let i = cap as f64;
        let inner = (c_d + ((i * i * std::f64::consts::SQRT_2).ln() - delta.ln()) / std::f64::consts::LN_2).max(0.0);
        let tail = 1.0 + std::f64::consts::LN_2 / i.ln() * inner;
        let root = (i * i.ln()).sqrt();
        (Some(i * (1.0 + root * tail)), Some(i.powi(3) * d * d * (1.0 + d * root * tail)))
    };
    Ok(HyperReport {
        p,
        q,
        delta,
        horizon: t,
        capacity: cap,
        width_bound: (p + q) * cap + 12,
        dimensional_constant: c_d,
        depth_expr,
        params_expr,
        measured: None,
    })
}

impl HyperReport {
    pub fn with_measured(mut self, w: &WeaveModel) -> Self {
        self.measured = Some(MeasuredHyper {
            width: w.hyper_spec.width(),
            depth: w.hyper_spec.depth(),
            params: w.hyper_spec.param_count(),
            m_t: w.m_t,
            aspect_ratio: aspect_ratio(&w.codes).ok(),
        });
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_packing_tops_out_at_four() {
        let p = pack_ball(1, 1.0, 0.5, 4, 1).unwrap();
        assert!(p.is_valid());
        match pack_ball(1, 1.0, 0.5, 5, 1) {
            Err(Error::PackingInfeasible { wanted: 5, achieved: 4 }) => {}
            other => panic!("expected infeasible with 4, got {other:?}"),
        }
    }

    #[test]
    fn aspect_examples() {
        let pts = vec![vec![0.0], vec![1.0], vec![3.0]];
        assert_eq!(aspect_ratio(&pts).unwrap(), 3.0);
        assert_eq!(aspect_ratio(&pts[..2]).unwrap(), 1.0);
        assert!(aspect_ratio(&[vec![1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn collinear_memorization() {
        let pairs: Vec<_> = (0..3).map(|i| (vec![i as f64], vec![i as f64])).collect();
        let m = memorize(&pairs).unwrap();
        for (x, y) in &pairs {
            assert!((net::forward(&m.spec, &m.params, x).unwrap()[0] - y[0]).abs() <= 1e-12);
        }
        let single = memorize(&pairs[..1]).unwrap();
        assert_eq!(net::forward(&single.spec, &single.params, &[5.0]).unwrap(), vec![0.0]);
        assert!(memorize(&[(vec![1.0], vec![0.0]), (vec![1.0], vec![2.0])]).is_err());
    }

    #[test]
    fn hyper_report_hand_value() {
        let r = hyper_report(17, 4, 0.5, 16).unwrap();
        assert_eq!(r.capacity, 16);
        assert_eq!(r.width_bound, 348);
        let degenerate = hyper_report(3, 2, 1.0, 1).unwrap();
        assert_eq!(degenerate.capacity, 1);
        assert!(degenerate.depth_expr.is_none());
    }

    #[test]
    fn constant_thetas_use_unit_scale() {
        let thetas = vec![vec![0.3, -0.2]; 4];
        let w = build_weave(&thetas, 2, 0.5, 9).unwrap();
        assert_eq!(w.m_t, 1.0);
        let out = rollout(&w, 4).unwrap();
        for th in out {
            assert!((th[0] - 0.3).abs() < 1e-12 && (th[1] + 0.2).abs() < 1e-12);
        }
        assert!(rollout(&w, 5).is_err());
    }

    #[test]
    fn weave_file_round_trip() {
        let thetas: Vec<Vec<f64>> = (0..3).map(|t| vec![t as f64, 1.0 - t as f64, 0.5]).collect();
        let w = build_weave(&thetas, 2, 0.5, 4).unwrap();
        let bytes = w.to_bytes();
        let back = WeaveModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, w);
        assert_eq!(back.to_bytes(), bytes);
        assert!(WeaveModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
