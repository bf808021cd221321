//! Feedforward (P)ReLU networks over a flat parameter vector.
//!
//! The recursion is `h_0 = x`, `h_{j+1} = A_j σ_{α_j}(h_j + b_j)` and the
//! realization is `h_J + c`, where `σ_α(u) = max(u, αu)` componentwise.
//! Parameters are stored as `(A_0, b_0, α_0), …, (A_{J-1}, b_{J-1}, α_{J-1}), c`
//! with every `A_j` row-major of shape `d_{j+1} × d_j`.

pub mod io;
mod train;

pub use io::{read_model, read_model_file, write_model, write_model_file, MODEL_LAYOUT_VERSION};
pub use train::{init_params, train, Dataset, TrainOptions, TrainReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Prelu,
}

/// Multi-index `[d] = (d_0, …, d_J)` plus the activation family.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetSpec {
    dims: Vec<usize>,
    activation: Activation,
}

/// Offsets of one layer's blocks inside the flat vector.
#[derive(Clone, Copy, Debug)]
pub struct LayerOffsets {
    pub a: usize,
    pub b: usize,
    pub alpha: usize,
    pub rows: usize,
    pub cols: usize,
}

impl NetSpec {
    pub fn new(dims: Vec<usize>, activation: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(format!("a net needs at least two dims, got {dims:?}")));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("dims must be positive, got {dims:?}")));
        }
        Ok(Self { dims, activation })
    }

    pub fn relu(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Activation::Relu)
    }

    pub fn prelu(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Activation::Prelu)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn with_activation(&self, activation: Activation) -> Self {
        Self { dims: self.dims.clone(), activation }
    }

    /// Number of affine layers `J`.
    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.depth()]
    }

    pub fn width(&self) -> usize {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        param_count(self)
    }

    pub fn layer(&self, j: usize) -> LayerOffsets {
        let mut off = 0;
        for k in 0..j {
            off += self.dims[k] * self.dims[k + 1] + self.dims[k] + 1;
        }
        let (rows, cols) = (self.dims[j + 1], self.dims[j]);
        LayerOffsets { a: off, b: off + rows * cols, alpha: off + rows * cols + cols, rows, cols }
    }

    pub fn c_offset(&self) -> usize {
        self.param_count() - self.output_dim()
    }
}

/// `P([d]) = J + Σ_j d_j (d_{j+1} + 1) + d_J`.
pub fn param_count(spec: &NetSpec) -> usize {
    let d = &spec.dims;
    let j = d.len() - 1;
    j + d.windows(2).map(|w| w[0] * (w[1] + 1)).sum::<usize>() + d[j]
}

/// Flat parameter vector bound to a [`NetSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FlatParams(Vec<f64>);

impl FlatParams {
    pub fn new(spec: &NetSpec, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != spec.param_count() {
            return Err(Error::invalid(format!(
                "parameter vector has length {}, spec {:?} needs {}",
                theta.len(),
                spec.dims(),
                spec.param_count()
            )));
        }
        if spec.activation() == Activation::Relu {
            for j in 0..spec.depth() {
                let a = theta[spec.layer(j).alpha];
                if a != 0.0 {
                    return Err(Error::invalid(format!("ReLU net has slope {a} in layer {j}")));
                }
            }
        }
        Ok(Self(theta))
    }

    pub fn zeros(spec: &NetSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Unpacked view of one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub alpha: f64,
}

/// Split a flat vector into its layer blocks and `c`.
pub fn unpack(spec: &NetSpec, params: &FlatParams) -> (Vec<Layer>, Vec<f64>) {
    let th = params.as_slice();
    let layers = (0..spec.depth())
        .map(|j| {
            let o = spec.layer(j);
            Layer {
                a: th[o.a..o.b].to_vec(),
                b: th[o.b..o.alpha].to_vec(),
                alpha: th[o.alpha],
            }
        })
        .collect();
    (layers, th[spec.c_offset()..].to_vec())
}

/// Inverse of [`unpack`].
pub fn pack(spec: &NetSpec, layers: &[Layer], c: &[f64]) -> Result<FlatParams> {
    if layers.len() != spec.depth() {
        return Err(Error::invalid("layer count does not match spec depth"));
    }
    let mut theta = Vec::with_capacity(spec.param_count());
    for (j, l) in layers.iter().enumerate() {
        let o = spec.layer(j);
        if l.a.len() != o.rows * o.cols || l.b.len() != o.cols {
            return Err(Error::invalid(format!("layer {j} blocks have the wrong shape")));
        }
        theta.extend_from_slice(&l.a);
        theta.extend_from_slice(&l.b);
        theta.push(l.alpha);
    }
    theta.extend_from_slice(c);
    FlatParams::new(spec, theta)
}

#[inline]
pub fn prelu(alpha: f64, u: f64) -> f64 {
    u.max(alpha * u)
}

fn check_input(spec: &NetSpec, params: &FlatParams, x: &[f64]) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::invalid("parameter length does not match spec"));
    }
    if x.len() != spec.input_dim() {
        return Err(Error::invalid(format!(
            "input has length {}, net expects {}",
            x.len(),
            spec.input_dim()
        )));
    }
    Ok(())
}

pub fn forward(spec: &NetSpec, params: &FlatParams, x: &[f64]) -> Result<Vec<f64>> {
    check_input(spec, params, x)?;
    Ok(forward_raw(spec, params.as_slice(), x))
}

pub(crate) fn forward_raw(spec: &NetSpec, th: &[f64], x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let mut s = Vec::new();
    for j in 0..spec.depth() {
        let o = spec.layer(j);
        let alpha = th[o.alpha];
        s.clear();
        s.extend(h.iter().zip(&th[o.b..o.alpha]).map(|(&hi, &bi)| prelu(alpha, hi + bi)));
        h.clear();
        h.extend(th[o.a..o.b].chunks_exact(o.cols).map(|row| dot(row, &s)));
    }
    for (hi, ci) in h.iter_mut().zip(&th[spec.c_offset()..]) {
        *hi += ci;
    }
    h
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// Gradient of `⟨upstream, forward(x)⟩` with respect to θ.
pub fn grad(spec: &NetSpec, params: &FlatParams, x: &[f64], upstream: &[f64]) -> Result<FlatParams> {
    check_input(spec, params, x)?;
    if upstream.len() != spec.output_dim() {
        return Err(Error::invalid("upstream length does not match output dim"));
    }
    let mut g = vec![0.0; spec.param_count()];
    let mut tape = Tape::default();
    tape.record(spec, params.as_slice(), x);
    tape.backward(spec, params.as_slice(), upstream, &mut g);
    Ok(FlatParams(g))
}

/// Pre-activations of one forward pass, reused by the backward sweep.
#[derive(Default)]
pub(crate) struct Tape {
    pre: Vec<Vec<f64>>,
    out: Vec<f64>,
}

impl Tape {
    pub(crate) fn output(&self) -> &[f64] {
        &self.out
    }

    pub(crate) fn record(&mut self, spec: &NetSpec, th: &[f64], x: &[f64]) {
        let depth = spec.depth();
        self.pre.resize_with(depth, Vec::new);
        let mut h = x.to_vec();
        for j in 0..depth {
            let o = spec.layer(j);
            let alpha = th[o.alpha];
            let u = &mut self.pre[j];
            u.clear();
            u.extend(h.iter().zip(&th[o.b..o.alpha]).map(|(&hi, &bi)| hi + bi));
            let s: Vec<f64> = u.iter().map(|&v| prelu(alpha, v)).collect();
            h.clear();
            h.extend(th[o.a..o.b].chunks_exact(o.cols).map(|row| dot(row, &s)));
        }
        for (hi, ci) in h.iter_mut().zip(&th[spec.c_offset()..]) {
            *hi += ci;
        }
        self.out = h;
    }

    /// Accumulates `∂⟨upstream, out⟩/∂θ` into `g`.
    pub(crate) fn backward(&self, spec: &NetSpec, th: &[f64], upstream: &[f64], g: &mut [f64]) {
        let c0 = spec.c_offset();
        for (gc, u) in g[c0..].iter_mut().zip(upstream) {
            *gc += u;
        }
        let learn_alpha = spec.activation() == Activation::Prelu;
        let mut gh = upstream.to_vec();
        for j in (0..spec.depth()).rev() {
            let o = spec.layer(j);
            let alpha = th[o.alpha];
            let u = &self.pre[j];
            let mut gs = vec![0.0; o.cols];
            for r in 0..o.rows {
                let gr = gh[r];
                if gr == 0.0 {
                    continue;
                }
                let row = o.a + r * o.cols;
                for k in 0..o.cols {
                    g[row + k] += gr * prelu(alpha, u[k]);
                    gs[k] += gr * th[row + k];
                }
            }
            let mut galpha = 0.0;
            for k in 0..o.cols {
                let uk = u[k];
                if uk > alpha * uk {
                    // d/du = 1, d/dα = 0
                } else {
                    galpha += gs[k] * uk;
                    gs[k] *= alpha;
                }
                g[o.b + k] += gs[k];
            }
            if learn_alpha {
                g[o.alpha] += galpha;
            }
            gh = gs;
        }
    }
}

/// Zero-pad a network to a dominating multi-index without changing its realization.
///
/// Widths are padded with zero rows and columns; layers beyond the source depth
/// are truncated identities with slope 1.
pub fn pad_to(spec: &NetSpec, params: &FlatParams, target: &[usize]) -> Result<(NetSpec, FlatParams)> {
    let src = spec.dims();
    let (j_src, j_tgt) = (src.len() - 1, target.len().saturating_sub(1));
    let bad = |why: &str| Error::invalid(format!("target {target:?} does not dominate {src:?}: {why}"));
    if target.len() < src.len() {
        return Err(bad("target is shallower"));
    }
    if target[0] != src[0] || target[j_tgt] != src[j_src] {
        return Err(bad("input and output dims must match"));
    }
    for j in 1..target.len() {
        let need = if j < j_src { src[j] } else { src[j_src] };
        if target[j] < need {
            return Err(bad("a layer is narrower"));
        }
    }
    if params.len() != spec.param_count() {
        return Err(Error::invalid("parameter length does not match spec"));
    }
    let activation = if j_tgt == j_src { spec.activation() } else { Activation::Prelu };
    let out_spec = NetSpec::new(target.to_vec(), activation)?;
    let (layers, c) = unpack(spec, params);
    let mut out = Vec::with_capacity(j_tgt);
    for j in 0..j_tgt {
        let (rows, cols) = (target[j + 1], target[j]);
        let mut a = vec![0.0; rows * cols];
        let mut b = vec![0.0; cols];
        let alpha;
        if j < j_src {
            let l = &layers[j];
            let (sr, sc) = (src[j + 1], src[j]);
            for r in 0..sr {
                a[r * cols..r * cols + sc].copy_from_slice(&l.a[r * sc..(r + 1) * sc]);
            }
            b[..sc].copy_from_slice(&l.b);
            alpha = l.alpha;
        } else {
            for i in 0..rows.min(cols) {
                a[i * cols + i] = 1.0;
            }
            alpha = 1.0;
        }
        out.push(Layer { a, b, alpha });
    }
    let padded = pack(&out_spec, &out, &c)?;
    Ok((out_spec, padded))
}

/// A stacked network computing `x ↦ (f_1(x), …, f_m(x))`.
#[derive(Clone, Debug)]
pub struct Parallel {
    pub spec: NetSpec,
    pub params: FlatParams,
    /// `(11/16 c² l² n² − 1) Σ P(φ_j)` with `c = 2`.
    pub param_bound: f64,
}

impl Parallel {
    pub fn within_bound(&self) -> bool {
        (self.spec.param_count() as f64) <= self.param_bound
    }
}

pub fn parallelize(nets: &[(NetSpec, FlatParams)]) -> Result<Parallel> {
    let first = nets.first().ok_or_else(|| Error::invalid("parallelize needs at least one net"))?;
    let n_in = first.0.input_dim();
    if nets.iter().any(|(s, _)| s.input_dim() != n_in) {
        return Err(Error::invalid("all nets must share the input dimension"));
    }
    let l = nets.iter().map(|(s, _)| s.input_dim().max(s.output_dim())).max().unwrap_or(1) as f64;
    let n = nets.len() as f64;
    let total: usize = nets.iter().map(|(s, _)| s.param_count()).sum();
    let param_bound = (11.0 / 16.0 * 4.0 * l * l * n * n - 1.0) * total as f64;
    if nets.len() == 1 {
        return Ok(Parallel { spec: first.0.clone(), params: first.1.clone(), param_bound });
    }

    let depth = nets.iter().map(|(s, _)| s.depth()).max().unwrap_or(1);
    let mut synced = Vec::with_capacity(nets.len());
    let mut member_dims = Vec::with_capacity(nets.len());
    for (s, p) in nets {
        let mut dims = s.dims().to_vec();
        dims.resize(depth + 1, s.output_dim());
        let (ps, pp) = pad_to(s, p, &dims)?;
        synced.push(unpack(&ps, &pp));
        member_dims.push(dims);
    }

    let mut dims = vec![n_in];
    for j in 0..depth {
        dims.push(member_dims.iter().map(|d| 2 * d[j]).sum());
    }
    dims.push(member_dims.iter().map(|d| d[depth]).sum());
    let spec = NetSpec::prelu(dims.clone())?;

    let mut layers = Vec::with_capacity(depth + 1);
    // Layer 0 lifts x to (x, −x) for every member.
    {
        let (rows, cols) = (dims[1], n_in);
        let mut a = vec![0.0; rows * cols];
        let mut r0 = 0;
        for _ in nets {
            for i in 0..n_in {
                a[(r0 + i) * cols + i] = 1.0;
                a[(r0 + n_in + i) * cols + i] = -1.0;
            }
            r0 += 2 * n_in;
        }
        layers.push(Layer { a, b: vec![0.0; cols], alpha: 1.0 });
    }
    for j in 0..depth {
        let last = j + 1 == depth;
        let (rows, cols) = (dims[j + 2], dims[j + 1]);
        let mut a = vec![0.0; rows * cols];
        let mut b = vec![0.0; cols];
        let (mut r0, mut c0) = (0, 0);
        for (m, (mlayers, _)) in synced.iter().enumerate() {
            let (mr, mc) = (member_dims[m][j + 1], member_dims[m][j]);
            let ml = &mlayers[j];
            let (big, small) = (ml.alpha.max(1.0), ml.alpha.min(1.0));
            b[c0..c0 + mc].copy_from_slice(&ml.b);
            for (k, v) in ml.b.iter().enumerate() {
                b[c0 + mc + k] = -v;
            }
            for r in 0..mr {
                for k in 0..mc {
                    let w = ml.a[r * mc + k];
                    a[(r0 + r) * cols + c0 + k] = big * w;
                    a[(r0 + r) * cols + c0 + mc + k] = -small * w;
                    if !last {
                        a[(r0 + mr + r) * cols + c0 + k] = -big * w;
                        a[(r0 + mr + r) * cols + c0 + mc + k] = small * w;
                    }
                }
            }
            r0 += if last { mr } else { 2 * mr };
            c0 += 2 * mc;
        }
        layers.push(Layer { a, b, alpha: 0.0 });
    }
    let c: Vec<f64> = synced.iter().flat_map(|(_, c)| c.iter().copied()).collect();
    let params = pack(&spec, &layers, &c)?;
    Ok(Parallel { spec, params, param_bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(dims: &[usize], theta: &[f64]) -> (NetSpec, FlatParams) {
        let s = NetSpec::prelu(dims.to_vec()).unwrap();
        let p = FlatParams::new(&s, theta.to_vec()).unwrap();
        (s, p)
    }

    #[test]
    fn counts_match_hand_values() {
        assert_eq!(param_count(&NetSpec::relu(vec![1, 1]).unwrap()), 4);
        assert_eq!(param_count(&NetSpec::relu(vec![2, 3, 1]).unwrap()), 17);
        for n in 1..6 {
            assert_eq!(param_count(&NetSpec::relu(vec![n, n]).unwrap()), 1 + n * (n + 1) + n);
        }
    }

    #[test]
    fn hand_evaluated_forward() {
        let (s, p) = net(&[1, 1], &[2.0, 1.0, 0.0, -1.0]);
        assert_eq!(forward(&s, &p, &[3.0]).unwrap(), vec![7.0]);
        let (s, p) = net(&[1, 1], &[1.0, 0.0, 1.0, 0.0]);
        assert_eq!(forward(&s, &p, &[-2.5]).unwrap(), vec![-2.5]);
        assert_eq!(prelu(0.5, -2.0), -1.0);
    }

    #[test]
    fn shape_errors() {
        let (s, p) = net(&[2, 1], &[0.0; 6]);
        assert!(forward(&s, &p, &[1.0]).is_err());
        assert!(NetSpec::relu(vec![3]).is_err());
        assert!(NetSpec::relu(vec![3, 0]).is_err());
        let relu = NetSpec::relu(vec![1, 1]).unwrap();
        assert!(FlatParams::new(&relu, vec![1.0, 0.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn dead_units_have_zero_gradient() {
        let s = NetSpec::relu(vec![1, 2, 1]).unwrap();
        // b_0 = -10 kills layer 0 for x = 1
        let mut th = vec![0.0; s.param_count()];
        let o0 = s.layer(0);
        th[o0.a] = 1.0;
        th[o0.a + 1] = 1.0;
        th[o0.b] = -10.0;
        let p = FlatParams::new(&s, th).unwrap();
        let g = grad(&s, &p, &[1.0], &[1.0]).unwrap();
        assert_eq!(&g.as_slice()[o0.a..o0.b], &[0.0, 0.0]);
    }

    #[test]
    fn pad_to_self_is_identity() {
        let (s, p) = net(&[2, 3, 1], &(0..17).map(|i| i as f64 * 0.1).collect::<Vec<_>>());
        let (s2, p2) = pad_to(&s, &p, &[2, 3, 1]).unwrap();
        assert_eq!(s, s2);
        assert_eq!(p, p2);
        assert!(pad_to(&s, &p, &[2, 2, 1]).is_err());
        assert!(pad_to(&s, &p, &[3, 3, 1]).is_err());
    }

    #[test]
    fn two_identities_in_parallel() {
        let id = net(&[1, 1], &[1.0, 0.0, 1.0, 0.0]);
        let par = parallelize(&[id.clone(), id]).unwrap();
        for x in [-3.0, -0.5, 0.0, 2.0] {
            assert_eq!(forward(&par.spec, &par.params, &[x]).unwrap(), vec![x, x]);
        }
        assert!(par.within_bound());
    }
}
