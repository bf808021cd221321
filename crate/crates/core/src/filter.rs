//! Neural filters (encode, finite net, decode), the special function `V`,
//! generalized inverses, neural-filter budget formulas and the three-term
//! error split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{self, FlatParams, NetSpec};
use crate::spaces::{CoordVector, Element, SchauderSpace};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Regularity {
    Holder { alpha: f64 },
    Smooth { k: u32 },
}

impl Regularity {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regularity::Holder { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(Error::invalid(format!("Hölder exponent {alpha} outside (0, 1]")))
            }
            Regularity::Smooth { k } if k == 0 => Err(Error::invalid("smoothness order must be positive")),
            _ => Ok(()),
        }
    }
}

/// A nondecreasing function tabulated on a strictly increasing grid, read as a
/// right-continuous step function extended by its end values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTable {
    xs: Vec<f64>,
    vals: Vec<f64>,
}

impl GridTable {
    pub fn new(xs: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != vals.len() {
            return Err(Error::invalid("grid table needs matching nonempty columns"));
        }
        if xs.iter().chain(&vals).any(|v| v.is_nan()) {
            return Err(Error::invalid("grid table contains NaN"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        if vals.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("tabulated map is not nondecreasing"));
        }
        Ok(Self { xs, vals })
    }

    pub fn sample(xs: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let vals = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, vals)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Value of the step function at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.xs.partition_point(|&g| g <= x) {
            0 => self.vals[0],
            i => self.vals[i - 1],
        }
    }
}

/// `T⁻(y) = inf{x : T(x) ≥ y}` over the grid; `−∞` when every `T(x) ≥ y`,
/// `+∞` when no `T(x)` reaches `y`.
pub fn generalized_inverse(table: &GridTable, y: f64) -> f64 {
    if y <= table.vals[0] {
        return f64::NEG_INFINITY;
    }
    let i = table.vals.partition_point(|&v| v < y);
    if i == table.vals.len() {
        f64::INFINITY
    } else {
        table.xs[i]
    }
}

/// A modulus of continuity `ω`; its generalized inverse `ω†` enters the budgets.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulus {
    #[default]
    Identity,
    Empirical { table: GridTable },
}

impl Modulus {
    /// `ω†(y)`.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        match self {
            Modulus::Identity => Ok(y),
            Modulus::Empirical { table } => Ok(generalized_inverse(table, y)),
        }
    }
}

fn g_of_u(u: f64) -> f64 {
    u.powi(4) * (u + 2.0).ln() / 3f64.ln()
}

/// Inverse of `u ↦ u⁴ log₃(u + 2)` on `[0, ∞)`.
pub fn special_v(y: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::invalid(format!("V is defined on [0, ∞), got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, y.powf(0.25).max(1.0));
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g_of_u(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (g_of_u(lo) - y).abs() <= (g_of_u(hi) - y).abs() { lo } else { hi })
}

/// `ln V(e^{ln_y})`, usable when `y` itself overflows.
pub fn special_v_ln(ln_y: f64) -> Result<f64> {
    if ln_y.is_nan() || ln_y == f64::INFINITY {
        return Err(Error::invalid("ln V needs a finite argument"));
    }
    if ln_y < 700.0 {
        return Ok(special_v(ln_y.exp())?.ln());
    }
    // For u ≥ 1, solve 4w + ln(ln(e^w + 2)/ln 3) = ln y with w = ln u.
    let h = |w: f64| 4.0 * w + ((w.exp() + 2.0).ln() / 3f64.ln()).ln();
    let (mut lo, mut hi) = (0.0f64, ln_y / 4.0 + 1.0);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < ln_y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetInput {
    pub eps_d: f64,
    pub eps_a: f64,
    pub lambda: f64,
    pub regularity: Regularity,
    pub n_in: usize,
    pub n_out: usize,
    /// Modulus `ω_φ`; the budgets use `ω_φ†(ε_A)`.
    #[serde(default)]
    pub omega_phi: Modulus,
    /// `C_f̄`, smooth case only.
    #[serde(default = "one")]
    pub c_fbar: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub width: u64,
    pub depth: u64,
    /// The ceiling term shared by the width and depth rows.
    pub core_term: u64,
    pub constants: BudgetConstants,
}

const SNAP: f64 = 1e-12;

/// Ceiling that treats values within a relative `1e-12` of an integer as that integer.
pub fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

pub fn snap_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP * r.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

fn to_count(quantity: &'static str, x: f64) -> Result<u64> {
    if x.is_finite() && x >= 0.0 && x < 1.8e19 {
        Ok(x as u64)
    } else {
        Err(Error::BudgetOverflow { quantity, log10: x.log10() })
    }
}

fn from_ln(quantity: &'static str, ln: f64) -> Result<f64> {
    if ln > 43.0 || ln.is_nan() {
        // e^43 already exceeds the u64 range
        return Err(Error::BudgetOverflow { quantity, log10: ln / std::f64::consts::LN_10 });
    }
    Ok(ln.exp())
}

impl BudgetInput {
    fn validate(&self) -> Result<f64> {
        if !(self.eps_d > 0.0 && self.eps_a > 0.0 && self.lambda > 0.0 && self.c_fbar > 0.0) {
            return Err(Error::invalid("ε_D, ε_A, λ and C_f̄ must be positive"));
        }
        if self.n_in == 0 || self.n_out == 0 {
            return Err(Error::invalid("n_in and n_out must be positive"));
        }
        self.regularity.validate()?;
        let omega = self.omega_phi.inverse(self.eps_a)?;
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::BudgetInfeasible {
                reason: format!("ω_φ†(ε_A) = {omega} is not a positive finite number"),
                best_error: self.eps_a,
            });
        }
        Ok(omega)
    }
}

pub fn budget_smooth(b: &BudgetInput) -> Result<Budget> {
    let omega = b.validate()?;
    let Regularity::Smooth { k } = b.regularity else {
        return Err(Error::invalid("budget_smooth needs a smooth regularity class"));
    };
    let (n, m, k) = (b.n_in as f64, b.n_out as f64, k as f64);
    let c1 = 17.0 * k.powf(n + 1.0) * 3f64.powf(n) * n;
    let c2 = 18.0 * k * k;
    let c3 = 85.0 * (k + 1.0).powf(n) * 8f64.powf(k);
    let ln_core = n / (4.0 * k) * (c3 * b.c_fbar).ln() + n / (8.0 * k) * n.ln() - 2.0 * k / n * omega.ln();
    let core = snap_ceil(from_ln("core term", ln_core)?).max(0.0);
    let width = n * (m - 1.0) + c1 * (core + 2.0) * (8.0 * core).log2();
    let depth = m * (1.0 + c2 * (core + 2.0) * core.log2() + 2.0 * n);
    Ok(Budget {
        width: to_count("width", snap_ceil(width))?.max(1),
        depth: to_count("depth", snap_ceil(depth))?.max(1),
        core_term: to_count("core term", core)?,
        constants: BudgetConstants { c1, c2, c3: Some(c3) },
    })
}

pub fn budget_holder(b: &BudgetInput) -> Result<Budget> {
    let omega = b.validate()?;
    let Regularity::Holder { alpha } = b.regularity else {
        return Err(Error::invalid("budget_holder needs a Hölder regularity class"));
    };
    let (n, m) = (b.n_in as f64, b.n_out as f64);
    let c1 = 3f64.powf(n + 3.0);
    let c2 = 18.0 + 2.0 * n;
    let e = n / alpha;
    let ln_v_arg = e * (131.0 * b.lambda).ln() + e * (n * m).ln();
    let ln_base = -e * omega.ln() + special_v_ln(ln_v_arg)?;
    let base = from_ln("V term", ln_base)?;
    let base_ceil = snap_ceil(base);
    let floor_term = n * snap_floor(from_ln("V term root", ln_base / n)?);
    let width = n * (m - 1.0) + c1 * floor_term.max(base_ceil + 2.0);
    let depth = n * (1.0 + 11.0 * base_ceil + c2);
    Ok(Budget {
        width: to_count("width", snap_ceil(width))?,
        depth: to_count("depth", snap_ceil(depth))?,
        core_term: to_count("V term", base_ceil)?,
        constants: BudgetConstants { c1, c2, c3: None },
    })
}

pub fn budget(b: &BudgetInput) -> Result<Budget> {
    match b.regularity {
        Regularity::Holder { .. } => budget_holder(b),
        Regularity::Smooth { .. } => budget_smooth(b),
    }
}

/// `decode ∘ net ∘ encode` between two Schauder spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct NeuralFilter {
    pub in_space: SchauderSpace,
    pub out_space: SchauderSpace,
    pub n_in: usize,
    pub n_out: usize,
    pub spec: NetSpec,
    pub params: FlatParams,
}

impl NeuralFilter {
    pub fn new(
        in_space: SchauderSpace,
        out_space: SchauderSpace,
        spec: NetSpec,
        params: FlatParams,
    ) -> Result<Self> {
        let (n_in, n_out) = (spec.input_dim(), spec.output_dim());
        for (space, n) in [(&in_space, n_in), (&out_space, n_out)] {
            if space.max_level().is_some_and(|max| n > max) {
                return Err(Error::invalid(format!("{} cannot hold {n} coordinates", space.tag())));
            }
        }
        if params.len() != spec.param_count() {
            return Err(Error::invalid("filter core parameters do not match its spec"));
        }
        Ok(Self { in_space, out_space, n_in, n_out, spec, params })
    }

    pub fn encode(&self, x: &Element) -> Result<Vec<f64>> {
        Ok(self.in_space.project(x, self.n_in)?.coords)
    }

    pub fn decode(&self, y: Vec<f64>) -> Result<Element> {
        self.out_space.reconstruct(&CoordVector { coords: y, space_tag: self.out_space.tag(), level: self.n_out })
    }

    pub fn forward(&self, x: &Element) -> Result<Element> {
        let y = net::forward(&self.spec, &self.params, &self.encode(x)?)?;
        self.decode(y)
    }
}

/// Empirical suprema of the three terms splitting the filter error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorSplit {
    /// `max d_B(A_B y, y)` over `y = f(x)`.
    pub enc_out: f64,
    /// `max d_B(A_B F(A_E x), A_B F(x))`.
    pub enc_in: f64,
    /// `max d_B(f̂(x), A_B F(A_E x))`.
    pub approx: f64,
    /// `max d_B(f̂(x), f(x))`.
    pub end_to_end: f64,
}

impl ErrorSplit {
    pub fn bound(&self) -> f64 {
        self.enc_out + self.enc_in + self.approx
    }

    pub fn is_sound(&self) -> bool {
        self.end_to_end <= self.bound()
    }
}

pub fn error_decomposition(
    target: &dyn Fn(&Element) -> Result<Element>,
    filter: &NeuralFilter,
    samples: &[Element],
) -> Result<ErrorSplit> {
    if samples.is_empty() {
        return Err(Error::invalid("error decomposition needs samples"));
    }
    let (ins, outs) = (&filter.in_space, &filter.out_space);
    let d = |a: &Element, b: &Element| outs.metric(a, b).map(|m| m.value);
    let mut split = ErrorSplit::default();
    for x in samples {
        let fx = target(x)?;
        let f_trunc = target(&ins.truncate(x, filter.n_in)?)?;
        let a = outs.truncate(&f_trunc, filter.n_out)?;
        let b = outs.truncate(&fx, filter.n_out)?;
        let yhat = filter.forward(x)?;
        split.approx = split.approx.max(d(&yhat, &a)?);
        split.enc_in = split.enc_in.max(d(&a, &b)?);
        split.enc_out = split.enc_out.max(d(&b, &fx)?);
        split.end_to_end = split.end_to_end.max(d(&yhat, &fx)?);
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_fixed_points() {
        assert_eq!(special_v(0.0).unwrap(), 0.0);
        assert!((special_v(1.0).unwrap() - 1.0).abs() < 1e-14);
        let u = special_v(100.0).unwrap();
        assert!((g_of_u(u) - 100.0).abs() < 1e-10);
        assert!(special_v(-1.0).is_err());
        let big = special_v_ln(1000.0).unwrap();
        let back = 4.0 * big + ((big.exp() + 2.0).ln() / 3f64.ln()).ln();
        assert!((back - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn floor_inverse() {
        let xs: Vec<f64> = (-3000..=3000).map(|i| i as f64 / 1000.0).collect();
        let t = GridTable::sample(xs, f64::floor).unwrap();
        assert_eq!(generalized_inverse(&t, 0.5), 1.0);
        assert_eq!(generalized_inverse(&t, 10.0), f64::INFINITY);
        assert_eq!(generalized_inverse(&t, -3.0), f64::NEG_INFINITY);
        assert!(GridTable::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn identity_inverse_on_grid() {
        let xs: Vec<f64> = (0..=100).map(|i| i as f64 / 4.0).collect();
        let t = GridTable::sample(xs, |x| x).unwrap();
        assert_eq!(generalized_inverse(&t, 2.25), 2.25);
    }

    fn smooth_input(k: u32) -> BudgetInput {
        BudgetInput {
            eps_d: 0.1,
            eps_a: 1.0,
            lambda: 1.0,
            regularity: Regularity::Smooth { k },
            n_in: 1,
            n_out: 1,
            omega_phi: Modulus::Identity,
            c_fbar: 1.0 / (85.0 * (k as f64 + 1.0) * 8f64.powi(k as i32)),
        }
    }

    #[test]
    fn smooth_unit_core_term() {
        let b = budget_smooth(&smooth_input(1)).unwrap();
        assert_eq!(b.core_term, 1);
        assert_eq!(b.width as f64, 9.0 * b.constants.c1);
        let b2 = budget_smooth(&smooth_input(2)).unwrap();
        assert_eq!(b2.constants.c2, 4.0 * b.constants.c2);
    }

    #[test]
    fn holder_unit_v_term() {
        let b = BudgetInput {
            eps_d: 0.1,
            eps_a: 1.0,
            lambda: 1.0 / 131.0,
            regularity: Regularity::Holder { alpha: 1.0 },
            n_in: 1,
            n_out: 1,
            omega_phi: Modulus::Identity,
            c_fbar: 1.0,
        };
        let out = budget_holder(&b).unwrap();
        assert_eq!(out.core_term, 1);
        assert_eq!(out.depth, 1 + 11 + 20);
    }

    #[test]
    fn overflow_is_typed() {
        let mut b = smooth_input(1);
        b.n_in = 40;
        b.eps_a = 1e-30;
        assert!(matches!(budget_smooth(&b), Err(Error::BudgetOverflow { .. })));
    }
}
