//! Concrete spaces with ordered Schauder bases, truncation maps and the
//! `Σ 2^{-k} Φ(p_k(x − y))` metric built from a seminorm family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{Modulus, Regularity};

pub const DEFAULT_K_MAX: usize = 64;
pub const DEFAULT_QUADRATURE_INTERVALS: usize = 1024;

/// `Φ(t) = t / (1 + t)`.
pub fn phi(t: f64) -> f64 {
    t / (1.0 + t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum WeightRule {
    /// `w_j = 1`
    Unit,
    /// `w_j = ratio^(j-1)`
    Geometric { ratio: f64 },
    /// `w_j = j^exponent`
    Power { exponent: f64 },
}

impl WeightRule {
    /// Weight of the 1-based coordinate `j`.
    pub fn weight(&self, j: usize) -> f64 {
        match *self {
            WeightRule::Unit => 1.0,
            WeightRule::Geometric { ratio } => ratio.powi(j as i32 - 1),
            WeightRule::Power { exponent } => (j as f64).powf(exponent),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceKind {
    Euclidean { dim: usize },
    WeightedSequence { weights: WeightRule },
    /// `L²([0, t])` with basis `√(2/t) sin(kπs/t)`, `k ≥ 1`.
    FourierL2 { horizon: f64 },
    /// First-order chaos of Brownian motion on `[0, t]`: coordinates
    /// `(mean, c_1, …, c_modes)`.
    ChaosL2 { modes: usize, horizon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchauderSpace {
    #[serde(flatten)]
    pub kind: SpaceKind,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_quadrature")]
    pub quadrature_intervals: usize,
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

fn default_quadrature() -> usize {
    DEFAULT_QUADRATURE_INTERVALS
}

/// Uniform samples of a function on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub horizon: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn sample(horizon: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = horizon / intervals as f64;
        Self { horizon, values: (0..=intervals).map(|i| f(i as f64 * h)).collect() }
    }

    pub fn intervals(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        let h = self.horizon / self.intervals().max(1) as f64;
        (0..self.values.len()).map(move |i| i as f64 * h)
    }
}

/// Composite Simpson rule on a uniform grid with an even number of intervals.
pub fn simpson(values: &[f64], horizon: f64) -> f64 {
    let n = values.len() - 1;
    let h = horizon / n as f64;
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Element {
    /// Basis coefficients; missing trailing coordinates are zero.
    Coords(Vec<f64>),
    Samples(GridFunction),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordVector {
    pub coords: Vec<f64>,
    pub space_tag: String,
    pub level: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    /// Upper bound on the neglected series tail.
    pub tail_bound: f64,
}

impl SchauderSpace {
    pub fn new(kind: SpaceKind) -> Result<Self> {
        let s = Self { kind, k_max: DEFAULT_K_MAX, quadrature_intervals: DEFAULT_QUADRATURE_INTERVALS };
        s.validate()?;
        Ok(s)
    }

    pub fn euclidean(dim: usize) -> Result<Self> {
        Self::new(SpaceKind::Euclidean { dim })
    }

    pub fn weighted_sequence(weights: WeightRule) -> Result<Self> {
        Self::new(SpaceKind::WeightedSequence { weights })
    }

    pub fn fourier(horizon: f64) -> Result<Self> {
        Self::new(SpaceKind::FourierL2 { horizon })
    }

    pub fn chaos(modes: usize, horizon: f64) -> Result<Self> {
        Self::new(SpaceKind::ChaosL2 { modes, horizon })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SpaceKind::Euclidean { dim } if dim == 0 => Err(Error::invalid("Euclidean dim must be positive")),
            SpaceKind::FourierL2 { horizon } if !(horizon > 0.0 && horizon.is_finite()) => {
                Err(Error::invalid("Fourier horizon must be positive"))
            }
            SpaceKind::ChaosL2 { horizon, .. } if !(horizon >= 0.0 && horizon.is_finite()) => {
                Err(Error::invalid("chaos horizon must be nonnegative"))
            }
            SpaceKind::WeightedSequence { weights } => match weights {
                WeightRule::Geometric { ratio } if !(ratio > 0.0) => Err(Error::invalid("geometric ratio must be positive")),
                WeightRule::Power { exponent } if !exponent.is_finite() => Err(Error::invalid("power exponent must be finite")),
                _ => self.check_common(),
            },
            _ => self.check_common(),
        }
    }

    fn check_common(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("k_max must be positive"));
        }
        if self.quadrature_intervals < 2 || self.quadrature_intervals % 2 != 0 {
            return Err(Error::invalid("quadrature intervals must be even and at least 2"));
        }
        Ok(())
    }

    pub fn tag(&self) -> String {
        match &self.kind {
            SpaceKind::Euclidean { dim } => format!("euclidean({dim})"),
            SpaceKind::WeightedSequence { weights } => match weights {
                WeightRule::Unit => "weighted_sequence(unit)".into(),
                WeightRule::Geometric { ratio } => format!("weighted_sequence(geometric {ratio})"),
                WeightRule::Power { exponent } => format!("weighted_sequence(power {exponent})"),
            },
            SpaceKind::FourierL2 { horizon } => format!("fourier_l2({horizon})"),
            SpaceKind::ChaosL2 { modes, horizon } => format!("chaos_l2({modes}, {horizon})"),
        }
    }

    /// Number of basis elements, if finite.
    pub fn max_level(&self) -> Option<usize> {
        match self.kind {
            SpaceKind::Euclidean { dim } => Some(dim),
            SpaceKind::ChaosL2 { modes, .. } => Some(modes + 1),
            _ => None,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, SpaceKind::Euclidean { .. })
    }

    /// `k`-th Fourier basis function (1-based) at `s`.
    fn fourier_basis(horizon: f64, k: usize, s: f64) -> f64 {
        (2.0 / horizon).sqrt() * (k as f64 * std::f64::consts::PI * s / horizon).sin()
    }

    fn check_element(&self, x: &Element) -> Result<()> {
        match (x, &self.kind) {
            (Element::Coords(c), _) if c.iter().any(|v| !v.is_finite()) => {
                Err(Error::invalid("element has non-finite coordinates"))
            }
            (Element::Coords(c), SpaceKind::Euclidean { dim }) if c.len() != *dim => Err(Error::invalid(format!(
                "element of length {} is not in euclidean({dim})",
                c.len()
            ))),
            (Element::Coords(c), SpaceKind::ChaosL2 { modes, .. }) if c.len() > modes + 1 => {
                Err(Error::invalid("chaos element has too many coordinates"))
            }
            (Element::Coords(_), _) => Ok(()),
            (Element::Samples(g), SpaceKind::FourierL2 { horizon }) => {
                if g.values.len() < 3 || g.intervals() % 2 != 0 {
                    Err(Error::invalid("sampled element needs an even number of intervals"))
                } else if (g.horizon - horizon).abs() > 1e-12 * horizon {
                    Err(Error::invalid("sampled element horizon does not match the space"))
                } else if g.values.iter().any(|v| !v.is_finite()) {
                    Err(Error::invalid("sampled element has non-finite values"))
                } else {
                    Ok(())
                }
            }
            (Element::Samples(_), _) => Err(Error::invalid(format!("{} has no sampled representation", self.tag()))),
        }
    }

    /// First `n` Schauder coordinates of `x`.
    pub fn project(&self, x: &Element, n: usize) -> Result<CoordVector> {
        if n == 0 {
            return Err(Error::invalid("truncation level must be at least 1"));
        }
        if let Some(max) = self.max_level() {
            if n > max {
                return Err(Error::invalid(format!("{} has only {max} basis elements", self.tag())));
            }
        }
        self.check_element(x)?;
        let coords = match x {
            Element::Coords(c) => (0..n).map(|i| c.get(i).copied().unwrap_or(0.0)).collect(),
            Element::Samples(g) => {
                let mut buf = vec![0.0; g.values.len()];
                (1..=n)
                    .map(|k| {
                        for ((b, v), s) in buf.iter_mut().zip(&g.values).zip(g.points()) {
                            *b = v * Self::fourier_basis(g.horizon, k, s);
                        }
                        simpson(&buf, g.horizon)
                    })
                    .collect()
            }
        };
        Ok(CoordVector { coords, space_tag: self.tag(), level: n })
    }

    /// `Σ v_h e_h` as a coordinate element.
    pub fn reconstruct(&self, v: &CoordVector) -> Result<Element> {
        if v.space_tag != self.tag() {
            return Err(Error::invalid(format!("vector belongs to {}, not {}", v.space_tag, self.tag())));
        }
        if v.coords.len() != v.level {
            return Err(Error::invalid("coordinate vector length differs from its level"));
        }
        match self.kind {
            SpaceKind::Euclidean { dim } => {
                let mut c = v.coords.clone();
                c.resize(dim, 0.0);
                Ok(Element::Coords(c))
            }
            _ => Ok(Element::Coords(v.coords.clone())),
        }
    }

    /// Pointwise values of `Σ v_h f_h` on a uniform grid (Fourier spaces only).
    pub fn reconstruct_on_grid(&self, v: &CoordVector, intervals: usize) -> Result<GridFunction> {
        let SpaceKind::FourierL2 { horizon } = self.kind else {
            return Err(Error::Unsupported(format!("{} has no pointwise evaluation", self.tag())));
        };
        if v.space_tag != self.tag() {
            return Err(Error::invalid("vector belongs to another space"));
        }
        Ok(GridFunction::sample(horizon, intervals, |s| {
            v.coords.iter().enumerate().map(|(i, c)| c * Self::fourier_basis(horizon, i + 1, s)).sum()
        }))
    }

    /// `A_n = I_n ∘ P_n`.
    pub fn truncate(&self, x: &Element, n: usize) -> Result<Element> {
        self.reconstruct(&self.project(x, n)?)
    }

    pub fn metric(&self, x: &Element, y: &Element) -> Result<MetricValue> {
        self.check_element(x)?;
        self.check_element(y)?;
        match &self.kind {
            SpaceKind::WeightedSequence { weights } => {
                let (Element::Coords(a), Element::Coords(b)) = (x, y) else {
                    unreachable!("checked above")
                };
                let len = a.len().max(b.len());
                let mut p: f64 = 0.0;
                let mut value = 0.0;
                for k in 1..=self.k_max {
                    if k <= len {
                        let diff = a.get(k - 1).copied().unwrap_or(0.0) - b.get(k - 1).copied().unwrap_or(0.0);
                        p = p.max(weights.weight(k) * diff.abs());
                    }
                    value += 0.5f64.powi(k as i32) * phi(p);
                }
                Ok(MetricValue { value, tail_bound: 0.5f64.powi(self.k_max as i32) })
            }
            _ => {
                let norm = self.l2_distance(x, y)?;
                Ok(MetricValue { value: 0.5 * phi(norm), tail_bound: 0.0 })
            }
        }
    }

    fn l2_distance(&self, x: &Element, y: &Element) -> Result<f64> {
        Ok(match (x, y) {
            (Element::Coords(a), Element::Coords(b)) => {
                let len = a.len().max(b.len());
                let sq: f64 = (0..len)
                    .map(|i| {
                        let d = a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0);
                        d * d
                    })
                    .sum();
                sq.sqrt()
            }
            (Element::Samples(g), Element::Samples(h)) => {
                if g.values.len() != h.values.len() {
                    return Err(Error::invalid("sampled elements live on different grids"));
                }
                let sq: Vec<f64> = g.values.iter().zip(&h.values).map(|(a, b)| (a - b) * (a - b)).collect();
                simpson(&sq, g.horizon).max(0.0).sqrt()
            }
            (Element::Samples(g), Element::Coords(c)) | (Element::Coords(c), Element::Samples(g)) => {
                let SpaceKind::FourierL2 { horizon } = self.kind else { unreachable!("checked above") };
                let sq: Vec<f64> = g
                    .points()
                    .zip(&g.values)
                    .map(|(s, v)| {
                        let r: f64 = c.iter().enumerate().map(|(i, ci)| ci * Self::fourier_basis(horizon, i + 1, s)).sum();
                        (v - r) * (v - r)
                    })
                    .collect();
                simpson(&sq, g.horizon).max(0.0).sqrt()
            }
        })
    }

    /// Table `n ↦ max_x d(A_n(x), x)` for `n = 1..=n_max` (index `n − 1`).
    pub fn truncation_error_profile(&self, samples: &[Element], n_max: usize) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::invalid("truncation profile needs at least one sample"));
        }
        if n_max == 0 {
            return Err(Error::invalid("n_max must be at least 1"));
        }
        let mut profile = vec![0.0f64; n_max];
        for x in samples {
            self.check_element(x)?;
            let row = self.sample_profile(x, n_max)?;
            for (p, r) in profile.iter_mut().zip(row) {
                *p = p.max(r);
            }
        }
        Ok(profile)
    }

    fn sample_profile(&self, x: &Element, n_max: usize) -> Result<Vec<f64>> {
        let cap = self.max_level().unwrap_or(usize::MAX);
        match x {
            Element::Coords(c) => (1..=n_max)
                .map(|n| {
                    if n >= cap {
                        return Ok(0.0);
                    }
                    let mut truncated = c.clone();
                    truncated.iter_mut().skip(n).for_each(|v| *v = 0.0);
                    Ok(self.metric(&Element::Coords(truncated), x)?.value)
                })
                .collect(),
            Element::Samples(g) => {
                // Bessel: ‖x − A_n x‖² = ‖x‖² − Σ_{k≤n} c_k², subtracted term by term.
                let coeffs = self.project(x, n_max)?.coords;
                let sq: Vec<f64> = g.values.iter().map(|v| v * v).collect();
                let mut rest = simpson(&sq, g.horizon);
                Ok(coeffs
                    .iter()
                    .map(|c| {
                        rest = (rest - c * c).max(0.0);
                        0.5 * phi(rest.sqrt())
                    })
                    .collect())
            }
        }
    }
}

/// Smallest `(n_in, n_out)` meeting the truncation thresholds.
///
/// The input threshold is `(1/λ) ω†(ε_D/2)`, raised to `1/α` for Hölder targets;
/// the output threshold is `ε_D/2`.
pub fn select_dims(
    profile_in: &[f64],
    profile_out: &[f64],
    eps_d: f64,
    lambda: f64,
    regularity: Regularity,
    omega_dagger: &Modulus,
) -> Result<(usize, usize)> {
    if !(eps_d > 0.0) || !(lambda > 0.0) {
        return Err(Error::invalid("ε_D and λ must be positive"));
    }
    regularity.validate()?;
    for p in [profile_in, profile_out] {
        if p.is_empty() || p.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("profiles must be nonempty and nonincreasing"));
        }
    }
    let base = omega_dagger.inverse(eps_d / 2.0)? / lambda;
    let thr_in = match regularity {
        Regularity::Holder { alpha } => base.powf(1.0 / alpha),
        Regularity::Smooth { .. } => base,
    };
    let scan = |profile: &[f64], thr: f64, side: &str| {
        profile.iter().position(|&e| e <= thr).map(|i| i + 1).ok_or_else(|| Error::BudgetInfeasible {
            reason: format!("{side} truncation never reaches {thr:e}"),
            best_error: profile[profile.len() - 1],
        })
    };
    Ok((scan(profile_in, thr_in, "input")?, scan(profile_out, eps_d / 2.0, "output")?))
}
