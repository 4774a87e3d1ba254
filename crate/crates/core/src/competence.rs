//! Group competence functions `μ(K)`: the expected competence of the
//! representative elected by a group of `K` voters.

use crate::audit::AuditRecord;
use crate::error::{check_probability, Error, Result};
use crate::quadrature::adaptive_simpson;

const QUAD_TOL: f64 = 1e-8;
const QUAD_MIN_DEPTH: u32 = 4;
const SHAPE_SLACK: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;

/// Support `[a, b]` with `0 ≤ a < b ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSupport {
    a: f64,
    b: f64,
}

impl UniformSupport {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_probability("a", a)?;
        check_probability("b", b)?;
        if a >= b {
            return Err(Error::InvalidArgument(format!("support needs a < b, got [{a}, {b}]")));
        }
        Ok(UniformSupport { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }
}

/// A competence density on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Uniform(UniformSupport),
    Grid(GridDensity),
}

/// Piecewise-linear density through `(knots[j], values[j])`, zero outside
/// `[knots[0], knots[last]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    knots: Vec<f64>,
    values: Vec<f64>,
    cum: Vec<f64>,
}

impl GridDensity {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "grid density needs ≥ 2 knots and matching values, got {} knots and {} values",
                knots.len(),
                values.len()
            )));
        }
        for &s in &knots {
            check_probability("knot", s)?;
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid knots must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("grid density values must be finite and ≥ 0".into()));
        }
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for j in 0..knots.len() - 1 {
            let area = 0.5 * (values[j] + values[j + 1]) * (knots[j + 1] - knots[j]);
            cum.push(cum[j] + area);
        }
        let total = *cum.last().unwrap_or(&0.0);
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("grid density integrates to {total}, not 1")));
        }
        Ok(GridDensity { knots, values, cum })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment_cdf(&self, j: usize, s: f64) -> f64 {
        let t = s - self.knots[j];
        let slope = (self.values[j + 1] - self.values[j]) / (self.knots[j + 1] - self.knots[j]);
        self.cum[j] + self.values[j] * t + 0.5 * slope * t * t
    }

    fn cdf(&self, s: f64) -> f64 {
        let last = self.knots.len() - 1;
        if s <= self.knots[0] {
            return 0.0;
        }
        if s >= self.knots[last] {
            return 1.0;
        }
        let j = self.knots.partition_point(|&k| k <= s) - 1;
        self.segment_cdf(j, s).clamp(0.0, 1.0)
    }

    fn quantile(&self, u: f64) -> f64 {
        let segs = self.knots.len() - 1;
        // first segment whose right cumulative exceeds u has positive mass
        let j = self.cum[1..].partition_point(|&c| c <= u).min(segs - 1);
        let r = u - self.cum[j];
        let f0 = self.values[j];
        let width = self.knots[j + 1] - self.knots[j];
        let slope = (self.values[j + 1] - f0) / width;
        let disc = (f0 * f0 + 2.0 * slope * r).max(0.0);
        let denom = f0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        (self.knots[j] + t.clamp(0.0, width)).clamp(0.0, 1.0)
    }

    fn support(&self) -> (f64, f64) {
        let segs = self.knots.len() - 1;
        let lo = (0..segs)
            .find(|&j| self.cum[j + 1] > self.cum[j])
            .map_or(self.knots[0], |j| self.knots[j]);
        let hi = (0..segs)
            .rev()
            .find(|&j| self.cum[j + 1] > self.cum[j])
            .map_or(self.knots[segs], |j| self.knots[j + 1]);
        (lo, hi)
    }

    fn mean(&self) -> f64 {
        // exact for linear pieces: ∫ s (f0 + m t) ds
        (0..self.knots.len() - 1)
            .map(|j| {
                let (s0, s1) = (self.knots[j], self.knots[j + 1]);
                let (f0, f1) = (self.values[j], self.values[j + 1]);
                let h = s1 - s0;
                h * (f0 * (2.0 * s0 + s1) + f1 * (s0 + 2.0 * s1)) / 6.0
            })
            .sum()
    }
}

impl Density {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Ok(Density::Uniform(UniformSupport::new(a, b)?))
    }

    pub fn grid(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Ok(Density::Grid(GridDensity::new(knots, values)?))
    }

    /// `F(s)`.
    pub fn cdf(&self, s: f64) -> f64 {
        match self {
            Density::Uniform(u) => ((s - u.a) / u.width()).clamp(0.0, 1.0),
            Density::Grid(g) => g.cdf(s),
        }
    }

    /// `F⁻¹(u)` for `u ∈ [0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Density::Uniform(s) => s.a + u.clamp(0.0, 1.0) * s.width(),
            Density::Grid(g) => g.quantile(u.clamp(0.0, 1.0)),
        }
    }

    /// `max f`.
    pub fn max_density(&self) -> f64 {
        match self {
            Density::Uniform(u) => 1.0 / u.width(),
            Density::Grid(g) => g.values.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Density::Uniform(u) => 0.5 * (u.a + u.b),
            Density::Grid(g) => g.mean(),
        }
    }

    /// Smallest interval carrying all the mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Density::Uniform(u) => (u.a, u.b),
            Density::Grid(g) => g.support(),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (lo, hi) = self.support();
        match self {
            Density::Uniform(_) => vec![lo, hi],
            Density::Grid(g) => g.knots.iter().copied().filter(|&k| k >= lo && k <= hi).collect(),
        }
    }

    /// `E[max of K draws] = 1 - ∫₀¹ F(s)^K ds`.
    pub fn expected_max(&self, k: u64) -> Result<f64> {
        let (_, hi) = self.support();
        let kf = k as f64;
        let power = |s: f64| {
            let f = self.cdf(s);
            if f <= 0.0 {
                0.0
            } else {
                (kf * f.ln()).exp()
            }
        };
        let pts = self.breakpoints();
        let pieces = (pts.len() - 1).max(1) as f64;
        let mut integral = 1.0 - hi;
        for w in pts.windows(2) {
            integral += adaptive_simpson(power, w[0], w[1], QUAD_TOL / pieces, QUAD_MIN_DEPTH)?;
        }
        Ok((1.0 - integral).clamp(0.0, 1.0))
    }
}

/// Noisy-max rank weights `p_1 ≥ p_2 ≥ … ≥ 0`, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyWeights(Vec<f64>);

impl NoisyWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("noisy-max weights must be non-empty".into()));
        }
        for &w in &weights {
            check_probability("weight", w)?;
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("noisy-max weights must be non-increasing".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidArgument(format!("noisy-max weights sum to {total}, not 1")));
        }
        Ok(NoisyWeights(weights))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The first `min(m, K)` weights, renormalized.
    pub fn for_group(&self, k: u64) -> Vec<f64> {
        let m = self.0.len().min(usize::try_from(k).unwrap_or(usize::MAX));
        let head = &self.0[..m];
        let total: f64 = head.iter().sum();
        if total > 0.0 {
            head.iter().map(|w| w / total).collect()
        } else {
            // all leading weight was beyond K; fall back to the top rank
            let mut w = vec![0.0; m];
            w[0] = 1.0;
            w
        }
    }
}

/// Competence lookup table indexed by `K - 1`; sizes beyond it reuse the
/// last entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Table(Vec<f64>);

impl Table {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("tabulated competence needs ≥ 1 value".into()));
        }
        for &v in &values {
            check_probability("table value", v)?;
        }
        Ok(Table(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// How a group of `K` voters elects its representative.
#[derive(Debug, Clone, PartialEq)]
pub enum CompetenceFunction {
    /// Uniformly random member, competences uniform on `[a, b]`.
    UniformMean(UniformSupport),
    /// Most competent member, competences uniform on `[a, b]`.
    MaxUniform(UniformSupport),
    /// The `i`-th most competent member with probability `p_i`.
    NoisyMaxUniform(UniformSupport, NoisyWeights),
    /// Most competent member under an arbitrary density.
    MaxGeneral(Density),
    Tabulated(Table),
}

impl CompetenceFunction {
    pub fn uniform_mean(a: f64, b: f64) -> Result<Self> {
        Ok(CompetenceFunction::UniformMean(UniformSupport::new(a, b)?))
    }

    pub fn max_uniform(a: f64, b: f64) -> Result<Self> {
        Ok(CompetenceFunction::MaxUniform(UniformSupport::new(a, b)?))
    }

    pub fn noisy_max_uniform(a: f64, b: f64, weights: Vec<f64>) -> Result<Self> {
        Ok(CompetenceFunction::NoisyMaxUniform(UniformSupport::new(a, b)?, NoisyWeights::new(weights)?))
    }

    pub fn max_general(density: Density) -> Self {
        CompetenceFunction::MaxGeneral(density)
    }

    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        Ok(CompetenceFunction::Tabulated(Table::new(values)?))
    }

    /// `μ(K)`.
    pub fn evaluate(&self, k: u64) -> Result<f64> {
        if k == 0 {
            return Err(Error::InvalidArgument("group size K must be at least 1".into()));
        }
        let kf = k as f64;
        let v = match self {
            CompetenceFunction::UniformMean(s) => 0.5 * (s.a + s.b),
            CompetenceFunction::MaxUniform(s) => s.a / (kf + 1.0) + s.b * kf / (kf + 1.0),
            CompetenceFunction::NoisyMaxUniform(s, w) => w
                .for_group(k)
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let rank = (i + 1) as f64;
                    p * (rank * s.a + (kf + 1.0 - rank) * s.b) / (kf + 1.0)
                })
                .sum(),
            CompetenceFunction::MaxGeneral(d) => d.expected_max(k)?,
            CompetenceFunction::Tabulated(t) => {
                let idx = usize::try_from(k - 1).unwrap_or(usize::MAX).min(t.0.len() - 1);
                t.0[idx]
            }
        };
        Ok(v.clamp(0.0, 1.0))
    }

    /// Piecewise-linear extension `μ̄(k)` through the integer points.
    pub fn interpolate(&self, k: f64) -> Result<f64> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("interpolation point must be ≥ 1, got {k}")));
        }
        let lo = k.floor();
        let frac = k - lo;
        let at_lo = self.evaluate(lo as u64)?;
        if frac == 0.0 {
            return Ok(at_lo);
        }
        let at_hi = self.evaluate(lo as u64 + 1)?;
        Ok(at_lo + frac * (at_hi - at_lo))
    }

    /// Density of individual competences, where the process has one.
    pub fn density(&self) -> Option<Density> {
        match self {
            CompetenceFunction::UniformMean(s)
            | CompetenceFunction::MaxUniform(s)
            | CompetenceFunction::NoisyMaxUniform(s, _) => Some(Density::Uniform(*s)),
            CompetenceFunction::MaxGeneral(d) => Some(d.clone()),
            CompetenceFunction::Tabulated(_) => None,
        }
    }
}

/// Smallest `K ≤ k_max` with `μ(K) > 1/2`.
pub fn minimal_consistent_k(mu: &CompetenceFunction, k_max: u64) -> Result<Option<u64>> {
    for k in 1..=k_max {
        if mu.evaluate(k)? > 0.5 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Discrete shape properties of `μ` on `1..=K_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShapeReport {
    pub monotone_nondecreasing: bool,
    pub concave: bool,
    pub log_concave: bool,
    pub one_minus_log_convex: bool,
}

impl ShapeReport {
    /// Names of the flags that are false.
    pub fn failing(&self) -> Vec<&'static str> {
        [
            ("monotone_nondecreasing", self.monotone_nondecreasing),
            ("concave", self.concave),
            ("log_concave", self.log_concave),
            ("one_minus_log_convex", self.one_minus_log_convex),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name)
        .collect()
    }
}

pub fn shape_report(mu: &CompetenceFunction, k_max: u64) -> Result<ShapeReport> {
    if k_max < 3 {
        return Err(Error::InvalidArgument(format!("shape report needs K_max ≥ 3, got {k_max}")));
    }
    let v: Vec<f64> = (1..=k_max).map(|k| mu.evaluate(k)).collect::<Result<_>>()?;
    let triples = || v.windows(3).map(|w| (w[0], w[1], w[2]));
    Ok(ShapeReport {
        monotone_nondecreasing: v.windows(2).all(|w| w[0] <= w[1] + SHAPE_SLACK),
        concave: triples().all(|(x, y, z)| x + z <= 2.0 * y + SHAPE_SLACK),
        log_concave: triples().all(|(x, y, z)| x * z <= y * y + SHAPE_SLACK),
        one_minus_log_convex: triples()
            .all(|(x, y, z)| (1.0 - x) * (1.0 - z) >= (1.0 - y) * (1.0 - y) - SHAPE_SLACK),
    })
}

/// Checks `μ_max(K) ≤ 1 - 1/(2 max(f) K)` for each `K` in `ks`.
pub fn max_bound_audit<I>(density: &Density, ks: I) -> Result<Vec<AuditRecord>>
where
    I: IntoIterator<Item = u64>,
{
    let b = density.max_density();
    ks.into_iter()
        .map(|k| {
            if k == 0 {
                return Err(Error::InvalidArgument("group size K must be at least 1".into()));
            }
            let value = density.expected_max(k)?;
            let upper = 1.0 - 1.0 / (2.0 * b * k as f64);
            Ok(AuditRecord::check("max_bound", vec![format!("K={k}")], 0.0, value, upper))
        })
        .collect()
}
