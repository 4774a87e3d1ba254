//! Numerical audits of the binomial inequalities behind the group-size
//! bounds, plus closed-form evaluation of the bound constants.
//!
//! Audits return [`AuditRecord`]s instead of asserting. A record is
//! `satisfied` iff `lower ≤ value ≤ upper` with [`AUDIT_SLACK`] absolute slack
//! on each side.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_probability, Error, Result};
use crate::prob::{r_bracket, tails, TailMethod};
use crate::special::{ln_binomial_pmf, ln_choose};

pub const AUDIT_SLACK: f64 = 1e-12;

/// One checked inequality `lower ≤ value ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRecord {
    pub name: String,
    /// `key=value` pairs, in the order the parameters were given.
    pub params: Vec<String>,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub satisfied: bool,
    /// Whether a failure of this record counts against the audit (as opposed
    /// to being a reported finding).
    #[serde(skip)]
    pub asserted: bool,
}

impl AuditRecord {
    pub fn check(name: &str, params: Vec<String>, lower: f64, value: f64, upper: f64) -> Self {
        let satisfied = lower - AUDIT_SLACK <= value && value <= upper + AUDIT_SLACK;
        AuditRecord {
            name: name.to_string(),
            params,
            lower,
            value,
            upper,
            satisfied,
            asserted: false,
        }
    }

    pub fn params_joined(&self) -> String {
        self.params.join(";")
    }

    fn asserted(mut self, asserted: bool) -> Self {
        self.asserted = asserted;
        self
    }
}

fn param(key: &str, v: impl std::fmt::Display) -> String {
    format!("{key}={v}")
}

/// `C(L,k) p^k (1-p)^{L-k} ≤ P[Bin(L,p) ≤ k] ≤ p/(2p-1) · C(L,k) p^k (1-p)^{L-k}`
/// for `p > 1/2` and `k ≤ ⌈L/2⌉`.
pub fn lemma_tail_inequality(l: u64, k: u64, p: f64) -> Result<AuditRecord> {
    check_probability("p", p)?;
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    if p <= 0.5 {
        return Err(Error::Inapplicable(format!("tail inequality needs p > 1/2, got {p}")));
    }
    if k > l.div_ceil(2) {
        return Err(Error::Inapplicable(format!("tail inequality needs k ≤ ⌈L/2⌉, got k = {k}")));
    }
    let last = ln_binomial_pmf(k, l, p, 1.0 - p).exp();
    let value = tails(l, k + 1, p, TailMethod::Auto)?.lt();
    let upper = p / (2.0 * p - 1.0) * last;
    Ok(AuditRecord::check(
        "tail_inequality",
        vec![param("L", l), param("k", k), param("p", p)],
        last,
        value,
        upper,
    ))
}

/// `(3/4)·4^{L/2}/√(πL) ≤ C(L, ⌈(L-1)/2⌉) ≤ 2·4^{L/2}/√(πL)` for `L > 1`.
///
/// Values are reported directly while `C(L, ·)` fits in an `f64`; beyond that
/// the record is named `central_binomial_ln` and carries natural logs.
pub fn lemma_central_binomial(l: u64) -> Result<AuditRecord> {
    if l <= 1 {
        return Err(Error::Inapplicable(format!("central binomial bound needs L > 1, got {l}")));
    }
    let ln_value = ln_choose(l, l / 2);
    let ln_scale = l as f64 / 2.0 * 4f64.ln() - 0.5 * (PI * l as f64).ln();
    let ln_lower = 0.75f64.ln() + ln_scale;
    let ln_upper = 2f64.ln() + ln_scale;
    let params = vec![param("L", l)];
    if ln_upper < 700.0 {
        Ok(AuditRecord::check(
            "central_binomial",
            params,
            ln_lower.exp(),
            ln_value.exp(),
            ln_upper.exp(),
        ))
    } else {
        Ok(AuditRecord::check("central_binomial_ln", params, ln_lower, ln_value, ln_upper))
    }
}

/// The chain `lower ≤ R₋(L,p) ≤ R₊(L,p) ≤ upper` evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RBoundsAudit {
    pub l: u64,
    pub p: f64,
    pub lower: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub upper: f64,
}

impl RBoundsAudit {
    pub fn lower_holds(&self) -> bool {
        self.lower <= self.r_minus + AUDIT_SLACK
    }

    pub fn order_holds(&self) -> bool {
        self.r_minus <= self.r_plus + AUDIT_SLACK
    }

    pub fn upper_holds(&self) -> bool {
        self.r_plus <= self.upper + AUDIT_SLACK
    }

    pub fn all_hold(&self) -> bool {
        self.lower_holds() && self.order_holds() && self.upper_holds()
    }

    /// Two records covering the three inequalities: `r_bounds.minus` checks
    /// `lower ≤ R₋ ≤ R₊` and `r_bounds.plus` checks `R₋ ≤ R₊ ≤ upper`.
    pub fn records(&self) -> [AuditRecord; 2] {
        let params = vec![param("L", self.l), param("p", self.p)];
        [
            AuditRecord::check("r_bounds.minus", params.clone(), self.lower, self.r_minus, self.r_plus),
            AuditRecord::check("r_bounds.plus", params, self.r_minus, self.r_plus, self.upper),
        ]
    }
}

/// `1 - 2/(2p-1)·(4p(1-p))^{L/2}/√(πL) ≤ R₋(L,p) ≤ R₊(L,p) ≤ 1 - 3/(8p)·(4p(1-p))^{L/2}/√(πL)`.
pub fn lemma_r_bounds(l: u64, p: f64) -> Result<RBoundsAudit> {
    if !(p > 0.5 && p < 1.0) {
        return Err(Error::Inapplicable(format!("R bounds need 1/2 < p < 1, got {p}")));
    }
    if l < 2 {
        return Err(Error::Inapplicable(format!("R bounds need L ≥ 2, got {l}")));
    }
    let t = decay_term(l, p);
    let (r_minus, r_plus) = r_bracket(l, p)?;
    Ok(RBoundsAudit {
        l,
        p,
        lower: 1.0 - 2.0 / (2.0 * p - 1.0) * t,
        r_minus,
        r_plus,
        upper: 1.0 - 3.0 / (8.0 * p) * t,
    })
}

// (4p(1-p))^{L/2} / √(πL)
fn decay_term(l: u64, p: f64) -> f64 {
    let lf = l as f64;
    (lf / 2.0 * (4.0 * p * (1.0 - p)).ln() - 0.5 * (PI * lf).ln()).exp()
}

/// Parameters of the fixed-cost group-size bound: some `K_*` reaches
/// `μ(K_*) ≥ 1/2 + eps`, and `μ(K) ≤ 1 - A/K^alpha` everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremConstants {
    eps: f64,
    a: f64,
    alpha: f64,
    k_star: u64,
}

impl TheoremConstants {
    pub fn new(eps: f64, a: f64, alpha: f64, k_star: u64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::InvalidArgument(format!("eps must lie in (0, 1/2), got {eps}")));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidArgument(format!("A must lie in (0, 1], got {a}")));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be ≥ 0, got {alpha}")));
        }
        if k_star == 0 {
            return Err(Error::InvalidArgument("K_* must be positive".into()));
        }
        Ok(TheoremConstants { eps, a, alpha, k_star })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_star(&self) -> u64 {
        self.k_star
    }

    /// `ln(1 - 4 eps²)`, always negative.
    fn ln_contraction(&self) -> f64 {
        (-4.0 * self.eps * self.eps).ln_1p()
    }
}

/// The constant `c` with `K*_hom(n) ≤ c·K_*` under fixed voting cost:
///
/// `c = -4/ln(1-4ε²) · (ln(32/(9ε²A)) + α ln(4αK_*/e) - α ln|ln(1-4ε²)|)`.
pub fn theorem2_constant(tc: &TheoremConstants) -> f64 {
    let lc = tc.ln_contraction();
    let mut inner = (32.0 / (9.0 * tc.eps * tc.eps * tc.a)).ln();
    if tc.alpha > 0.0 {
        inner += tc.alpha * (4.0 * tc.alpha * tc.k_star as f64 / std::f64::consts::E).ln()
            - tc.alpha * lc.abs().ln();
    }
    -4.0 / lc * inner
}

/// Group-size bound `(c - 8 ln d / ln(1-4ε²))·K_*` for `d ≥ 2` issues.
pub fn theorem7_bound(tc: &TheoremConstants, d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("multi-issue bound needs d ≥ 2, got {d}")));
    }
    Ok(theorem7_bound_unchecked(tc, d))
}

// also defined at d = 1, where the ln d term vanishes
fn theorem7_bound_unchecked(tc: &TheoremConstants, d: u32) -> f64 {
    let issue_term = -8.0 * (d as f64).ln() / tc.ln_contraction();
    (theorem2_constant(tc) + issue_term) * tc.k_star as f64
}

/// Union-bound envelope for all-issue majorities when the smallest marginal
/// is `q`: returns `(lower, upper)` with
/// `lower = 1 - d·2/(2q-1)·(4q(1-q))^{L/2}/√(πL)` and
/// `upper = 1 - 3/(8q)·(4q(1-q))^{L/2}/√(πL)`.
pub fn lemma7_union_bound(l: u64, q: f64, d: u32) -> Result<(f64, f64)> {
    if !(q > 0.5 && q < 1.0) {
        return Err(Error::Inapplicable(format!("union bound needs 1/2 < q < 1, got {q}")));
    }
    if l == 0 || d == 0 {
        return Err(Error::InvalidArgument("L and d must be positive".into()));
    }
    let t = decay_term(l, q);
    Ok((1.0 - d as f64 * 2.0 / (2.0 * q - 1.0) * t, 1.0 - 3.0 / (8.0 * q) * t))
}

/// Parameter grids for a full audit run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditGrid {
    pub tail_l: (u64, u64),
    pub tail_p: Vec<f64>,
    pub central_l: (u64, u64),
    pub r_bounds_l: (u64, u64),
    pub r_bounds_p: Vec<f64>,
}

impl Default for AuditGrid {
    fn default() -> Self {
        AuditGrid {
            tail_l: (2, 50),
            tail_p: (0..=8).map(|i| (55 + 5 * i) as f64 / 100.0).collect(),
            central_l: (2, 2000),
            r_bounds_l: (2, 400),
            r_bounds_p: {
                let mut p: Vec<f64> = (0..=12).map(|i| (51 + 4 * i) as f64 / 100.0).collect();
                p.push(0.7);
                p.sort_by(f64::total_cmp);
                p
            },
        }
    }
}

/// Records of a grid audit in canonical order: tail inequality, central
/// binomial, R bounds; each family ordered lexicographically by parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub records: Vec<AuditRecord>,
}

impl AuditReport {
    /// Failing records that count against the audit.
    pub fn asserted_failures(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| r.asserted && !r.satisfied)
    }

    /// Failing records reported as findings only.
    pub fn reported_violations(&self) -> impl Iterator<Item = &AuditRecord> {
        self.records.iter().filter(|r| !r.asserted && !r.satisfied)
    }
}

/// Runs every audit on `grid`. Tail and central-binomial records are always
/// asserted; R-bound records are asserted for even `L` and reported for odd
/// `L`.
pub fn run_audit(grid: &AuditGrid) -> Result<AuditReport> {
    let tail_points: Vec<(u64, u64, f64)> = (grid.tail_l.0..=grid.tail_l.1)
        .flat_map(|l| (0..=l.div_ceil(2)).flat_map(move |k| grid.tail_p.iter().map(move |&p| (l, k, p))))
        .collect();
    let tail: Vec<AuditRecord> = tail_points
        .par_iter()
        .map(|&(l, k, p)| lemma_tail_inequality(l, k, p).map(|r| r.asserted(true)))
        .collect::<Result<_>>()?;

    let central: Vec<AuditRecord> = (grid.central_l.0..=grid.central_l.1)
        .into_par_iter()
        .map(|l| lemma_central_binomial(l).map(|r| r.asserted(true)))
        .collect::<Result<_>>()?;

    let r_points: Vec<(u64, f64)> = (grid.r_bounds_l.0..=grid.r_bounds_l.1)
        .flat_map(|l| grid.r_bounds_p.iter().map(move |&p| (l, p)))
        .collect();
    let r_bounds: Vec<AuditRecord> = r_points
        .par_iter()
        .map(|&(l, p)| {
            lemma_r_bounds(l, p)
                .map(|a| a.records().map(|r| r.asserted(l % 2 == 0)).to_vec())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let mut records = tail;
    records.extend(central);
    records.extend(r_bounds);
    Ok(AuditReport { records })
}
