//! Partitions of `n` voters into groups, their majority success probability
//! and social welfare, and searches for the best group size.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::audit::TheoremConstants;
use crate::competence::{minimal_consistent_k, shape_report, CompetenceFunction};
use crate::error::{Error, Result};
use crate::prob::{
    majority_binomial, majority_profile, majority_threshold, tails, Majority, SuccessProfile,
    TailMethod, DP_MAX_TRIALS,
};
use crate::special::{ln_binomial_pmf, log_add_exp, log_sum_exp};

/// Largest partition size accepted by the brute-force oracle.
pub const BRUTE_FORCE_MAX_N: u64 = 16;

// Two-size partitions are convolved exactly up to this many groups.
const CONVOLUTION_MAX_GROUPS: u64 = 10_000_000;
const TRACE_SLACK: f64 = 1e-12;

/// Group sizes `K_1, …, K_L`, all positive, stored as runs of equal sizes
/// so that partitions into millions of groups stay small.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    // (size, count), adjacent runs have different sizes
    runs: Vec<(u64, u64)>,
    n: u64,
    len: u64,
}

impl Partition {
    pub fn new(sizes: Vec<u64>) -> Result<Self> {
        Self::from_runs(sizes.into_iter().map(|s| (s, 1)))
    }

    fn from_runs(runs: impl IntoIterator<Item = (u64, u64)>) -> Result<Self> {
        let mut merged: Vec<(u64, u64)> = Vec::new();
        for (size, count) in runs.into_iter().filter(|&(_, c)| c > 0) {
            if size == 0 {
                return Err(Error::InvalidArgument("group sizes must be positive".into()));
            }
            match merged.last_mut() {
                Some((s, c)) if *s == size => *c += count,
                _ => merged.push((size, count)),
            }
        }
        if merged.is_empty() {
            return Err(Error::InvalidArgument("a partition needs at least one group".into()));
        }
        let n = merged.iter().map(|&(s, c)| s * c).sum();
        let len = merged.iter().map(|&(_, c)| c).sum();
        Ok(Partition { runs: merged, n, len })
    }

    /// `H_K`: `⌊n/K⌋` groups, the last absorbing the remainder.
    pub fn homogeneous(n: u64, k: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!("group size K = {k} outside [1, {n}]")));
        }
        Self::with_group_count(n, n / k)
    }

    /// `l` groups of size `⌊n/l⌋` except the last, which takes the remainder.
    pub fn with_group_count(n: u64, l: u64) -> Result<Self> {
        if l == 0 || l > n {
            return Err(Error::InvalidArgument(format!("group count L = {l} outside [1, {n}]")));
        }
        let k = n / l;
        Self::from_runs([(k, l - 1), (n - (l - 1) * k, 1)])
    }

    /// Group sizes in order; allocates one entry per group.
    pub fn sizes(&self) -> Vec<u64> {
        self.runs
            .iter()
            .flat_map(|&(s, c)| std::iter::repeat_n(s, c as usize))
            .collect()
    }

    /// Runs of equal consecutive sizes as `(size, count)`.
    pub fn runs(&self) -> &[(u64, u64)] {
        &self.runs
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of groups `L`.
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `max - min` of the group sizes.
    pub fn spread(&self) -> u64 {
        let max = self.runs.iter().map(|r| r.0).max().unwrap_or(0);
        let min = self.runs.iter().map(|r| r.0).min().unwrap_or(0);
        max - min
    }

    /// Sizes in ascending order.
    pub fn sorted(&self) -> Vec<u64> {
        let mut s = self.sizes();
        s.sort_unstable();
        s
    }

    fn size_counts(&self) -> BTreeMap<u64, u64> {
        let mut counts = BTreeMap::new();
        for &(s, c) in &self.runs {
            *counts.entry(s).or_insert(0) += c;
        }
        counts
    }
}

/// Normalized voting cost `Cost(L)/Ben(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    Fixed { c0: f64 },
    Polynomial { q1: f64, q2: f64 },
}

impl CostModel {
    pub fn fixed(c0: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::InvalidArgument(format!("fixed cost must be finite and ≥ 0, got {c0}")));
        }
        Ok(CostModel::Fixed { c0 })
    }

    pub fn polynomial(q1: f64, q2: f64) -> Result<Self> {
        if !(q1 > 0.0 && q1.is_finite() && q2 > 0.0 && q2.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "polynomial cost needs q1, q2 > 0, got q1 = {q1}, q2 = {q2}"
            )));
        }
        Ok(CostModel::Polynomial { q1, q2 })
    }

    /// Cost of `l` representatives relative to the benefit for `n` voters.
    pub fn ratio(&self, l: u64, n: u64) -> f64 {
        match *self {
            CostModel::Fixed { c0 } => c0,
            CostModel::Polynomial { q1, q2 } => (q1 * (l as f64).ln() - q2 * (n as f64).ln()).exp(),
        }
    }
}

/// Majority success of the representatives of `partition`, with log failure.
pub fn success_detail(partition: &Partition, mu: &CompetenceFunction) -> Result<Majority> {
    let counts = partition.size_counts();
    let l = partition.len() as u64;
    let comp: Vec<(u64, f64, u64)> = counts
        .iter()
        .map(|(&k, &c)| Ok((k, mu.evaluate(k)?, c)))
        .collect::<Result<_>>()?;
    match comp.as_slice() {
        [(_, p, _)] => majority_binomial(l, *p),
        [(_, p1, c1), (_, p2, c2)] => {
            if *c2 == 1 {
                condition_on_one(l, *p1, *p2)
            } else if *c1 == 1 {
                condition_on_one(l, *p2, *p1)
            } else {
                convolve_two(*p1, *c1, *p2, *c2)
            }
        }
        _ => {
            if partition.len() > DP_MAX_TRIALS {
                return Err(Error::GuardExceeded(format!(
                    "{} groups with {} distinct sizes exceed the exact limit of {DP_MAX_TRIALS}",
                    partition.len(),
                    comp.len()
                )));
            }
            let by_size: BTreeMap<u64, f64> = comp.iter().map(|&(k, p, _)| (k, p)).collect();
            let probs = partition.sizes().iter().map(|k| by_size[k]).collect();
            majority_profile(&SuccessProfile::new(probs)?)
        }
    }
}

/// `P[representatives reach a strict majority]`.
pub fn success_probability(partition: &Partition, mu: &CompetenceFunction) -> Result<f64> {
    Ok(success_detail(partition, mu)?.success)
}

// l - 1 representatives with competence p and one with competence p_one.
fn condition_on_one(l: u64, p: f64, p_one: f64) -> Result<Majority> {
    let m = majority_threshold(l);
    let rest = l - 1;
    let if_right = tails(rest, m - 1, p, TailMethod::Auto)?;
    let if_wrong = tails(rest, m, p, TailMethod::Auto)?;
    let success = p_one * if_right.ge() + (1.0 - p_one) * if_wrong.ge();
    let ln_failure = log_add_exp(
        p_one.ln() + if_right.ln_lt,
        (1.0 - p_one).ln() + if_wrong.ln_lt,
    );
    Ok(Majority { success: success.clamp(0.0, 1.0), ln_failure })
}

// Bin(c1, p1) + Bin(c2, p2), conditioning on the first summand.
fn convolve_two(p1: f64, c1: u64, p2: f64, c2: u64) -> Result<Majority> {
    let l = c1 + c2;
    if l > CONVOLUTION_MAX_GROUPS {
        return Err(Error::GuardExceeded(format!(
            "two-size partition with {l} groups exceeds {CONVOLUTION_MAX_GROUPS}"
        )));
    }
    let m = majority_threshold(l);
    let ln_pmf2: Vec<f64> = (0..=c2).map(|j| ln_binomial_pmf(j, c2, p2, 1.0 - p2)).collect();
    // ln_ge2[t] = ln P[Bin(c2) ≥ t], ln_lt2[t] = ln P[Bin(c2) < t]
    let mut ln_ge2 = vec![f64::NEG_INFINITY; c2 as usize + 2];
    for t in (0..=c2 as usize).rev() {
        ln_ge2[t] = log_add_exp(ln_ge2[t + 1], ln_pmf2[t]);
    }
    let mut ln_lt2 = vec![f64::NEG_INFINITY; c2 as usize + 2];
    for t in 1..=c2 as usize + 1 {
        ln_lt2[t] = log_add_exp(ln_lt2[t - 1], ln_pmf2[t - 1]);
    }
    let ge2 = |t: i64| match usize::try_from(t) {
        Err(_) => 0.0,
        Ok(t) => ln_ge2.get(t).copied().unwrap_or(f64::NEG_INFINITY),
    };
    let lt2 = |t: i64| match usize::try_from(t) {
        Err(_) => f64::NEG_INFINITY,
        Ok(t) => ln_lt2.get(t).copied().unwrap_or(0.0),
    };
    let terms = (0..=c1).map(|j| {
        let lp = ln_binomial_pmf(j, c1, p1, 1.0 - p1);
        let need = m as i64 - j as i64;
        (lp + ge2(need), lp + lt2(need))
    });
    let (ge, lt): (Vec<f64>, Vec<f64>) = terms.unzip();
    let ln_success = log_sum_exp(ge);
    let ln_failure = log_sum_exp(lt);
    let success = if ln_success > ln_failure {
        -ln_failure.exp_m1()
    } else {
        ln_success.exp()
    };
    Ok(Majority { success, ln_failure })
}

/// Normalized social welfare `R_n - Cost(L)/Ben(n)`.
pub fn welfare(partition: &Partition, mu: &CompetenceFunction, cost: &CostModel) -> Result<f64> {
    let s = success_probability(partition, mu)?;
    Ok(s - cost.ratio(partition.len() as u64, partition.n()))
}

/// One evaluated configuration of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: u64,
    pub l: u64,
    pub success: f64,
    pub ln_failure: f64,
    pub cost: f64,
    pub welfare: f64,
}

impl SweepRow {
    fn evaluate(partition: &Partition, k: u64, mu: &CompetenceFunction, cost: &CostModel) -> Result<Self> {
        let maj = success_detail(partition, mu)?;
        let l = partition.len() as u64;
        let c = cost.ratio(l, partition.n());
        Ok(SweepRow {
            k,
            l,
            success: maj.success,
            ln_failure: maj.ln_failure,
            cost: c,
            welfare: maj.success - c,
        })
    }

    /// `failure + cost`, i.e. `1 - welfare` without the rounding of
    /// `success` near 1.
    pub fn loss(&self) -> f64 {
        self.ln_failure.exp() + self.cost
    }

    // Rows with equal loss and equal cost are separated by their failure
    // probability, which stays resolvable after it underflows.
    fn better_than(&self, other: &SweepRow) -> bool {
        match self.loss().total_cmp(&other.loss()) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.cost == other.cost && self.ln_failure < other.ln_failure,
        }
    }
}

/// Rows of a sweep together with the index of the optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub best: usize,
}

impl Sweep {
    pub fn best_row(&self) -> &SweepRow {
        &self.rows[self.best]
    }

    fn from_rows(rows: Vec<SweepRow>) -> Self {
        // first strictly better row wins, so ties go to the earliest row
        let best = rows
            .iter()
            .enumerate()
            .fold(0, |best, (i, r)| if r.better_than(&rows[best]) { i } else { best });
        Sweep { rows, best }
    }
}

/// Welfare of `H_K` for every `K` in `k_range`; rows in ascending `K`.
pub fn sweep_homogeneous(
    n: u64,
    mu: &CompetenceFunction,
    cost: &CostModel,
    k_range: RangeInclusive<u64>,
) -> Result<Sweep> {
    if k_range.is_empty() {
        return Err(Error::InvalidArgument("empty K range".into()));
    }
    if *k_range.start() == 0 || *k_range.end() > n {
        return Err(Error::InvalidArgument(format!(
            "K range {}..={} outside [1, {n}]",
            k_range.start(),
            k_range.end()
        )));
    }
    let ks: Vec<u64> = k_range.collect();
    let rows = ks
        .par_iter()
        .map(|&k| SweepRow::evaluate(&Partition::homogeneous(n, k)?, k, mu, cost))
        .collect::<Result<Vec<_>>>()?;
    Ok(Sweep::from_rows(rows))
}

/// Objective `success - L^{q1}/n^{q2}` over the group counts in `l_range`,
/// each with `L` groups of size `⌊n/L⌋` (the last absorbing the remainder).
///
/// Since the cost grows with `L`, the scan stops at the first `L` whose cost
/// alone exceeds the best loss so far; rows cover the evaluated prefix.
pub fn optimal_l_polynomial(
    n: u64,
    mu: &CompetenceFunction,
    q1: f64,
    q2: f64,
    l_range: RangeInclusive<u64>,
) -> Result<Sweep> {
    let cost = CostModel::polynomial(q1, q2)?;
    if l_range.is_empty() {
        return Err(Error::InvalidArgument("empty L range".into()));
    }
    if *l_range.start() == 0 || *l_range.end() > n {
        return Err(Error::InvalidArgument(format!(
            "L range {}..={} outside [1, {n}]",
            l_range.start(),
            l_range.end()
        )));
    }
    const CHUNK: u64 = 64;
    let (start, end) = (*l_range.start(), *l_range.end());
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut best: Option<SweepRow> = None;
    let mut lo = start;
    'scan: while lo <= end {
        let hi = end.min(lo + CHUNK - 1);
        let chunk = (lo..=hi)
            .into_par_iter()
            .map(|l| {
                let p = Partition::with_group_count(n, l)?;
                SweepRow::evaluate(&p, n / l, mu, &cost)
            })
            .collect::<Result<Vec<_>>>()?;
        for row in chunk {
            if let Some(b) = &best {
                if row.cost > b.loss() {
                    break 'scan;
                }
            }
            if best.as_ref().is_none_or(|b| row.better_than(b)) {
                best = Some(row);
            }
            rows.push(row);
        }
        lo = hi + 1;
    }
    Ok(Sweep::from_rows(rows))
}

/// Result of [`near_homogeneous_merge`].
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub partition: Partition,
    /// Success probability before the first move and after each move.
    pub trace: Vec<f64>,
}

/// Moves one voter from a largest to a smallest group until all sizes are
/// within one of each other, recording the success probability after each
/// move. Requires `μ` monotone, log-concave and with `1 - μ` log-convex.
pub fn near_homogeneous_merge(partition: &Partition, mu: &CompetenceFunction) -> Result<MergeOutcome> {
    let max = partition.runs.iter().map(|r| r.0).max().unwrap_or(1);
    let shape = shape_report(mu, (max + 1).max(3))?;
    let failing: Vec<_> = shape
        .failing()
        .into_iter()
        .filter(|f| *f != "concave")
        .collect();
    if !failing.is_empty() {
        return Err(Error::PreconditionUnmet(format!(
            "competence function fails: {}",
            failing.join(", ")
        )));
    }
    let mut sizes = partition.sizes();
    let mut trace = vec![success_probability(partition, mu)?];
    loop {
        let (lo_i, lo) = sizes
            .iter()
            .copied()
            .enumerate()
            .min_by_key(|&(i, s)| (s, i))
            .expect("partition is non-empty");
        let (hi_i, hi) = sizes
            .iter()
            .copied()
            .enumerate()
            .max_by_key(|&(i, s)| (s, i))
            .expect("partition is non-empty");
        if hi - lo < 2 {
            break;
        }
        sizes[lo_i] += 1;
        sizes[hi_i] -= 1;
        let s = success_probability(&Partition::new(sizes.clone())?, mu)?;
        let prev = *trace.last().expect("trace starts non-empty");
        if s < prev - TRACE_SLACK {
            return Err(Error::InvariantViolated(format!(
                "merge step to {sizes:?} lowered success from {prev} to {s}"
            )));
        }
        trace.push(s);
    }
    Ok(MergeOutcome { partition: Partition::new(sizes)?, trace })
}

/// All partitions of `n` as ascending part lists, in lexicographic order.
pub fn integer_partitions(n: u64) -> Vec<Vec<u64>> {
    fn rec(remaining: u64, min_part: u64, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if remaining == 0 {
            out.push(current.clone());
            return;
        }
        for part in min_part..=remaining {
            if part != remaining && remaining - part < part {
                continue;
            }
            current.push(part);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, 1, &mut Vec::new(), &mut out);
    }
    out
}

fn exact_sorted_success(sizes: &[u64], mu: &CompetenceFunction) -> Result<f64> {
    let probs = sizes.iter().map(|&k| mu.evaluate(k)).collect::<Result<Vec<_>>>()?;
    Ok(majority_profile(&SuccessProfile::new(probs)?)?.success)
}

fn check_brute_force_n(n: u64) -> Result<()> {
    if n == 0 || n > BRUTE_FORCE_MAX_N {
        return Err(Error::GuardExceeded(format!(
            "brute force limited to 1 ≤ n ≤ {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    Ok(())
}

/// The partition of `n` with the highest success probability; ties go to
/// the lexicographically smallest ascending size vector.
pub fn brute_force_best_partition(n: u64, mu: &CompetenceFunction) -> Result<(Partition, f64)> {
    check_brute_force_n(n)?;
    let mut best: Option<(Vec<u64>, f64)> = None;
    for sizes in integer_partitions(n) {
        let s = exact_sorted_success(&sizes, mu)?;
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((sizes, s));
        }
    }
    let (sizes, s) = best.expect("n ≥ 1 has a partition");
    Ok((Partition::new(sizes)?, s))
}

/// For each group count `L = 1..=n`, the best partition of `n` into exactly
/// `L` groups (same tie rule as [`brute_force_best_partition`]).
pub fn brute_force_best_per_group_count(n: u64, mu: &CompetenceFunction) -> Result<Vec<(Partition, f64)>> {
    check_brute_force_n(n)?;
    let mut best: Vec<Option<(Vec<u64>, f64)>> = vec![None; n as usize + 1];
    for sizes in integer_partitions(n) {
        let s = exact_sorted_success(&sizes, mu)?;
        let slot = &mut best[sizes.len()];
        if slot.as_ref().is_none_or(|(_, b)| s > *b) {
            *slot = Some((sizes, s));
        }
    }
    best.into_iter()
        .flatten()
        .map(|(sizes, s)| Ok((Partition::new(sizes)?, s)))
        .collect()
}

/// Bound `c·K_*` on the optimal homogeneous group size under fixed cost,
/// for max processes, using `ε = μ(K_*) - 1/2`, `A = min(1, 1/(2 max f))`
/// and `α = 1`. `None` when `μ` is not a max process or never exceeds 1/2
/// within `k_search`.
pub fn fixed_cost_size_bound(mu: &CompetenceFunction, k_search: u64) -> Result<Option<(TheoremConstants, f64)>> {
    let density = match mu {
        CompetenceFunction::MaxUniform(_) | CompetenceFunction::MaxGeneral(_) => mu.density(),
        _ => None,
    };
    let Some(density) = density else {
        return Ok(None);
    };
    let Some(k_star) = minimal_consistent_k(mu, k_search)? else {
        return Ok(None);
    };
    let eps = mu.evaluate(k_star)? - 0.5;
    if eps >= 0.5 {
        return Ok(None);
    }
    let a = (1.0 / (2.0 * density.max_density())).min(1.0);
    let tc = TheoremConstants::new(eps, a, 1.0, k_star)?;
    let c = crate::audit::theorem2_constant(&tc);
    Ok(Some((tc, c * k_star as f64)))
}
