//! Voting on `d` binary issues at once.
//!
//! A [`CompetenceVector`] is a distribution over the `2^d` vote
//! combinations. Outcomes are indexed so that issue 0 is the most
//! significant bit: for `d = 2` the order is `(0,0), (0,1), (1,0), (1,1)`
//! with the first coordinate belonging to issue 0, and a set bit means a
//! correct vote.

use rand::Rng;
use serde::Serialize;

use crate::competence::Density;
use crate::error::{check_probability, Error, Result};
use crate::mc::{run_blocks, Estimate};
use crate::prob::{majority_prob_binomial, majority_threshold};

/// Largest issue count accepted by [`CompetenceVector`].
pub const MAX_ISSUES: usize = 16;
/// Largest issue count for [`multi_majority_exact`].
pub const EXACT_MAX_ISSUES: usize = 3;
/// Largest representative count for [`multi_majority_exact`].
pub const EXACT_MAX_REPRESENTATIVES: u64 = 64;

const MASS_TOL: f64 = 1e-12;
const SCORE_TOL: f64 = 1e-12;

/// Whether outcome `b` is a correct vote on issue `i` of `d`.
pub fn is_correct(b: usize, i: usize, d: usize) -> bool {
    (b >> (d - 1 - i)) & 1 == 1
}

/// A distribution over the `2^d` vote combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetenceVector {
    d: usize,
    mass: Vec<f64>,
}

impl CompetenceVector {
    pub fn new(d: usize, mass: Vec<f64>) -> Result<Self> {
        if d == 0 || d > MAX_ISSUES {
            return Err(Error::InvalidArgument(format!("issue count d = {d} outside [1, {MAX_ISSUES}]")));
        }
        if mass.len() != 1 << d {
            return Err(Error::InvalidArgument(format!(
                "{d} issues need {} outcome masses, got {}",
                1usize << d,
                mass.len()
            )));
        }
        for &m in &mass {
            check_probability("outcome mass", m)?;
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!("outcome masses sum to {total}, not 1")));
        }
        Ok(CompetenceVector { d, mass })
    }

    /// Infers `d` from the number of masses.
    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        let len = mass.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "outcome mass count must be a power of two ≥ 2, got {len}"
            )));
        }
        Self::new(len.trailing_zeros() as usize, mass)
    }

    /// Independent issues with the given per-issue competences.
    pub fn product(marginals: &[f64]) -> Result<Self> {
        for &p in marginals {
            check_probability("marginal", p)?;
        }
        let d = marginals.len();
        let mass = (0..1usize << d.min(MAX_ISSUES))
            .map(|b| {
                marginals
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| if is_correct(b, i, d) { p } else { 1.0 - p })
                    .product()
            })
            .collect();
        Self::new(d, mass)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// `μ_i`: probability of a correct vote on issue `i`.
    pub fn marginal(&self, i: usize) -> Result<f64> {
        if i >= self.d {
            return Err(Error::InvalidArgument(format!("issue {i} outside [0, {})", self.d)));
        }
        Ok(self
            .mass
            .iter()
            .enumerate()
            .filter(|(b, _)| is_correct(*b, i, self.d))
            .map(|(_, m)| m)
            .sum())
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.marginal(i).expect("index in range")).collect()
    }

    /// Expected number of correct votes.
    pub fn score(&self) -> f64 {
        self.marginals().iter().sum()
    }

    /// Marginals, if the vector equals the product of its marginals within
    /// `1e-12` per outcome.
    pub fn factorization(&self) -> Option<Vec<f64>> {
        let marginals = self.marginals();
        let rebuilt = Self::product(&marginals).ok()?;
        let fits = rebuilt
            .mass
            .iter()
            .zip(&self.mass)
            .all(|(a, b)| (a - b).abs() <= MASS_TOL);
        fits.then_some(marginals)
    }

    fn mixture(d: usize, parts: impl IntoIterator<Item = (f64, Self)>) -> Result<Self> {
        let mut mass = vec![0.0; 1 << d];
        for (w, v) in parts {
            for (acc, m) in mass.iter_mut().zip(&v.mass) {
                *acc += w * m;
            }
        }
        // absorb summation roundoff
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        Self::new(d, mass)
    }
}

/// A finite population of voter types.
#[derive(Debug, Clone, PartialEq)]
pub struct VoterTypeDistribution {
    types: Vec<(f64, CompetenceVector)>,
}

impl VoterTypeDistribution {
    pub fn new(types: Vec<(f64, CompetenceVector)>) -> Result<Self> {
        let Some((_, first)) = types.first() else {
            return Err(Error::InvalidArgument("need at least one voter type".into()));
        };
        let d = first.d;
        if types.iter().any(|(_, v)| v.d != d) {
            return Err(Error::InvalidArgument("voter types disagree on the issue count".into()));
        }
        for (w, _) in &types {
            check_probability("type weight", *w)?;
        }
        let total: f64 = types.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!("type weights sum to {total}, not 1")));
        }
        Ok(VoterTypeDistribution { types })
    }

    pub fn d(&self) -> usize {
        self.types[0].1.d
    }

    pub fn types(&self) -> &[(f64, CompetenceVector)] {
        &self.types
    }

    /// Weighted average of the type vectors.
    pub fn mean(&self) -> Result<CompetenceVector> {
        CompetenceVector::mixture(self.d(), self.types.iter().cloned())
    }
}

/// `ρ(K)` under the max-sum process: each of `K` i.i.d. voters is scored by
/// its expected number of correct votes and a uniformly random top scorer
/// represents the group.
pub fn max_sum_rho(f: &VoterTypeDistribution, k: u64) -> Result<CompetenceVector> {
    if k == 0 {
        return Err(Error::InvalidArgument("group size K must be at least 1".into()));
    }
    let mut order: Vec<(f64, usize)> = f.types.iter().enumerate().map(|(t, (_, v))| (v.score(), t)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    // groups of indistinguishable scores, best first; weights accumulate from the worst
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut anchor = f64::NAN;
    for (s, t) in order {
        if groups.is_empty() || (anchor - s).abs() > SCORE_TOL {
            groups.push(Vec::new());
            anchor = s;
        }
        groups.last_mut().expect("just pushed").push(t);
    }
    let kf = k as f64;
    let mut below = 0.0;
    let mut parts = Vec::with_capacity(f.types.len());
    for g in groups.iter().rev() {
        let w_g: f64 = g.iter().map(|&t| f.types[t].0).sum();
        let at_most = below + w_g;
        // P[best score present is this group's]
        let top = at_most.powf(kf) - f64::powf(below, kf);
        if w_g > 0.0 {
            for &t in g {
                let (w, v) = &f.types[t];
                parts.push((w / w_g * top, v.clone()));
            }
        }
        below = at_most;
    }
    CompetenceVector::mixture(f.d(), parts)
}

/// `P[all d issue tallies exceed L/2]` for `L` i.i.d. representatives voting
/// by `rho`, by dynamic programming over per-issue tallies capped at the
/// majority threshold.
pub fn multi_majority_exact(l: u64, rho: &CompetenceVector) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let d = rho.d;
    if d > EXACT_MAX_ISSUES || l > EXACT_MAX_REPRESENTATIVES {
        return Err(Error::GuardExceeded(format!(
            "exact joint majority limited to d ≤ {EXACT_MAX_ISSUES}, L ≤ {EXACT_MAX_REPRESENTATIVES} \
             (got d = {d}, L = {l}); use multi_majority_mc"
        )));
    }
    let m = majority_threshold(l) as usize;
    let radix = m + 1;
    let states = radix.pow(d as u32);
    let digit = |s: usize, i: usize| (s / radix.pow(i as u32)) % radix;
    // transition: outcome b moves state s to step[b][s]
    let step: Vec<Vec<usize>> = (0..1usize << d)
        .map(|b| {
            (0..states)
                .map(|s| {
                    (0..d).fold(s, |acc, i| {
                        if is_correct(b, i, d) && digit(s, i) < m {
                            acc + radix.pow(i as u32)
                        } else {
                            acc
                        }
                    })
                })
                .collect()
        })
        .collect();
    let mut dist = vec![0.0; states];
    dist[0] = 1.0;
    for _ in 0..l {
        let mut next = vec![0.0; states];
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (b, &mass) in rho.mass.iter().enumerate() {
                if mass > 0.0 {
                    next[step[b][s]] += p * mass;
                }
            }
        }
        dist = next;
    }
    Ok(dist[states - 1])
}

/// Joint majority for independent issues: `Π_i P[Bin(L, μ_i) > L/2]`.
pub fn multi_majority_product(l: u64, marginals: &[f64]) -> Result<f64> {
    marginals.iter().map(|&p| majority_prob_binomial(l, p)).product()
}

// inverse-CDF draw from a categorical with cumulative weights `cum`
fn draw_outcome<R: Rng>(rng: &mut R, cum: &[f64]) -> usize {
    let u: f64 = rng.random();
    cum.partition_point(|&c| c <= u).min(cum.len() - 1)
}

/// Monte Carlo estimate of the joint majority probability.
pub fn multi_majority_mc(l: u64, rho: &CompetenceVector, samples: u64, seed: u64) -> Result<Estimate> {
    if l == 0 || samples == 0 {
        return Err(Error::InvalidArgument("L and the sample count must be positive".into()));
    }
    let d = rho.d;
    let m = majority_threshold(l);
    let cum: Vec<f64> = rho
        .mass
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let hits: u64 = run_blocks(samples, seed, |rng, count| {
        let mut tally = vec![0u64; d];
        (0..count)
            .filter(|_| {
                tally.iter_mut().for_each(|t| *t = 0);
                for _ in 0..l {
                    let b = draw_outcome(rng, &cum);
                    for (i, t) in tally.iter_mut().enumerate() {
                        *t += u64::from(is_correct(b, i, d));
                    }
                }
                tally.iter().all(|&t| t >= m)
            })
            .count() as u64
    })
    .into_iter()
    .sum();
    Ok(Estimate::proportion(hits, samples))
}

/// Per-issue competence densities of voters whose issues are independent.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentIssueDistribution {
    densities: Vec<Density>,
}

impl IndependentIssueDistribution {
    pub fn new(densities: Vec<Density>) -> Result<Self> {
        if densities.is_empty() || densities.len() > MAX_ISSUES {
            return Err(Error::InvalidArgument(format!(
                "need between 1 and {MAX_ISSUES} issue densities, got {}",
                densities.len()
            )));
        }
        for (i, f) in densities.iter().enumerate() {
            let (lo, _) = f.support();
            if lo < 0.5 {
                return Err(Error::InvalidArgument(format!(
                    "issue {i} density has mass below 1/2 (support starts at {lo})"
                )));
            }
        }
        Ok(IndependentIssueDistribution { densities })
    }

    pub fn d(&self) -> usize {
        self.densities.len()
    }

    pub fn densities(&self) -> &[Density] {
        &self.densities
    }
}

/// Simulated max-sum representative for independent issues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxSumEstimate {
    /// `μ_i(K)` per issue.
    pub marginals: Vec<Estimate>,
    /// Estimated `ρ(K)` in outcome order.
    pub rho: Vec<f64>,
}

#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    rho: Vec<f64>,
}

/// Samples groups of `K` voters with independent per-issue competences,
/// elects the voter with the largest competence sum (uniform among ties)
/// and averages the representative's competences.
pub fn simulate_max_sum_independent(
    f: &IndependentIssueDistribution,
    k: u64,
    samples: u64,
    seed: u64,
) -> Result<MaxSumEstimate> {
    if k == 0 || samples == 0 {
        return Err(Error::InvalidArgument("K and the sample count must be positive".into()));
    }
    let d = f.d();
    let outcomes = 1usize << d;
    let blocks = run_blocks(samples, seed, |rng, count| {
        let mut acc = Moments { sum: vec![0.0; d], sum_sq: vec![0.0; d], rho: vec![0.0; outcomes] };
        let mut voter = vec![0.0; d];
        let mut chosen = vec![0.0; d];
        for _ in 0..count {
            let mut best = f64::NEG_INFINITY;
            let mut ties = 0u64;
            for _ in 0..k {
                for (p, dens) in voter.iter_mut().zip(&f.densities) {
                    *p = dens.quantile(rng.random());
                }
                let score: f64 = voter.iter().sum();
                if score > best {
                    best = score;
                    ties = 1;
                    chosen.copy_from_slice(&voter);
                } else if score == best {
                    ties += 1;
                    if rng.random_range(0..ties) == 0 {
                        chosen.copy_from_slice(&voter);
                    }
                }
            }
            for ((s, s2), &c) in acc.sum.iter_mut().zip(acc.sum_sq.iter_mut()).zip(&chosen) {
                *s += c;
                *s2 += c * c;
            }
            for (b, r) in acc.rho.iter_mut().enumerate() {
                *r += (0..d)
                    .map(|i| if is_correct(b, i, d) { chosen[i] } else { 1.0 - chosen[i] })
                    .product::<f64>();
            }
        }
        acc
    });
    let total = blocks.into_iter().fold(
        Moments { sum: vec![0.0; d], sum_sq: vec![0.0; d], rho: vec![0.0; outcomes] },
        |mut t, b| {
            t.sum.iter_mut().zip(&b.sum).for_each(|(x, y)| *x += y);
            t.sum_sq.iter_mut().zip(&b.sum_sq).for_each(|(x, y)| *x += y);
            t.rho.iter_mut().zip(&b.rho).for_each(|(x, y)| *x += y);
            t
        },
    );
    let marginals = (0..d)
        .map(|i| Estimate::from_moments(total.sum[i], total.sum_sq[i], samples))
        .collect();
    let rho = total.rho.iter().map(|r| r / samples as f64).collect();
    Ok(MaxSumEstimate { marginals, rho })
}

/// Per-issue consistency of a table `ρ(1), …, ρ(K_max)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyVerdict {
    /// Smallest `K` with `μ_i(K) > 1/2`, per issue.
    pub first_k: Vec<Option<u64>>,
    pub consistent: bool,
}

pub fn multi_consistency_check(table: &[CompetenceVector]) -> Result<ConsistencyVerdict> {
    let Some(first) = table.first() else {
        return Err(Error::InvalidArgument("consistency check needs a non-empty table".into()));
    };
    let d = first.d;
    if table.iter().any(|v| v.d != d) {
        return Err(Error::InvalidArgument("table entries disagree on the issue count".into()));
    }
    let first_k: Vec<Option<u64>> = (0..d)
        .map(|i| {
            table
                .iter()
                .position(|v| v.marginal(i).expect("index in range") > 0.5)
                .map(|k| k as u64 + 1)
        })
        .collect();
    let consistent = first_k.iter().all(Option::is_some);
    Ok(ConsistencyVerdict { first_k, consistent })
}
