//! Majority-vote probabilities: binomial tails, exact Poisson-binomial
//! distributions and the `R₋ / R₊` bracketing tails.
//!
//! Ties always count as failure: `L` representatives succeed only when
//! strictly more than `L/2` of them vote correctly.

use crate::error::{check_probability, Error, Result};
use crate::special::{
    incomplete_beta_cf, ln_binomial_pmf, ln_one_minus_exp, log_sum_exp,
};

/// Largest trial count evaluated by direct log-space summation under
/// [`TailMethod::Auto`].
pub const SUMMATION_MAX_TRIALS: u64 = 10_000;

/// Largest profile handled by the exact Poisson-binomial recursion.
pub const DP_MAX_TRIALS: usize = 20_000;

/// Evaluation route for binomial tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    /// Summation up to [`SUMMATION_MAX_TRIALS`], incomplete beta above.
    Auto,
    Summation,
    IncompleteBeta,
}

/// Both tails of `Bin(n, p)` split at `k`, kept in log space so that either
/// side stays meaningful when the other rounds to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPair {
    /// `ln P[X ≥ k]`
    pub ln_ge: f64,
    /// `ln P[X < k]`
    pub ln_lt: f64,
}

impl TailPair {
    fn certain_ge() -> Self {
        TailPair { ln_ge: 0.0, ln_lt: f64::NEG_INFINITY }
    }

    fn certain_lt() -> Self {
        TailPair { ln_ge: f64::NEG_INFINITY, ln_lt: 0.0 }
    }

    /// `P[X ≥ k]`
    pub fn ge(&self) -> f64 {
        if self.ln_ge > self.ln_lt {
            -self.ln_lt.exp_m1()
        } else {
            self.ln_ge.exp()
        }
    }

    /// `P[X < k]`
    pub fn lt(&self) -> f64 {
        if self.ln_lt > self.ln_ge {
            -self.ln_ge.exp_m1()
        } else {
            self.ln_lt.exp()
        }
    }
}

/// Success probability of a majority vote together with the log of its
/// complement, which keeps ordering information after `success` rounds to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Majority {
    pub success: f64,
    pub ln_failure: f64,
}

impl Majority {
    fn from_tails(t: TailPair) -> Self {
        Majority { success: t.ge(), ln_failure: t.ln_lt }
    }
}

/// Strict-majority threshold for `l` voters: `⌊l/2⌋ + 1`.
pub fn majority_threshold(l: u64) -> u64 {
    l / 2 + 1
}

/// Tails of `Bin(n, p)` at `k`, allowing `n = 0`.
pub(crate) fn tails(n: u64, k: u64, p: f64, method: TailMethod) -> Result<TailPair> {
    if k == 0 {
        return Ok(TailPair::certain_ge());
    }
    if k > n {
        return Ok(TailPair::certain_lt());
    }
    if p == 0.0 {
        return Ok(TailPair::certain_lt());
    }
    if p == 1.0 {
        return Ok(TailPair::certain_ge());
    }
    let use_sum = match method {
        TailMethod::Auto => n <= SUMMATION_MAX_TRIALS,
        TailMethod::Summation => true,
        TailMethod::IncompleteBeta => false,
    };
    if use_sum {
        Ok(tails_by_summation(n, k, p))
    } else {
        tails_by_incomplete_beta(n, k, p)
    }
}

fn tails_by_summation(n: u64, k: u64, p: f64) -> TailPair {
    let q = 1.0 - p;
    let ln_ge = log_sum_exp((k..=n).map(|j| ln_binomial_pmf(j, n, p, q)));
    let ln_lt = log_sum_exp((0..k).map(|j| ln_binomial_pmf(j, n, p, q)));
    TailPair { ln_ge, ln_lt }
}

// P[X >= k] = I_p(k, n-k+1); the prefactor of the continued fraction equals
// C(n,k) p^k q^(n-k+1), i.e. a binomial point mass times q.
fn tails_by_incomplete_beta(n: u64, k: u64, p: f64) -> Result<TailPair> {
    let q = 1.0 - p;
    let a = k as f64;
    let b = (n - k + 1) as f64;
    if p < (a + 1.0) / (a + b + 2.0) {
        let ln_ge = ln_binomial_pmf(k, n, p, q) + q.ln() + incomplete_beta_cf(a, b, p)?.ln();
        Ok(TailPair { ln_ge, ln_lt: ln_one_minus_exp(ln_ge) })
    } else {
        let ln_lt = ln_binomial_pmf(k - 1, n, p, q) + p.ln() + incomplete_beta_cf(b, a, q)?.ln();
        Ok(TailPair { ln_ge: ln_one_minus_exp(ln_lt), ln_lt })
    }
}

fn check_tail_args(trials: u64, k: u64, p: f64) -> Result<()> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trial count must be at least 1".into()));
    }
    check_probability("p", p)?;
    if k > trials + 1 {
        return Err(Error::InvalidArgument(format!(
            "threshold k = {k} outside [0, {}]",
            trials + 1
        )));
    }
    Ok(())
}

/// Tails of `Bin(trials, p)` at `k` by an explicit route.
pub fn binomial_tails_with(trials: u64, k: u64, p: f64, method: TailMethod) -> Result<TailPair> {
    check_tail_args(trials, k, p)?;
    tails(trials, k, p, method)
}

/// Tails of `Bin(trials, p)` at `k`.
pub fn binomial_tails(trials: u64, k: u64, p: f64) -> Result<TailPair> {
    binomial_tails_with(trials, k, p, TailMethod::Auto)
}

/// `P[Bin(trials, p) ≥ k]` for `0 ≤ k ≤ trials + 1`.
pub fn binomial_tail_ge(trials: u64, k: u64, p: f64) -> Result<f64> {
    Ok(binomial_tails(trials, k, p)?.ge())
}

/// Strict-majority success of `l` i.i.d. voters with competence `p`.
pub fn majority_binomial(l: u64, p: f64) -> Result<Majority> {
    Ok(Majority::from_tails(binomial_tails(l, majority_threshold(l), p)?))
}

/// `P[Bin(l, p) ≥ ⌊l/2⌋ + 1]`.
pub fn majority_prob_binomial(l: u64, p: f64) -> Result<f64> {
    Ok(majority_binomial(l, p)?.success)
}

/// The pessimistic / optimistic tails `(R₋, R₊)` obtained by fixing the last
/// of `l` representatives to vote wrong / right while the other `l - 1` vote
/// with competence `p`.
pub fn r_bracket(l: u64, p: f64) -> Result<(f64, f64)> {
    if l == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    check_probability("p", p)?;
    let rest = l - 1;
    // ⌈(L+1)/2⌉ and ⌈(L-1)/2⌉
    let lo_minus = l / 2 + 1;
    let lo_plus = l / 2;
    let r_minus = if lo_minus > rest {
        0.0
    } else {
        tails(rest, lo_minus, p, TailMethod::Auto)?.ge()
    };
    let r_plus = tails(rest, lo_plus, p, TailMethod::Auto)?.ge();
    Ok((r_minus, r_plus))
}

/// Per-voter success probabilities of independent Bernoulli trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessProfile(Vec<f64>);

impl SuccessProfile {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("success profile must be non-empty".into()));
        }
        for &p in &probs {
            check_probability("profile entry", p)?;
        }
        Ok(SuccessProfile(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Average success probability `q`.
    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Probability mass over `0..=L` successes.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn mass(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `P[X ≥ k]`
    pub fn tail_ge(&self, k: usize) -> f64 {
        self.0.iter().skip(k).sum()
    }
}

/// Exact distribution of the number of successes, by adding one trial at a
/// time (`O(L²)`).
pub fn poisson_binomial_pmf(profile: &SuccessProfile) -> Result<Pmf> {
    let l = profile.len();
    if l > DP_MAX_TRIALS {
        return Err(Error::GuardExceeded(format!(
            "Poisson-binomial recursion limited to {DP_MAX_TRIALS} trials, got {l}"
        )));
    }
    let mut mass = vec![0.0; l + 1];
    mass[0] = 1.0;
    for (i, &p) in profile.probs().iter().enumerate() {
        let q = 1.0 - p;
        for j in (1..=i + 1).rev() {
            mass[j] = mass[j] * q + mass[j - 1] * p;
        }
        mass[0] *= q;
    }
    Ok(Pmf(mass))
}

/// Strict-majority success for a heterogeneous profile, with log failure.
pub fn majority_profile(profile: &SuccessProfile) -> Result<Majority> {
    let pmf = poisson_binomial_pmf(profile)?;
    let m = majority_threshold(profile.len() as u64) as usize;
    let success: f64 = pmf.mass()[m..].iter().sum();
    let failure: f64 = pmf.mass()[..m].iter().sum();
    Ok(Majority { success, ln_failure: failure.ln() })
}

/// `P[X > L/2]` for the profile's Poisson-binomial sum.
pub fn majority_prob_profile(profile: &SuccessProfile) -> Result<f64> {
    Ok(majority_profile(profile)?.success)
}

/// Upper bound on strict-majority success when the average competence
/// `q ≤ 1/2`, in terms of a binomial with the average probability.
///
/// Even `L` (and odd `L ≥ 1/(1-2q)`): `1 - P[Bin(L,q) ≤ ⌊L/2⌋]`.
/// Otherwise: `√(1 - P[Bin(2L,q) ≤ L])`.
pub fn pb_majority_upper_bound(profile: &SuccessProfile) -> Result<f64> {
    let q = profile.mean();
    if q > 0.5 + 1e-12 {
        return Err(Error::Inapplicable(format!(
            "average probability q = {q} exceeds 1/2"
        )));
    }
    let q = q.min(0.5);
    let l = profile.len() as u64;
    let even_form = l.is_multiple_of(2) || (1.0 - 2.0 * q) * l as f64 >= 1.0;
    if even_form {
        Ok(tails(l, majority_threshold(l), q, TailMethod::Auto)?.ge())
    } else {
        Ok(tails(2 * l, l + 1, q, TailMethod::Auto)?.ge().sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // exact binomial tail from integer arithmetic, p = num/den
    fn exact_tail(n: u32, k: u32, num: u128, den: u128) -> f64 {
        let mut total: u128 = 0;
        for j in k..=n {
            let mut c: u128 = 1;
            for i in 0..j {
                c = c * (n - i) as u128 / (i + 1) as u128;
            }
            total += c * num.pow(j) * (den - num).pow(n - j);
        }
        total as f64 / (den.pow(n)) as f64
    }

    // independent oracle: plain summation with ln Γ coefficients
    fn naive_tail(n: u64, k: u64, p: f64) -> f64 {
        use crate::special::ln_gamma;
        (k..=n)
            .map(|j| {
                let lc = ln_gamma(n as f64 + 1.0)
                    - ln_gamma(j as f64 + 1.0)
                    - ln_gamma((n - j) as f64 + 1.0);
                (lc + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp()
            })
            .sum()
    }

    fn enumerate_majority(probs: &[f64]) -> (Vec<f64>, f64) {
        let l = probs.len();
        let mut pmf = vec![0.0; l + 1];
        for mask in 0u32..(1 << l) {
            let mut w = 1.0;
            for (i, &p) in probs.iter().enumerate() {
                w *= if mask >> i & 1 == 1 { p } else { 1.0 - p };
            }
            pmf[mask.count_ones() as usize] += w;
        }
        let m = l / 2 + 1;
        let maj = pmf[m..].iter().sum();
        (pmf, maj)
    }

    #[test]
    fn tail_examples() {
        assert_eq!(binomial_tail_ge(1, 1, 0.7).unwrap(), 0.7);
        assert_eq!(binomial_tail_ge(4, 5, 0.3).unwrap(), 0.0);
        assert_eq!(binomial_tail_ge(4, 0, 0.3).unwrap(), 1.0);
        let v = binomial_tail_ge(10, 6, 0.5).unwrap();
        assert!((v - 386.0 / 1024.0).abs() < 1e-15);
        assert_eq!(exact_tail(10, 6, 1, 2), 0.376953125);
    }

    #[test]
    fn tail_rejects_bad_arguments() {
        assert!(matches!(binomial_tail_ge(4, 6, 0.3), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            binomial_tail_ge(4, 2, 1.3),
            Err(Error::InvalidProbability { .. })
        ));
        assert!(binomial_tail_ge(0, 0, 0.5).is_err());
    }

    #[test]
    fn tails_match_integer_arithmetic() {
        for n in 1..=20u32 {
            for k in 0..=n + 1 {
                let want = if k > n { 0.0 } else { exact_tail(n, k, 3, 10) };
                for method in [TailMethod::Summation, TailMethod::IncompleteBeta] {
                    let got = binomial_tails_with(n as u64, k as u64, 0.3, method).unwrap().ge();
                    assert!(
                        (got - want).abs() <= 1e-13 * want.max(1e-300) + 1e-300,
                        "n={n} k={k} {method:?}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn summation_and_beta_paths_agree_near_the_middle() {
        for &n in &[100u64, 1000, 10_000] {
            for &p in &[0.501, 0.52, 0.7] {
                for dk in [-3i64, -1, 0, 1, 2, 5] {
                    let k = (n as i64 / 2 + dk) as u64;
                    let s = binomial_tails_with(n, k, p, TailMethod::Summation).unwrap();
                    let b = binomial_tails_with(n, k, p, TailMethod::IncompleteBeta).unwrap();
                    for (x, y) in [(s.ge(), b.ge()), (s.lt(), b.lt())] {
                        assert!(
                            (x - y).abs() <= 1e-9 * x.abs(),
                            "n={n} p={p} k={k}: {x} vs {y}"
                        );
                    }
                    assert!((s.ln_lt - b.ln_lt).abs() <= 1e-9 * s.ln_lt.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn summation_matches_naive_oracle() {
        for &(n, k, p) in &[(50u64, 20u64, 0.45), (300, 160, 0.52), (1000, 480, 0.5)] {
            let got = binomial_tail_ge(n, k, p).unwrap();
            let want = naive_tail(n, k, p);
            assert!((got - want).abs() <= 1e-10 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn huge_trial_counts_stay_finite() {
        // 235 million voters at competence 0.485: failure is essentially certain
        let m = majority_binomial(235_000_000, 0.485).unwrap();
        assert!(m.success < 1e-300 || m.success == 0.0);
        assert!(m.ln_failure.abs() < 1e-12);
        let m = majority_binomial(78_333_333, 0.5025).unwrap();
        assert_eq!(m.success, 1.0);
        assert!(m.ln_failure < -400.0 && m.ln_failure.is_finite());
        let m = majority_binomial(1_000_000_001, 0.50001).unwrap();
        assert!(m.success > 0.5 && m.success < 1.0);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(majority_prob_binomial(1, 0.37).unwrap(), 0.37);
        assert!((majority_prob_binomial(3, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((majority_prob_binomial(2, 0.5).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn r_bracket_examples() {
        let (lo, hi) = r_bracket(3, 0.5).unwrap();
        assert!((lo - 0.25).abs() < 1e-15 && (hi - 0.75).abs() < 1e-15);
        let (lo, hi) = r_bracket(5, 0.7).unwrap();
        // Bin(4, 0.7): P[>=3] = 0.6517, P[>=2] = 0.9163
        assert!((lo - 0.6517).abs() < 1e-12);
        assert!((hi - 0.9163).abs() < 1e-12);
        assert_eq!(r_bracket(1, 0.9).unwrap(), (0.0, 1.0));
        assert_eq!(r_bracket(2, 0.51).unwrap().0, 0.0);
    }

    #[test]
    fn r_bracket_is_monotone_in_p() {
        for l in 1..=60u64 {
            let mut prev = (0.0, 0.0);
            for i in 1..=99 {
                let cur = r_bracket(l, i as f64 / 100.0).unwrap();
                assert!(cur.0 >= prev.0 - 1e-15 && cur.1 >= prev.1 - 1e-15, "L={l}");
                prev = cur;
            }
        }
    }

    // Along each parity class R₋ grows with L, and so does R₊ for even L.
    // Across parities neither is monotone: R₊(3,0.6)=0.84 > R₊(4,0.6)=0.648.
    #[test]
    fn r_bracket_monotone_in_l_within_parity() {
        for i in 51..=99 {
            let p = i as f64 / 100.0;
            for parity in 0..2u64 {
                let mut prev = (f64::NEG_INFINITY, f64::NEG_INFINITY);
                for l in (1..=200u64).filter(|l| l % 2 == parity) {
                    let (lo, hi) = r_bracket(l, p).unwrap();
                    assert!(lo >= prev.0 - 1e-12, "R- p={p} L={l}");
                    if parity == 0 {
                        assert!(hi >= prev.1 - 1e-12, "R+ p={p} L={l}");
                    }
                    prev = (lo, hi);
                }
            }
        }
        let (_, r3) = r_bracket(3, 0.6).unwrap();
        let (_, r4) = r_bracket(4, 0.6).unwrap();
        let (_, r5) = r_bracket(5, 0.6).unwrap();
        assert!(r3 > r4 && r3 > r5);
    }

    #[test]
    fn r_plus_ceiling_below_one_half() {
        // L = 1 is degenerate: zero trials, R₊ = 1 for every p
        assert_eq!(r_bracket(1, 0.2).unwrap().1, 1.0);
        let mut worst = (0.0, 0, 0);
        for l in 2..=200u64 {
            for i in 0..=50 {
                let (_, hi) = r_bracket(l, i as f64 / 100.0).unwrap();
                assert!(hi <= 0.75 + 1e-12, "L={l} p={}: {hi}", i as f64 / 100.0);
                if hi > worst.0 + 1e-15 {
                    worst = (hi, l, i);
                }
            }
        }
        assert_eq!((worst.1, worst.2), (3, 50));
        assert!((worst.0 - 0.75).abs() < 1e-15);
    }

    #[test]
    fn pmf_examples() {
        let pmf = poisson_binomial_pmf(&SuccessProfile::new(vec![0.5, 0.5]).unwrap()).unwrap();
        assert_eq!(pmf.mass(), &[0.25, 0.5, 0.25]);
        let pmf = poisson_binomial_pmf(&SuccessProfile::new(vec![1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(pmf.mass(), &[0.0, 1.0, 0.0]);
        let pmf =
            poisson_binomial_pmf(&SuccessProfile::new(vec![0.9, 0.9, 0.1, 0.1]).unwrap()).unwrap();
        // P[X >= 3]: 0.81*2*0.1*0.9 + 2*0.9*0.1*0.01 + 0.0081
        let want = 0.81 * 0.18 + 0.0018 + 0.0081;
        assert!((pmf.tail_ge(3) - want).abs() < 1e-15);
        assert!((pmf.tail_ge(3) - 0.1557).abs() < 1e-12);
        assert!(SuccessProfile::new(vec![]).is_err());
    }

    #[test]
    fn profile_majority_examples() {
        let p = |v: Vec<f64>| SuccessProfile::new(v).unwrap();
        assert_eq!(majority_prob_profile(&p(vec![1.0, 1.0, 0.0])).unwrap(), 1.0);
        assert!((majority_prob_profile(&p(vec![0.4, 0.6])).unwrap() - 0.24).abs() < 1e-15);
        let f = 5.0 / 6.0;
        let v = majority_prob_profile(&p(vec![f, f, f, 0.0, 0.0])).unwrap();
        assert!((v - f * f * f).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_examples() {
        let p = |v: Vec<f64>| SuccessProfile::new(v).unwrap();
        assert!((pb_majority_upper_bound(&p(vec![0.4, 0.6])).unwrap() - 0.25).abs() < 1e-15);
        let b = pb_majority_upper_bound(&p(vec![0.0, 1.0, 0.5, 0.5])).unwrap();
        assert!((b - 5.0 / 16.0).abs() < 1e-15);
        let f = 5.0 / 6.0;
        let b = pb_majority_upper_bound(&p(vec![f, f, f, 0.0, 0.0])).unwrap();
        assert!((b - (386.0f64 / 1024.0).sqrt()).abs() < 1e-12);
        assert!((b - 0.614).abs() < 1e-3);
        assert!(matches!(
            pb_majority_upper_bound(&p(vec![0.6, 0.6])),
            Err(Error::Inapplicable(_))
        ));
    }

    proptest! {
        #[test]
        fn pmf_matches_enumeration(probs in prop::collection::vec(0.0f64..=1.0, 1..=12)) {
            let pmf = poisson_binomial_pmf(&SuccessProfile::new(probs.clone()).unwrap()).unwrap();
            let (want, maj) = enumerate_majority(&probs);
            for (a, b) in pmf.mass().iter().zip(&want) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let total: f64 = pmf.mass().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let got = majority_prob_profile(&SuccessProfile::new(probs).unwrap()).unwrap();
            prop_assert!((got - maj).abs() <= 1e-12);
        }

        #[test]
        fn equal_profiles_match_binomial(l in 1usize..=200, p in 0.0f64..=1.0) {
            let prof = SuccessProfile::new(vec![p; l]).unwrap();
            let a = majority_prob_profile(&prof).unwrap();
            let b = majority_prob_binomial(l as u64, p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn upper_bound_dominates(raw in prop::collection::vec(0.0f64..=1.0, 1..=13)) {
            let q = raw.iter().sum::<f64>() / raw.len() as f64;
            let probs: Vec<f64> = if q > 0.5 { raw.iter().map(|p| 1.0 - p).collect() } else { raw };
            let prof = SuccessProfile::new(probs.clone()).unwrap();
            let (_, actual) = enumerate_majority(&probs);
            let bound = pb_majority_upper_bound(&prof).unwrap();
            prop_assert!(actual <= bound + 1e-12, "{} > {}", actual, bound);
        }
    }
}
