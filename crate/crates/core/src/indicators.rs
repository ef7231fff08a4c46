//! Closed-form overlap distributions and the LBF / ROF / RDF indicators.
//!
//! `X` is the number of servers a job's selection shares with the first
//! job's selection. ROF is `1/E[X]`, RDF is `1/E[X²]`, and LBF is the ratio
//! of expected minimum to expected maximum urn load.
//!
//! Everything that is a rational function of `n`, `r` and `T` is generic
//! over [`Scalar`], so the same code runs exactly on [`crate::Rational`] or
//! approximately on `f64`/`f32`. The random-policy LBF involves a square
//! root and a logarithm and is evaluated in floating point only.

use num_integer::Integer;
use num_traits::Float;

use crate::designs::bibd_order;
use crate::error::{invalid, Error, Result};
use crate::policies::PolicyKind;
use crate::scalar::{binomial, Scalar};
use crate::Rational;

/// Largest `n` for which [`analytic_indicators`] evaluates exactly.
pub const EXACT_MAX_N: usize = 64;

/// Distribution of the overlap `X` over `0..=r`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapPmf<S> {
    pub n: usize,
    pub r: usize,
    probs: Vec<S>,
}

impl<S: Scalar> OverlapPmf<S> {
    /// `probs[k] = P(X = k)` for `k = 0..=r`; must be nonnegative and sum to one.
    pub fn new(n: usize, r: usize, probs: Vec<S>) -> Result<Self> {
        if probs.len() != r + 1 {
            return Err(invalid(format!(
                "expected {} probabilities, got {}",
                r + 1,
                probs.len()
            )));
        }
        if let Some(k) = probs.iter().position(|p| *p < S::zero()) {
            return Err(invalid(format!("P(X = {k}) is negative")));
        }
        let total = probs.iter().cloned().fold(S::zero(), |a, b| a + b);
        let off = (total.to_f64() - 1.0).abs();
        let exact_miss = S::is_exact() && total != S::one();
        if exact_miss || off > normalization_tolerance::<S>() {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { n, r, probs })
    }

    pub fn prob(&self, k: usize) -> S {
        self.probs.get(k).cloned().unwrap_or_else(S::zero)
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    /// `E[X^power]`.
    pub fn moment(&self, power: u32) -> S {
        self.probs
            .iter()
            .enumerate()
            .fold(S::zero(), |acc, (k, p)| {
                acc + S::from_int((k as i64).pow(power)) * p.clone()
            })
    }

    pub fn mean(&self) -> S {
        self.moment(1)
    }

    pub fn second_moment(&self) -> S {
        self.moment(2)
    }

    pub fn to_f64(&self) -> OverlapPmf<f64> {
        OverlapPmf {
            n: self.n,
            r: self.r,
            probs: self.probs.iter().map(Scalar::to_f64).collect(),
        }
    }
}

fn normalization_tolerance<S: Scalar>() -> f64 {
    if S::is_exact() {
        0.0
    } else if std::mem::size_of::<S>() < std::mem::size_of::<f64>() {
        1e-5
    } else {
        1e-12
    }
}

/// LBF, ROF, RDF together with the overlap moments they come from.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSet<S> {
    pub lbf: S,
    pub rof: S,
    pub rdf: S,
    pub ex: S,
    pub ex2: S,
}

impl<S: Scalar> IndicatorSet<S> {
    pub fn to_f64(&self) -> IndicatorSet<f64> {
        IndicatorSet {
            lbf: self.lbf.to_f64(),
            rof: self.rof.to_f64(),
            rdf: self.rdf.to_f64(),
            ex: self.ex.to_f64(),
            ex2: self.ex2.to_f64(),
        }
    }
}

fn check_n_r(n: usize, r: usize) -> Result<()> {
    if r == 0 || r > n {
        return Err(invalid(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
    }
    Ok(())
}

/// Hypergeometric overlap of two independent uniform `r`-subsets of `n` points.
pub fn overlap_pmf_random<S: Scalar>(n: usize, r: usize) -> Result<OverlapPmf<S>> {
    check_n_r(n, r)?;
    let (n64, r64) = (n as u64, r as u64);
    let total: S = binomial(n64, r64);
    let probs = (0..=r64)
        .map(|k| binomial::<S>(r64, k) * binomial::<S>(n64 - r64, r64 - k) / total.clone())
        .collect();
    OverlapPmf::new(n, r, probs)
}

fn check_finite_horizon(n: usize, t: u64) -> Result<()> {
    if t < n as u64 || !t.is_multiple_of(n as u64) {
        return Err(invalid(format!(
            "horizon T = {t} must be a positive multiple of n = {n}"
        )));
    }
    Ok(())
}

/// Overlap distribution for round-robin windows. `t = None` is the `T → ∞` limit.
///
/// The closed form counts each nonzero overlap twice per period, which needs
/// the windows to visit every offset (`gcd(n, r) = 1`) and two windows at
/// distinct offsets not to overlap on both sides (`2r - 1 <= n`). Both hold
/// at `n = r(r-1)+1`.
pub fn overlap_pmf_round_robin<S: Scalar>(
    n: usize,
    r: usize,
    t: Option<u64>,
) -> Result<OverlapPmf<S>> {
    check_n_r(n, r)?;
    if n.gcd(&r) != 1 || 2 * r - 1 > n {
        return Err(Error::UnsupportedParameters(format!(
            "round-robin closed form needs gcd(n, r) = 1 and 2r - 1 <= n (n = {n}, r = {r}); \
             measure the overlap empirically instead"
        )));
    }
    let n_i = n as i64;
    let inv_t = match t {
        Some(t) => {
            check_finite_horizon(n, t)?;
            S::from_ratio(1, t as i64)
        }
        None => S::zero(),
    };
    let mut probs = Vec::with_capacity(r + 1);
    probs.push(
        S::one() - S::from_ratio(2 * r as i64 - 1, n_i) + S::from_int(r as i64) * inv_t.clone(),
    );
    for _ in 1..r {
        probs.push(S::from_ratio(2, n_i) - inv_t.clone());
    }
    probs.push(S::from_ratio(1, n_i) - inv_t);
    OverlapPmf::new(n, r, probs)
}

/// Overlap distribution for block-design scheduling. `t = None` is the `T → ∞`
/// limit with support `{1, r}`; a finite horizon moves mass `1/T` from
/// `k = r` to `k = 0`.
pub fn overlap_pmf_bibd<S: Scalar>(n: usize, r: usize, t: Option<u64>) -> Result<OverlapPmf<S>> {
    if r < 2 || bibd_order(r)? != n {
        return Err(invalid(format!(
            "block-design overlap needs n = r(r-1)+1, got n = {n}, r = {r}"
        )));
    }
    let n_i = n as i64;
    let inv_t = match t {
        Some(t) => {
            check_finite_horizon(n, t)?;
            S::from_ratio(1, t as i64)
        }
        None => S::zero(),
    };
    let mut probs = vec![S::zero(); r + 1];
    probs[0] = inv_t.clone();
    probs[1] = S::from_ratio(n_i - 1, n_i);
    probs[r] = S::from_ratio(1, n_i) - inv_t;
    OverlapPmf::new(n, r, probs)
}

/// ROF and RDF from the moments of `pmf`, paired with a separately computed LBF.
pub fn indicators_from_pmf<S: Scalar>(pmf: &OverlapPmf<S>, lbf: S) -> Result<IndicatorSet<S>> {
    let ex = pmf.mean();
    let ex2 = pmf.second_moment();
    if ex == S::zero() {
        return Err(Error::DegenerateOverlap);
    }
    Ok(IndicatorSet {
        lbf,
        rof: S::one() / ex.clone(),
        rdf: S::one() / ex2.clone(),
        ex,
        ex2,
    })
}

/// Largest horizon for which the random-policy LBF approximation is clamped to 0.
pub fn lbf_positivity_threshold<F: Float>(n: usize, r: usize) -> F {
    let n_f = F::from(n).unwrap();
    let r_f = F::from(r).unwrap();
    (F::one() + F::one()) * (n_f / r_f - F::one()) * n_f.ln()
}

/// Central-limit approximation of the random-policy LBF after `t` rounds:
/// `max{0, (Tr/n - s) / (Tr/n + s)}` with `s = sqrt(2Tr(n-r) ln n / n²)`.
///
/// This is an asymptotic approximation (the minimum-load term in particular
/// is not derived rigorously), not an exact expectation.
pub fn lbf_random_asymptotic<F: Float>(n: usize, r: usize, t: u64) -> F {
    let (n_f, r_f, t_f) = (
        F::from(n).unwrap(),
        F::from(r).unwrap(),
        F::from(t).unwrap(),
    );
    if r < n && t_f <= lbf_positivity_threshold::<F>(n, r) {
        return F::zero();
    }
    let two = F::one() + F::one();
    let mean = t_f * r_f / n_f;
    let spread = (two * t_f * r_f * (n_f - r_f) * n_f.ln() / (n_f * n_f)).sqrt();
    let low = (mean - spread).max(F::zero());
    low / (mean + spread)
}

/// LBF of the cyclic policies, exactly 1 whenever `n | T`.
pub fn lbf_exact_cyclic<S: Scalar>(kind: PolicyKind) -> Result<S> {
    match kind {
        PolicyKind::RoundRobin | PolicyKind::Bibd => Ok(S::one()),
        PolicyKind::Random => Err(invalid(
            "random selection has no exact LBF; use lbf_random_asymptotic",
        )),
    }
}

/// Indicator row with every entry written directly in terms of `r`, at
/// `n = (r-1)² + r`. ROF/RDF are the `T → ∞` values; `t` is only used for
/// the random-policy LBF, and is required there.
pub fn table1_row<S: Scalar>(
    policy: PolicyKind,
    r: usize,
    t: Option<u64>,
) -> Result<IndicatorSet<S>> {
    if r < 2 {
        return Err(invalid(format!("block size r must be at least 2, got {r}")));
    }
    let ri = r as i64;
    let m = (ri - 1) * (ri - 1) + ri;
    let rof = S::from_ratio(m, ri * ri);
    let (rdf, lbf) = match policy {
        PolicyKind::Random => {
            let t = t.ok_or_else(|| invalid("the random-policy LBF needs a horizon T"))?;
            let (tf, rf, mf) = (t as f64, r as f64, m as f64);
            let mean = tf * rf / mf;
            let spread = (2.0 * tf * rf * (rf - 1.0).powi(2) * mf.ln() / (mf * mf)).sqrt();
            let lbf = (mean - spread).max(0.0) / (mean + spread);
            (S::from_ratio(m, ri * (2 * ri - 1)), S::from_f64(lbf))
        }
        PolicyKind::RoundRobin => (S::from_ratio(3 * m, ri * (2 * ri * ri + 1)), S::one()),
        PolicyKind::Bibd => (S::from_ratio(m, ri * (2 * ri - 1)), S::one()),
    };
    Ok(IndicatorSet {
        lbf,
        ex: S::one() / rof.clone(),
        ex2: S::one() / rdf.clone(),
        rof,
        rdf,
    })
}

/// Overlap distribution of `policy` in the scalar type `S`.
pub fn overlap_pmf<S: Scalar>(
    policy: PolicyKind,
    n: usize,
    r: usize,
    t: Option<u64>,
) -> Result<OverlapPmf<S>> {
    match policy {
        PolicyKind::Random => overlap_pmf_random(n, r),
        PolicyKind::RoundRobin => overlap_pmf_round_robin(n, r, t),
        PolicyKind::Bibd => overlap_pmf_bibd(n, r, t),
    }
}

fn analytic_in<S: Scalar>(
    policy: PolicyKind,
    n: usize,
    r: usize,
    t: Option<u64>,
) -> Result<IndicatorSet<f64>> {
    let pmf = overlap_pmf::<S>(policy, n, r, t)?;
    let lbf = match (policy, t) {
        (PolicyKind::Random, Some(t)) => lbf_random_asymptotic::<f64>(n, r, t),
        // Every policy balances perfectly in the T → ∞ limit.
        (PolicyKind::Random, None) => 1.0,
        (kind, _) => lbf_exact_cyclic::<f64>(kind)?,
    };
    let mut set = indicators_from_pmf(&pmf, S::one())?.to_f64();
    set.lbf = lbf;
    Ok(set)
}

/// Analytic indicators as `f64`, computed in exact rational arithmetic when
/// `n <= EXACT_MAX_N` and in floating point above.
pub fn analytic_indicators(
    policy: PolicyKind,
    n: usize,
    r: usize,
    t: Option<u64>,
) -> Result<IndicatorSet<f64>> {
    if n <= EXACT_MAX_N {
        analytic_in::<Rational>(policy, n, r, t)
    } else {
        analytic_in::<f64>(policy, n, r, t)
    }
}
