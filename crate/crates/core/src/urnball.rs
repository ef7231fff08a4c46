//! Monte Carlo urn experiment for the only-arrival system.
//!
//! One round draws `r` urns with a policy and drops a ball into each. After
//! `T` rounds the urn loads mirror queue lengths when servers never run, and
//! the overlap of every later round with the first estimates `X`.

use rayon::prelude::*;

use crate::designs::bibd_order;
use crate::error::{invalid, Error, Result};
use crate::indicators::{lbf_random_asymptotic, IndicatorSet};
use crate::policies::{PolicyKind, PolicyState};

/// Load order statistics averaged over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyStats {
    pub n: usize,
    pub r: usize,
    pub t: u64,
    pub replications: usize,
    /// Mean over replications of the least loaded urn.
    pub mean_min: f64,
    /// Mean over replications of the most loaded urn.
    pub mean_max: f64,
    pub per_urn_mean: Vec<f64>,
    pub lbf_emp: f64,
}

/// Overlap observations `X_t = |S_t ∩ S_1|`, stored as a histogram over `0..=r`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapSamples {
    pub r: usize,
    pub counts: Vec<u64>,
    pub ex_emp: f64,
    pub ex2_emp: f64,
}

impl OverlapSamples {
    fn from_counts(r: usize, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let (mut s1, mut s2) = (0.0, 0.0);
        for (k, &c) in counts.iter().enumerate() {
            s1 += (k as f64) * c as f64;
            s2 += (k * k) as f64 * c as f64;
        }
        let denom = total.max(1) as f64;
        Self {
            r,
            counts,
            ex_emp: s1 / denom,
            ex2_emp: s2 / denom,
        }
    }

    pub fn len(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Empirical `P(X = k)`.
    pub fn frequency(&self, k: usize) -> f64 {
        self.counts.get(k).copied().unwrap_or(0) as f64 / self.len().max(1) as f64
    }
}

struct Replication {
    loads: Vec<u64>,
    overlaps: Vec<u64>,
}

fn replicate(kind: PolicyKind, n: usize, r: usize, t: u64, seed: u64) -> Result<Replication> {
    let mut policy = PolicyState::new(kind, n, r, seed)?;
    let mut loads = vec![0u64; n];
    let mut overlaps = vec![0u64; r + 1];
    let mut initial = vec![false; n];
    for round in 0..t {
        let sel = policy.next_selection();
        for &s in &sel {
            loads[s] += 1;
        }
        if round == 0 {
            for &s in &sel {
                initial[s] = true;
            }
        } else {
            let k = sel.iter().filter(|&&s| initial[s]).count();
            overlaps[k] += 1;
        }
    }
    Ok(Replication { loads, overlaps })
}

/// Runs `replications` independent experiments of `t` rounds each.
/// Replication `j` seeds its policy with `seed + j`.
pub fn run_experiment1(
    kind: PolicyKind,
    n: usize,
    r: usize,
    t: u64,
    replications: usize,
    seed: u64,
) -> Result<(OccupancyStats, OverlapSamples)> {
    if r == 0 || r > n {
        return Err(invalid(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
    }
    if t < n.div_ceil(r) as u64 {
        return Err(invalid(format!(
            "need T >= ceil(n/r) = {}, got T = {t}",
            n.div_ceil(r)
        )));
    }
    if replications == 0 {
        return Err(invalid("need at least one replication"));
    }
    if kind == PolicyKind::Bibd && (r < 2 || bibd_order(r)? != n) {
        return Err(invalid(format!(
            "the bibd policy needs n = r(r-1)+1, got n = {n}, r = {r}"
        )));
    }
    let reps: Vec<Replication> = (0..replications)
        .into_par_iter()
        .map(|j| replicate(kind, n, r, t, seed.wrapping_add(j as u64)))
        .collect::<Result<_>>()?;

    // Sequential reduction in replication order keeps the sums bit-identical.
    let mut sum_min = 0.0;
    let mut sum_max = 0.0;
    let mut per_urn = vec![0.0; n];
    let mut overlaps = vec![0u64; r + 1];
    for rep in &reps {
        sum_min += *rep.loads.iter().min().expect("n >= 1") as f64;
        sum_max += *rep.loads.iter().max().expect("n >= 1") as f64;
        for (acc, &l) in per_urn.iter_mut().zip(&rep.loads) {
            *acc += l as f64;
        }
        for (acc, &c) in overlaps.iter_mut().zip(&rep.overlaps) {
            *acc += c;
        }
    }
    let m = replications as f64;
    let mean_min = sum_min / m;
    let mean_max = sum_max / m;
    let occupancy = OccupancyStats {
        n,
        r,
        t,
        replications,
        mean_min,
        mean_max,
        per_urn_mean: per_urn.into_iter().map(|s| s / m).collect(),
        lbf_emp: mean_min / mean_max,
    };
    Ok((occupancy, OverlapSamples::from_counts(r, overlaps)))
}

/// Definitions of LBF/ROF/RDF applied to sample moments.
pub fn empirical_indicators(
    occ: &OccupancyStats,
    ov: &OverlapSamples,
) -> Result<IndicatorSet<f64>> {
    if ov.is_empty() {
        return Err(invalid("no overlap samples (need T >= 2)"));
    }
    if ov.ex_emp == 0.0 {
        return Err(Error::DegenerateOverlap);
    }
    Ok(IndicatorSet {
        lbf: occ.lbf_emp,
        rof: 1.0 / ov.ex_emp,
        rdf: 1.0 / ov.ex2_emp,
        ex: ov.ex_emp,
        ex2: ov.ex2_emp,
    })
}

/// Analytic LBF to show next to the empirical one: the random-policy
/// approximation, or 1 for cyclic policies when `n | T`.
pub fn analytic_lbf(kind: PolicyKind, n: usize, r: usize, t: u64) -> Option<f64> {
    match kind {
        PolicyKind::Random => Some(lbf_random_asymptotic(n, r, t)),
        _ if t.is_multiple_of(n as u64) => Some(1.0),
        _ => None,
    }
}

/// One `(n, r)` cell of an occupancy sweep; measurement fields are `None`
/// when the cell's parameters were rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n: usize,
    pub r: usize,
    pub mean_min: Option<f64>,
    pub mean_max: Option<f64>,
    pub lbf_emp: Option<f64>,
    pub lbf_analytic: Option<f64>,
    pub error: Option<String>,
}

/// Sweeps `r` over `r_range` (clipped to `1..=n`) for each `n`.
pub fn occupancy_curves(
    kind: PolicyKind,
    n_list: &[usize],
    r_range: std::ops::RangeInclusive<usize>,
    t: u64,
    replications: usize,
    seed: u64,
) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for &n in n_list {
        let lo = (*r_range.start()).max(1);
        let hi = (*r_range.end()).min(n);
        for r in lo..=hi {
            let row = match run_experiment1(kind, n, r, t, replications, seed) {
                Ok((occ, _)) => CurveRow {
                    n,
                    r,
                    mean_min: Some(occ.mean_min),
                    mean_max: Some(occ.mean_max),
                    lbf_emp: Some(occ.lbf_emp),
                    lbf_analytic: analytic_lbf(kind, n, r, t),
                    error: None,
                },
                Err(e) => CurveRow {
                    n,
                    r,
                    mean_min: None,
                    mean_max: None,
                    lbf_emp: None,
                    lbf_analytic: None,
                    error: Some(e.to_string()),
                },
            };
            rows.push(row);
        }
    }
    rows
}
