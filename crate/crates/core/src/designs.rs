//! Symmetric `(n, r, 1)` balanced incomplete block designs.
//!
//! Designs are built by cyclically developing a planar difference set: if
//! `D` is an `r`-subset of `Z_n` whose ordered differences hit every nonzero
//! residue exactly once, the `n` translates `D + i` form a projective plane
//! of order `r - 1`, i.e. every pair of points lies in exactly one block.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Planar difference sets for small block sizes, as found by
/// [`search_planar_difference_set`]. Indexed by `r - 2`.
const CACHED_DIFFERENCE_SETS: [&[usize]; 5] = [
    &[0, 1],
    &[0, 1, 3],
    &[0, 1, 3, 9],
    &[0, 1, 4, 14, 16],
    &[0, 1, 3, 8, 12, 18],
];

/// Number of points of a symmetric design with block size `r` and `λ = 1`.
pub fn bibd_order(r: usize) -> Result<usize> {
    if r < 2 {
        return Err(invalid(format!("block size r must be at least 2, got {r}")));
    }
    Ok(r * (r - 1) + 1)
}

/// An `r`-subset of `Z_n` whose ordered differences cover each nonzero residue once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceSet {
    modulus: usize,
    residues: Vec<usize>,
}

impl DifferenceSet {
    /// Validates `residues` as a planar difference set modulo `modulus`.
    pub fn new(modulus: usize, mut residues: Vec<usize>) -> Result<Self> {
        if modulus == 0 {
            return Err(invalid("modulus must be positive"));
        }
        residues.sort_unstable();
        residues.dedup();
        if residues.iter().any(|&d| d >= modulus) {
            return Err(invalid(format!("residues must lie in 0..{modulus}")));
        }
        let mut hits = vec![0usize; modulus];
        for &a in &residues {
            for &b in &residues {
                if a != b {
                    hits[(a + modulus - b) % modulus] += 1;
                }
            }
        }
        if let Some(bad) = (1..modulus).find(|&d| hits[d] != 1) {
            return Err(invalid(format!(
                "residue {bad} occurs {} times as a difference mod {modulus}",
                hits[bad]
            )));
        }
        Ok(Self { modulus, residues })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    /// Residues in increasing order.
    pub fn residues(&self) -> &[usize] {
        &self.residues
    }

    pub fn block_size(&self) -> usize {
        self.residues.len()
    }
}

fn is_prime_power(m: usize) -> bool {
    if m < 2 {
        return false;
    }
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            let mut rest = m;
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            return rest == 1;
        }
        p += 1;
    }
    true
}

/// Exhaustive depth-first search for the lexicographically smallest planar
/// difference set of size `r` modulo `r(r-1)+1`. Returns `None` when no
/// such set exists.
///
/// The smallest set always contains 0 (translating any solution by its
/// minimum gives a lexicographically smaller-or-equal one), so the search
/// fixes 0 as the first residue.
pub fn search_planar_difference_set(r: usize) -> Option<Vec<usize>> {
    let n = r.checked_mul(r.checked_sub(1)?)? + 1;
    let mut chosen = vec![0usize];
    let mut used = vec![false; n];
    if extend(n, r, &mut chosen, &mut used) {
        Some(chosen)
    } else {
        None
    }
}

fn extend(n: usize, r: usize, chosen: &mut Vec<usize>, used: &mut [bool]) -> bool {
    if chosen.len() == r {
        return true;
    }
    let start = chosen.last().map_or(0, |&last| last + 1);
    // Leave room for the remaining residues.
    let end = n - (r - chosen.len() - 1);
    for x in start..end {
        let mut marked = Vec::with_capacity(2 * chosen.len());
        let mut ok = true;
        for &d in chosen.iter() {
            let up = (x + n - d) % n;
            let down = (d + n - x) % n;
            if used[up] || used[down] || up == down {
                ok = false;
                break;
            }
            used[up] = true;
            used[down] = true;
            marked.push(up);
            marked.push(down);
        }
        if ok {
            chosen.push(x);
            if extend(n, r, chosen, used) {
                return true;
            }
            chosen.pop();
        }
        for m in marked {
            used[m] = false;
        }
    }
    false
}

/// Planar difference set of size `r`, deterministic in `r`.
pub fn find_planar_difference_set(r: usize) -> Result<DifferenceSet> {
    let n = bibd_order(r)?;
    if r > 2 && !is_prime_power(r - 1) {
        return Err(Error::NoDesignAvailable(format!(
            "a symmetric ({n}, {r}, 1) design needs a projective plane of order r-1 = {}, \
             which is not a prime power",
            r - 1
        )));
    }
    let residues = match CACHED_DIFFERENCE_SETS.get(r - 2) {
        Some(cached) => cached.to_vec(),
        None => search_planar_difference_set(r).ok_or_else(|| {
            Error::NoDesignAvailable(format!(
                "exhaustive search found no planar difference set of size {r} mod {n}"
            ))
        })?,
    };
    DifferenceSet::new(n, residues)
}

/// A block design over the points `0..n`. Blocks are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Design {
    pub n: usize,
    pub r: usize,
    pub blocks: Vec<Vec<usize>>,
}

impl Design {
    /// Builds a design and checks it is a symmetric `(n, r, 1)` BIBD.
    pub fn verified(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let r = blocks.first().map_or(0, Vec::len);
        let blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        let design = Self { n, r, blocks };
        let report = verify_bibd(&design, 1);
        if !report.ok {
            return Err(invalid(format!("not a ({n}, {r}, 1) design: {report}")));
        }
        if bibd_order(r)? != n || design.blocks.len() != n {
            return Err(invalid(format!(
                "a symmetric ({n}, {r}, 1) design needs n = r(r-1)+1 and n blocks"
            )));
        }
        Ok(design)
    }

    /// Symmetric `(r(r-1)+1, r, 1)` design from the cached or searched difference set.
    pub fn for_block_size(r: usize) -> Result<Self> {
        Ok(develop_design(&find_planar_difference_set(r)?))
    }

    pub fn block(&self, i: usize) -> &[usize] {
        &self.blocks[i]
    }

    /// How many blocks contain each point.
    pub fn replication_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for &p in self.blocks.iter().flatten() {
            if p < self.n {
                counts[p] += 1;
            }
        }
        counts
    }
}

/// Cyclic development: block `i` is `{(d + i) mod n : d ∈ D}`.
pub fn develop_design(ds: &DifferenceSet) -> Design {
    let n = ds.modulus();
    let blocks = (0..n)
        .map(|i| {
            let mut b: Vec<usize> = ds.residues().iter().map(|&d| (d + i) % n).collect();
            b.sort_unstable();
            b
        })
        .collect();
    let design = Design {
        n,
        r: ds.block_size(),
        blocks,
    };
    debug_assert!(
        verify_bibd(&design, 1).ok,
        "cyclic development of a valid difference set"
    );
    design
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PointOutOfRange { block: usize, point: usize },
    RepeatedPoint { block: usize, point: usize },
    WrongBlockSize { block: usize, size: usize },
    PairCount { a: usize, b: usize, count: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PointOutOfRange { block, point } => {
                write!(f, "block {block} contains out-of-range point {point}")
            }
            Violation::RepeatedPoint { block, point } => {
                write!(f, "block {block} repeats point {point}")
            }
            Violation::WrongBlockSize { block, size } => {
                write!(f, "block {block} has {size} points")
            }
            Violation::PairCount { a, b, count } => {
                write!(f, "pair {{{a},{b}}} covered {count} times")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks the three BIBD properties: points drawn from `0..d.n`, every
/// block of size `d.r`, and every pair of distinct points in exactly
/// `lambda` blocks. Accepts arbitrary (malformed) input.
pub fn verify_bibd(d: &Design, lambda: usize) -> VerifyReport {
    let n = d.n;
    let mut violations = Vec::new();
    let mut pair_counts = vec![0usize; n * n];
    for (bi, block) in d.blocks.iter().enumerate() {
        if block.len() != d.r {
            violations.push(Violation::WrongBlockSize {
                block: bi,
                size: block.len(),
            });
        }
        let mut seen = vec![false; n];
        let mut members = Vec::with_capacity(block.len());
        for &p in block {
            if p >= n {
                violations.push(Violation::PointOutOfRange {
                    block: bi,
                    point: p,
                });
            } else if seen[p] {
                violations.push(Violation::RepeatedPoint {
                    block: bi,
                    point: p,
                });
            } else {
                seen[p] = true;
                members.push(p);
            }
        }
        for (i, &a) in members.iter().enumerate() {
            for &b in &members[i + 1..] {
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                pair_counts[lo * n + hi] += 1;
            }
        }
    }
    for a in 0..n {
        for b in a + 1..n {
            let count = pair_counts[a * n + b];
            if count != lambda {
                violations.push(Violation::PairCount { a, b, count });
            }
        }
    }
    VerifyReport {
        ok: violations.is_empty(),
        violations,
    }
}
