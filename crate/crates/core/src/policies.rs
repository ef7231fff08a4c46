//! Non-adaptive server selection: random, round-robin and block-design schedules.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::designs::{bibd_order, Design};
use crate::error::{invalid, Result};
use crate::rng::{stream_rng, POLICY_STREAM};

/// Servers chosen for one job, in increasing index order.
pub type Selection = SmallVec<[usize; 8]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Random,
    RoundRobin,
    Bibd,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::Bibd];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::Bibd => "bibd",
        }
    }

    /// Round-robin and BIBD cycle deterministically through a fixed schedule.
    pub fn is_cyclic(self) -> bool {
        !matches!(self, PolicyKind::Random)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "rand" => Ok(PolicyKind::Random),
            "round-robin" | "roundrobin" | "rr" => Ok(PolicyKind::RoundRobin),
            "bibd" => Ok(PolicyKind::Bibd),
            other => Err(format!(
                "unknown policy {other:?} (expected random, round-robin or bibd)"
            )),
        }
    }
}

/// Selector state for one stream of jobs. Not shared across threads.
#[derive(Debug, Clone)]
pub struct PolicyState {
    kind: PolicyKind,
    n: usize,
    r: usize,
    counter: u64,
    design: Option<Design>,
    rng: Option<ChaCha8Rng>,
    // Working permutation for the partial Fisher-Yates draw.
    perm: Vec<usize>,
}

/// Convenience alias for [`PolicyState::new`].
pub fn new_policy(kind: PolicyKind, n: usize, r: usize, seed: u64) -> Result<PolicyState> {
    PolicyState::new(kind, n, r, seed)
}

impl PolicyState {
    /// `seed` only affects [`PolicyKind::Random`]; cyclic policies ignore it.
    pub fn new(kind: PolicyKind, n: usize, r: usize, seed: u64) -> Result<Self> {
        if r == 0 || r > n {
            return Err(invalid(format!("need 1 <= r <= n, got n = {n}, r = {r}")));
        }
        let design = match kind {
            PolicyKind::Bibd => {
                if r < 2 || bibd_order(r)? != n {
                    return Err(invalid(format!(
                        "the bibd policy needs n = r(r-1)+1, got n = {n}, r = {r}"
                    )));
                }
                Some(Design::for_block_size(r)?)
            }
            _ => None,
        };
        let rng = match kind {
            PolicyKind::Random => Some(stream_rng(seed, POLICY_STREAM)),
            _ => None,
        };
        Ok(Self {
            kind,
            n,
            r,
            counter: 0,
            design,
            rng,
            perm: (0..n).collect(),
        })
    }

    /// BIBD policy over a caller-supplied design, which must be a verified
    /// symmetric `(n, r, 1)` design.
    pub fn with_design(design: Design) -> Result<Self> {
        let design = Design::verified(design.n, design.blocks)?;
        let (n, r) = (design.n, design.r);
        Ok(Self {
            kind: PolicyKind::Bibd,
            n,
            r,
            counter: 0,
            design: Some(design),
            rng: None,
            perm: (0..n).collect(),
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// Jobs dispatched so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn design(&self) -> Option<&Design> {
        self.design.as_ref()
    }

    /// Servers for the next job.
    pub fn next_selection(&mut self) -> Selection {
        let (n, r) = (self.n, self.r);
        let mut sel: Selection = match self.kind {
            PolicyKind::Random => {
                let rng = self.rng.as_mut().expect("random policy owns a generator");
                for i in 0..r {
                    let j = rng.random_range(i..n);
                    self.perm.swap(i, j);
                }
                self.perm[..r].iter().copied().collect()
            }
            PolicyKind::RoundRobin => {
                // Job i (1-based) takes ((i-1)r + j) mod n for j = 1..r, shifted to 0-based.
                let base = (self.counter % n as u64) as usize * r;
                (0..r).map(|j| (base + j) % n).collect()
            }
            PolicyKind::Bibd => {
                let design = self.design.as_ref().expect("bibd policy owns a design");
                design
                    .block((self.counter % n as u64) as usize)
                    .iter()
                    .copied()
                    .collect()
            }
        };
        sel.sort_unstable();
        self.counter += 1;
        sel
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn take(p: &mut PolicyState, k: usize) -> Vec<Vec<usize>> {
        (0..k).map(|_| p.next_selection().to_vec()).collect()
    }

    #[test]
    fn round_robin_windows() {
        let mut p = new_policy(PolicyKind::RoundRobin, 7, 3, 0).unwrap();
        assert_eq!(
            take(&mut p, 3),
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![0, 1, 6]]
        );
        assert_eq!(p.counter(), 3);
    }

    #[test]
    fn bibd_cycles_blocks_in_development_order() {
        let mut p = new_policy(PolicyKind::Bibd, 7, 3, 99).unwrap();
        assert_eq!(take(&mut p, 2), vec![vec![0, 1, 3], vec![1, 2, 4]]);
        let rest = take(&mut p, 5);
        assert_eq!(p.next_selection().to_vec(), vec![0, 1, 3]);
        assert_eq!(rest.len(), 5);
    }

    #[test]
    fn full_redundancy_selects_everything() {
        for kind in [PolicyKind::Random, PolicyKind::RoundRobin] {
            let mut p = new_policy(kind, 7, 7, 5).unwrap();
            for _ in 0..20 {
                assert_eq!(p.next_selection().to_vec(), (0..7).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn random_marginals_are_uniform() {
        let mut p = new_policy(PolicyKind::Random, 7, 3, 2024).unwrap();
        let draws = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..draws {
            for s in p.next_selection() {
                counts[s] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 3.0 / 7.0).abs() < 0.01, "freq {freq}");
        }
    }

    #[test]
    fn random_is_reproducible_per_seed() {
        let mut a = new_policy(PolicyKind::Random, 13, 4, 7).unwrap();
        let mut b = new_policy(PolicyKind::Random, 13, 4, 7).unwrap();
        let mut c = new_policy(PolicyKind::Random, 13, 4, 8).unwrap();
        let sa = take(&mut a, 50);
        assert_eq!(sa, take(&mut b, 50));
        assert_ne!(sa, take(&mut c, 50));
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            new_policy(PolicyKind::Random, 3, 4, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            new_policy(PolicyKind::RoundRobin, 3, 0, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            new_policy(PolicyKind::Bibd, 8, 3, 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            new_policy(PolicyKind::Bibd, 43, 7, 0),
            Err(Error::NoDesignAvailable(_))
        ));
    }

    #[test]
    fn custom_design_is_verified() {
        let fano = Design {
            n: 7,
            r: 3,
            blocks: vec![
                vec![0, 1, 2],
                vec![0, 3, 4],
                vec![0, 5, 6],
                vec![1, 3, 5],
                vec![1, 4, 6],
                vec![2, 3, 6],
                vec![2, 4, 5],
            ],
        };
        let mut p = PolicyState::with_design(fano.clone()).unwrap();
        assert_eq!(p.next_selection().to_vec(), vec![0, 1, 2]);
        let mut broken = fano;
        broken.blocks[2] = vec![0, 4, 5];
        assert!(PolicyState::with_design(broken).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!(
            "round-robin".parse::<PolicyKind>(),
            Ok(PolicyKind::RoundRobin)
        );
        assert_eq!("BIBD".parse::<PolicyKind>(), Ok(PolicyKind::Bibd));
        assert!("jsq".parse::<PolicyKind>().is_err());
        for k in PolicyKind::ALL {
            assert_eq!(k.name().parse::<PolicyKind>(), Ok(k));
        }
    }
}
