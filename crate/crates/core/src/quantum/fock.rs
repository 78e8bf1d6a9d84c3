//! Fixed-N occupation-number basis.

use crate::error::{Error, Result};

/// Largest basis we are willing to enumerate; dense work beyond this is hopeless anyway.
const MAX_DIM: u128 = 1 << 32;

/// `binomial(n, k)` in u128, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step.
        acc = acc.checked_mul(u128::from(n - i))? / u128::from(i + 1);
    }
    Some(acc)
}

/// Number of ways to put `bosons` into `sites` modes.
pub fn fock_dimension(bosons: u32, sites: usize) -> Option<u128> {
    if sites == 0 {
        return Some(u128::from(bosons == 0));
    }
    binomial(u64::from(bosons) + sites as u64 - 1, sites as u64 - 1)
}

/// All compositions of `N` into `L` parts, in lexicographically descending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    bosons: u32,
    occupations: Vec<u32>,
    // tail[r][m] = number of compositions of m into r parts
    tail: Vec<Vec<usize>>,
}

impl FockBasis {
    pub fn new(bosons: u32, sites: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidParams("a Fock basis needs at least one site".into()));
        }
        let dim = fock_dimension(bosons, sites)
            .filter(|&d| d <= MAX_DIM)
            .ok_or(Error::DimensionOverflow { n: bosons, l: sites })? as usize;

        let m_max = bosons as usize;
        let mut tail = vec![vec![0usize; m_max + 1]; sites + 1];
        tail[0][0] = 1;
        for r in 1..=sites {
            let mut run = 0usize;
            for m in 0..=m_max {
                run += tail[r - 1][m];
                tail[r][m] = run;
            }
        }

        let mut occupations = Vec::with_capacity(dim * sites);
        let mut current = vec![0u32; sites];
        fill(&mut occupations, &mut current, 0, bosons);
        debug_assert_eq!(occupations.len(), dim * sites);
        Ok(Self {
            sites,
            bosons,
            occupations,
            tail,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn bosons(&self) -> u32 {
        self.bosons
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.sites
    }

    pub fn state(&self, index: usize) -> &[u32] {
        &self.occupations[index * self.sites..(index + 1) * self.sites]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        self.occupations.chunks_exact(self.sites)
    }

    /// Position of an occupation tuple, computed by ranking rather than search.
    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        if occ.len() != self.sites || occ.iter().map(|&n| u64::from(n)).sum::<u64>() != u64::from(self.bosons) {
            return None;
        }
        let mut rank = 0;
        let mut left = self.bosons as usize;
        for (j, &n) in occ[..self.sites - 1].iter().enumerate() {
            let n = n as usize;
            let parts_after = self.sites - j - 1;
            // Tuples sharing the prefix but with a larger entry at j come first.
            if n < left {
                rank += self.tail[parts_after + 1][left - n - 1];
            }
            left -= n;
        }
        Some(rank)
    }
}

fn fill(out: &mut Vec<u32>, current: &mut [u32], site: usize, left: u32) {
    if site + 1 == current.len() {
        current[site] = left;
        out.extend_from_slice(current);
        return;
    }
    for n in (0..=left).rev() {
        current[site] = n;
        fill(out, current, site + 1, left - n);
    }
}
