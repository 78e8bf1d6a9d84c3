//! Eigenstate expectation values of the scaled hopping `a_2^dagger a_1 / N`.

use super::eigen::SpectrumBundle;
use super::fock::FockBasis;
use crate::error::{Error, Result};

/// Nonzero entries `(row, col, value)` of `a_2^dagger a_1 / N` in the Fock basis.
pub fn hopping_observable(basis: &FockBasis) -> Result<Vec<(usize, usize, f64)>> {
    if basis.sites() < 2 {
        return Err(Error::InvalidParams("the hopping observable needs two sites".into()));
    }
    let n = f64::from(basis.bosons().max(1));
    let mut scratch = vec![0u32; basis.sites()];
    let mut entries = Vec::with_capacity(basis.dim());
    for (col, occ) in basis.iter().enumerate() {
        if occ[0] == 0 {
            continue;
        }
        scratch.copy_from_slice(occ);
        scratch[0] -= 1;
        scratch[1] += 1;
        let row = basis.index_of(&scratch).expect("hop stays in the basis");
        let amp = (f64::from(occ[0]) * f64::from(occ[1] + 1)).sqrt() / n;
        entries.push((row, col, amp));
    }
    Ok(entries)
}

/// `<v| (A + A^T)/2 |v>` for every eigenvector `v`, in eigenvalue order.
pub fn eev_hopping(bundle: &SpectrumBundle, basis: &FockBasis) -> Result<Vec<f64>> {
    let vectors = bundle
        .eigenvectors
        .as_ref()
        .ok_or(Error::Undefined("spectrum was computed without eigenvectors"))?;
    if vectors.nrows() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            actual: vectors.nrows(),
        });
    }
    let a = hopping_observable(basis)?;
    Ok((0..vectors.ncols())
        .map(|k| {
            let v = vectors.col_as_slice(k);
            // For real v both orderings of the Hermitian part give the same sum.
            a.iter().map(|&(r, c, x)| x * v[r] * v[c]).sum()
        })
        .collect())
}
