//! Sparse assembly of the Bose-Hubbard Hamiltonian in the Fock basis.

use faer::Mat;

use super::fock::FockBasis;
use crate::error::{Error, Result};
use crate::lattice::ChainParams;

/// Symmetric matrix in compressed-row form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius norm, used to scale residual checks.
    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (c, v) in self.row(i) {
                m[(i, c)] = v;
            }
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| self.row(i).all(|(c, v)| self.get(c, i).to_bits() == v.to_bits()))
    }
}

/// `-J/2 sqrt(k)` with `k` the integer occupation product, so both triangles match bitwise.
fn hop_amplitude(coupling: f64, occupation_product: u64) -> f64 {
    -0.5 * coupling * (occupation_product as f64).sqrt()
}

/// Adds `sum_j eps_j n_j` on top of the hopping and interaction terms.
pub fn build_hamiltonian_with_potential(
    basis: &FockBasis,
    params: &ChainParams,
    potential: Option<&[f64]>,
) -> Result<SparseSym> {
    if basis.sites() != params.sites() || basis.bosons() != params.bosons() {
        return Err(Error::InvalidParams(format!(
            "basis is (N={}, L={}) but parameters are (N={}, L={})",
            basis.bosons(),
            basis.sites(),
            params.bosons(),
            params.sites()
        )));
    }
    if let Some(eps) = potential {
        if eps.len() != params.sites() {
            return Err(Error::DimensionMismatch {
                expected: params.sites(),
                actual: eps.len(),
            });
        }
    }
    let u = params.onsite_u();
    let mut scratch = vec![0u32; basis.sites()];
    let mut rows = Vec::with_capacity(basis.dim());
    for (i, occ) in basis.iter().enumerate() {
        let mut row = Vec::with_capacity(2 * basis.sites() - 1);
        let pairs: u64 = occ.iter().map(|&n| u64::from(n) * u64::from(n.saturating_sub(1))).sum();
        let mut diag = 0.5 * u * pairs as f64;
        if let Some(eps) = potential {
            diag += occ.iter().zip(eps).map(|(&n, e)| e * f64::from(n)).sum::<f64>();
        }
        row.push((i, diag));
        for (j, k, coupling) in params.bonds() {
            // a_to^dagger a_from for both directions across the bond.
            for (to, from) in [(j, k), (k, j)] {
                if occ[from] == 0 {
                    continue;
                }
                scratch.copy_from_slice(occ);
                scratch[from] -= 1;
                scratch[to] += 1;
                let target = basis.index_of(&scratch).expect("hop stays in the basis");
                let product = u64::from(occ[from]) * u64::from(occ[to] + 1);
                row.push((target, hop_amplitude(coupling, product)));
            }
        }
        rows.push(row);
    }
    Ok(SparseSym::from_rows(rows))
}

/// The Hamiltonian with `U = lambda / N`.
pub fn build_hamiltonian(basis: &FockBasis, params: &ChainParams) -> Result<SparseSym> {
    build_hamiltonian_with_potential(basis, params, None)
}
