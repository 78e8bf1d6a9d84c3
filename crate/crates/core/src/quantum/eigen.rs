//! Full dense symmetric eigendecomposition.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::{Mat, Par};

use super::fock::FockBasis;
use super::hamiltonian::{build_hamiltonian, SparseSym};
use crate::error::{Error, Result};
use crate::lattice::ChainParams;

/// Ascending eigenvalues and, optionally, the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectrumBundle {
    pub params: ChainParams,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Mat<f64>>,
}

impl SpectrumBundle {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fock-basis coefficients of eigenstate `k`.
    pub fn eigenvector(&self, k: usize) -> Option<&[f64]> {
        self.eigenvectors.as_ref().map(|v| v.col_as_slice(k))
    }

    pub fn has_vectors(&self) -> bool {
        self.eigenvectors.is_some()
    }
}

/// Eigen-decomposes the lower triangle of a dense symmetric matrix.
///
/// Runs single-threaded so results do not depend on the machine's core count.
pub fn symmetric_eigen(matrix: &Mat<f64>, with_vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: matrix.ncols(),
        });
    }
    if n == 0 {
        return Ok((Vec::new(), with_vectors.then(|| Mat::zeros(0, 0))));
    }
    let compute = if with_vectors {
        ComputeEigenvectors::Yes
    } else {
        ComputeEigenvectors::No
    };
    let par = Par::Seq;
    let mut values = Mat::<f64>::zeros(n, 1);
    let mut vectors = with_vectors.then(|| Mat::<f64>::zeros(n, n));
    let mut mem = MemBuffer::new(self_adjoint_evd_scratch::<f64>(n, compute, par, Default::default()));
    self_adjoint_evd(
        matrix.as_ref(),
        values.col_mut(0).as_diagonal_mut(),
        vectors.as_mut().map(|v| v.as_mut()),
        par,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|_| Error::EigenConvergence)?;
    let eigenvalues: Vec<f64> = values.col_as_slice(0).to_vec();
    if eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::EigenConvergence);
    }
    Ok((eigenvalues, vectors))
}

pub fn diagonalize(h: &SparseSym, params: &ChainParams, with_vectors: bool) -> Result<SpectrumBundle> {
    let (eigenvalues, eigenvectors) = symmetric_eigen(&h.to_dense(), with_vectors)?;
    Ok(SpectrumBundle {
        params: params.clone(),
        eigenvalues,
        eigenvectors,
    })
}

/// Basis, Hamiltonian and decomposition in one go.
pub fn spectrum(params: &ChainParams, with_vectors: bool) -> Result<SpectrumBundle> {
    let basis = FockBasis::new(params.bosons(), params.sites())?;
    let h = build_hamiltonian(&basis, params)?;
    diagonalize(&h, params, with_vectors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { 3.0 } else { 0.5 });
        let (vals, vecs) = symmetric_eigen(&m, true).unwrap();
        assert!((vals[0] - 2.5).abs() < 1e-14 && (vals[1] - 3.5).abs() < 1e-14);
        let v = vecs.unwrap();
        assert!((v[(0, 0)].abs() - 0.5f64.sqrt()).abs() < 1e-14);
    }

    /// Eigenvalues of `sum_k m_k mu_k` over occupations of the one-particle modes.
    fn free_boson_levels(mu: &[f64], n: u32) -> Vec<f64> {
        let modes = FockBasis::new(n, mu.len()).unwrap();
        let mut levels: Vec<f64> = modes
            .iter()
            .map(|m| m.iter().zip(mu).map(|(&k, e)| f64::from(k) * e).sum())
            .collect();
        levels.sort_by(f64::total_cmp);
        levels
    }

    #[test]
    fn free_spectrum_is_built_from_one_particle_levels() {
        // Eigenvalues of the 3x3 matrix with off-diagonals -0.75 and -0.5.
        let r = (0.75f64 * 0.75 + 0.25).sqrt();
        let mu = [-r, 0.0, r];
        for n in 1..=6 {
            let p = ChainParams::three_site(0.0, n).unwrap();
            let s = spectrum(&p, false).unwrap();
            let want = free_boson_levels(&mu, n);
            assert_eq!(s.dim(), want.len());
            for (a, b) in s.eigenvalues.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10, "N={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn decomposition_is_accurate() {
        let p = ChainParams::three_site(2.48, 20).unwrap();
        let basis = FockBasis::new(20, 3).unwrap();
        let h = build_hamiltonian(&basis, &p).unwrap();
        let s = diagonalize(&h, &p, true).unwrap();
        let d = s.dim();
        let sum: f64 = s.eigenvalues.iter().sum();
        assert!((sum - h.trace()).abs() <= 1e-10 * h.trace().abs().max(1.0));
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let mut hv = vec![0.0; d];
        for k in 0..d {
            let v = s.eigenvector(k).unwrap();
            h.matvec(v, &mut hv);
            let res: f64 = hv.iter().zip(v).map(|(a, b)| (a - s.eigenvalues[k] * b).powi(2)).sum();
            assert!(res.sqrt() < 1e-8 * h.frobenius());
            for m in 0..d {
                let dot: f64 = v.iter().zip(s.eigenvector(m).unwrap()).map(|(a, b)| a * b).sum();
                let want = if m == k { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn strong_coupling_levels_sit_near_interaction_energies() {
        let p = ChainParams::three_site(1e4, 20).unwrap();
        let basis = FockBasis::new(20, 3).unwrap();
        let h = build_hamiltonian(&basis, &p).unwrap();
        let s = diagonalize(&h, &p, false).unwrap();
        let mut diag: Vec<f64> = (0..basis.dim()).map(|i| h.get(i, i)).collect();
        diag.sort_by(f64::total_cmp);
        // Weyl: sorted levels move by at most the norm of the hopping part, which
        // is bounded by its largest absolute row sum and is far below U.
        let hop_norm = (0..basis.dim())
            .map(|i| h.row(i).filter(|&(c, _)| c != i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(hop_norm < 0.1 * p.onsite_u());
        for (a, b) in s.eigenvalues.iter().zip(&diag) {
            assert!((a - b).abs() <= hop_norm, "{a} vs {b}");
        }
    }
}
