//! Reference bases for eigenvector statistics and the change of basis into them.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use serde::{Deserialize, Serialize};

use super::eigen::{symmetric_eigen, SpectrumBundle};
use super::fock::FockBasis;
use super::hamiltonian::build_hamiltonian_with_potential;
use crate::error::{Error, Result};
use crate::lattice::ChainParams;

/// On-site energies that split the free-boson degeneracies on three sites.
pub const PERTURBATION_L3: [f64; 3] = [-0.01, 0.02, -0.03];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Computational,
    Free,
    PerturbedFree,
}

impl BasisKind {
    pub const ALL: [BasisKind; 3] = [BasisKind::Computational, BasisKind::Free, BasisKind::PerturbedFree];

    /// Subscript used for the matching kurtosis, 1 to 3.
    pub fn label(self) -> usize {
        match self {
            BasisKind::Computational => 1,
            BasisKind::Free => 2,
            BasisKind::PerturbedFree => 3,
        }
    }
}

/// Orthogonal matrix whose columns are the basis vectors in Fock coordinates.
#[derive(Debug, Clone)]
pub struct BasisSet {
    pub kind: BasisKind,
    /// `None` stands for the identity.
    pub vectors: Option<Mat<f64>>,
    pub perturbation: Option<Vec<f64>>,
}

pub fn make_basis(kind: BasisKind, params: &ChainParams, basis: &FockBasis) -> Result<BasisSet> {
    match kind {
        BasisKind::Computational => Ok(BasisSet {
            kind,
            vectors: None,
            perturbation: None,
        }),
        BasisKind::Free => {
            let free = params.with_lambda(0.0)?;
            let h = build_hamiltonian_with_potential(basis, &free, None)?;
            let (_, vectors) = symmetric_eigen(&h.to_dense(), true)?;
            Ok(BasisSet {
                kind,
                vectors,
                perturbation: None,
            })
        }
        BasisKind::PerturbedFree => {
            if params.sites() != 3 {
                return Err(Error::InvalidParams(format!(
                    "the perturbed free basis is defined for L=3 only, got L={}",
                    params.sites()
                )));
            }
            let unit = ChainParams::new(3, Some(vec![1.0, 1.0]), 0.0, params.bosons())?;
            let h = build_hamiltonian_with_potential(basis, &unit, Some(&PERTURBATION_L3))?;
            let (_, vectors) = symmetric_eigen(&h.to_dense(), true)?;
            Ok(BasisSet {
                kind,
                vectors,
                perturbation: Some(PERTURBATION_L3.to_vec()),
            })
        }
    }
}

/// Coefficients of every eigenstate in `set`, as columns: `B^T V`.
pub fn coefficients_in_basis(bundle: &SpectrumBundle, set: &BasisSet) -> Result<Mat<f64>> {
    let v = bundle
        .eigenvectors
        .as_ref()
        .ok_or(Error::Undefined("spectrum was computed without eigenvectors"))?;
    let Some(b) = set.vectors.as_ref() else {
        return Ok(v.clone());
    };
    if b.nrows() != v.nrows() {
        return Err(Error::DimensionMismatch {
            expected: v.nrows(),
            actual: b.nrows(),
        });
    }
    let mut out = Mat::<f64>::zeros(b.ncols(), v.ncols());
    matmul(out.as_mut(), Accum::Replace, b.transpose(), v.as_ref(), 1.0, Par::Seq);
    Ok(out)
}
