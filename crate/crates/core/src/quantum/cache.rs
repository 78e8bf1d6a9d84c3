//! On-disk spectrum cache keyed by a content hash of the chain parameters.
//!
//! File layout, little-endian: magic, dimension `u64`, vector flag `u8`, the
//! eigenvalues, then the eigenvector matrix column by column when present.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use faer::Mat;
use sha2::{Digest, Sha256};

use super::eigen::{spectrum, SpectrumBundle};
use super::fock::fock_dimension;
use crate::error::{Error, Result};
use crate::lattice::ChainParams;

const MAGIC: &[u8; 8] = b"BHSPEC01";

/// Hex digest of `(L, couplings, lambda, N)` by exact bit patterns.
pub fn spectrum_key(params: &ChainParams) -> String {
    let mut h = Sha256::new();
    h.update((params.sites() as u64).to_le_bytes());
    for c in params.couplings() {
        h.update(c.to_bits().to_le_bytes());
    }
    h.update(params.lambda().to_bits().to_le_bytes());
    h.update(params.bosons().to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn path_for(&self, params: &ChainParams) -> PathBuf {
        self.dir.join(format!("{}.bin", spectrum_key(params)))
    }

    /// Cached spectrum, if one exists that carries vectors when they are needed.
    pub fn load(&self, params: &ChainParams, need_vectors: bool) -> Result<Option<SpectrumBundle>> {
        let path = self.path_for(params);
        if !path.exists() {
            return Ok(None);
        }
        let bundle = read_bundle(&path, params)?;
        if need_vectors && !bundle.has_vectors() {
            return Ok(None);
        }
        Ok(Some(bundle))
    }

    pub fn store(&self, bundle: &SpectrumBundle) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(&bundle.params);
        let tmp = path.with_extension("tmp");
        write_bundle(&tmp, bundle)?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Loads or computes and stores.
    pub fn get_or_compute(&self, params: &ChainParams, with_vectors: bool) -> Result<SpectrumBundle> {
        if let Some(b) = self.load(params, with_vectors)? {
            return Ok(b);
        }
        let bundle = spectrum(params, with_vectors)?;
        self.store(&bundle)?;
        Ok(bundle)
    }
}

fn write_bundle(path: &Path, bundle: &SpectrumBundle) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    put(MAGIC)?;
    put(&(bundle.dim() as u64).to_le_bytes())?;
    put(&[u8::from(bundle.has_vectors())])?;
    for e in &bundle.eigenvalues {
        put(&e.to_le_bytes())?;
    }
    if let Some(v) = &bundle.eigenvectors {
        for k in 0..v.ncols() {
            for x in v.col_as_slice(k) {
                put(&x.to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_bundle(path: &Path, params: &ChainParams) -> Result<SpectrumBundle> {
    let corrupt = |reason: &str| Error::Cache {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| corrupt("truncated header"))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word).map_err(|_| corrupt("truncated header"))?;
    let dim = u64::from_le_bytes(word);
    if Some(u128::from(dim)) != fock_dimension(params.bosons(), params.sites()) {
        return Err(corrupt("dimension does not match the parameters"));
    }
    let dim = dim as usize;
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag).map_err(|_| corrupt("truncated header"))?;
    let mut next = || -> Result<f64> {
        r.read_exact(&mut word).map_err(|_| corrupt("truncated body"))?;
        Ok(f64::from_le_bytes(word))
    };
    let eigenvalues = (0..dim).map(|_| next()).collect::<Result<Vec<_>>>()?;
    let eigenvectors = if flag[0] == 1 {
        let mut v = Mat::<f64>::zeros(dim, dim);
        for k in 0..dim {
            for x in v.col_as_slice_mut(k) {
                *x = next()?;
            }
        }
        Some(v)
    } else {
        None
    };
    Ok(SpectrumBundle {
        params: params.clone(),
        eigenvalues,
        eigenvectors,
    })
}
