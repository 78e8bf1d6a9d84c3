//! Discrete nonlinear Schrödinger flow in Cartesian coordinates.
//!
//! A state stores `[x_1..x_L, y_1..y_L]` with `psi_j = x_j + i y_j`. The flow is
//! `i dpsi_j/dt = -(1/2) sum_l J_jl psi_l + lambda |psi_j|^2 psi_j`, which in real
//! coordinates reads `dx/dt = (1/2) dH/dy`, `dy/dt = -(1/2) dH/dx`.

use serde::{Deserialize, Serialize};

use super::integrator::VectorField;
use crate::lattice::ChainParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    pub coords: Vec<f64>,
}

impl ClassicalState {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(
            coords.len() % 2 == 0 && coords.len() >= 4,
            "need 2L coordinates with L >= 2"
        );
        Self { coords }
    }

    /// Builds a state from `(re, im)` site amplitudes.
    pub fn from_amplitudes(amps: &[(f64, f64)]) -> Self {
        let mut coords: Vec<f64> = amps.iter().map(|a| a.0).collect();
        coords.extend(amps.iter().map(|a| a.1));
        Self::new(coords)
    }

    pub fn sites(&self) -> usize {
        self.coords.len() / 2
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.sites()]
    }

    pub fn y(&self) -> &[f64] {
        &self.coords[self.sites()..]
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm_sq().sqrt();
        self.coords.iter_mut().for_each(|c| *c /= n);
        self
    }

    /// Multiplies every amplitude by `exp(i theta)`.
    pub fn rotate_phase(&self, theta: f64) -> Self {
        Self {
            coords: rotate_phase(&self.coords, theta),
        }
    }
}

/// Applies `psi -> exp(i theta) psi` to a `[x.., y..]` vector.
pub fn rotate_phase(v: &[f64], theta: f64) -> Vec<f64> {
    let l = v.len() / 2;
    let (s, c) = theta.sin_cos();
    let mut out = vec![0.0; v.len()];
    for j in 0..l {
        out[j] = c * v[j] - s * v[l + j];
        out[l + j] = s * v[j] + c * v[l + j];
    }
    out
}

/// `out_j = sum_l J_jl v_l` over nearest neighbours of an L-vector.
#[inline]
fn hop(couplings: &[f64], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &c) in couplings.iter().enumerate() {
        out[j] += c * v[j + 1];
        out[j + 1] += c * v[j];
    }
}

/// Classical energy `-(1/2) sum_<jl> J psi_j* psi_l + (lambda/2) sum |psi_j|^4`.
pub fn classical_energy(coords: &[f64], params: &ChainParams) -> f64 {
    let l = coords.len() / 2;
    let (x, y) = coords.split_at(l);
    let hopping: f64 = params.bonds().map(|(j, k, c)| -c * (x[j] * x[k] + y[j] * y[k])).sum();
    let interaction: f64 = (0..l).map(|j| (x[j] * x[j] + y[j] * y[j]).powi(2)).sum();
    hopping + 0.5 * params.lambda() * interaction
}

/// Euclidean gradient of [`classical_energy`] in `[x.., y..]` coordinates.
pub fn energy_gradient(coords: &[f64], params: &ChainParams, grad: &mut [f64]) {
    let l = coords.len() / 2;
    let (x, y) = coords.split_at(l);
    let (gx, gy) = grad.split_at_mut(l);
    hop(params.couplings(), x, gx);
    hop(params.couplings(), y, gy);
    let lam2 = 2.0 * params.lambda();
    for j in 0..l {
        let n = x[j] * x[j] + y[j] * y[j];
        gx[j] = -gx[j] + lam2 * n * x[j];
        gy[j] = -gy[j] + lam2 * n * y[j];
    }
}

/// Time derivative of `coords` under the DNLS flow.
pub fn dnls_rhs(coords: &[f64], params: &ChainParams, out: &mut [f64]) {
    let l = coords.len() / 2;
    let lam = params.lambda();
    let (x, y) = coords.split_at(l);
    let (dx, dy) = out.split_at_mut(l);
    // dx = -(1/2) J y + lambda n y ; dy = (1/2) J x - lambda n x
    hop(params.couplings(), y, dx);
    hop(params.couplings(), x, dy);
    for j in 0..l {
        let n = x[j] * x[j] + y[j] * y[j];
        dx[j] = -0.5 * dx[j] + lam * n * y[j];
        dy[j] = 0.5 * dy[j] - lam * n * x[j];
    }
}

/// Jacobian of [`dnls_rhs`] at `coords` applied to `dev`.
pub fn variational_rhs(coords: &[f64], dev: &[f64], params: &ChainParams, out: &mut [f64]) {
    let l = coords.len() / 2;
    let lam = params.lambda();
    let (x, y) = coords.split_at(l);
    let (u, v) = dev.split_at(l);
    let (du, dv) = out.split_at_mut(l);
    hop(params.couplings(), v, du);
    hop(params.couplings(), u, dv);
    for j in 0..l {
        let n = x[j] * x[j] + y[j] * y[j];
        let dn = 2.0 * (x[j] * u[j] + y[j] * v[j]);
        du[j] = -0.5 * du[j] + lam * (n * v[j] + dn * y[j]);
        dv[j] = 0.5 * dv[j] - lam * (n * u[j] + dn * x[j]);
    }
}

/// The DNLS flow as a [`VectorField`] on `2L` coordinates.
pub struct DnlsField<'a> {
    pub params: &'a ChainParams,
}

impl VectorField for DnlsField<'_> {
    fn dim(&self) -> usize {
        2 * self.params.sites()
    }

    fn eval(&self, y: &[f64], dydt: &mut [f64]) {
        dnls_rhs(y, self.params, dydt);
    }
}

/// State and one tangent vector co-evolved: `[state (2L), deviation (2L)]`.
pub struct TangentField<'a> {
    pub params: &'a ChainParams,
}

impl VectorField for TangentField<'_> {
    fn dim(&self) -> usize {
        4 * self.params.sites()
    }

    fn eval(&self, y: &[f64], dydt: &mut [f64]) {
        let half = 2 * self.params.sites();
        let (state, dev) = y.split_at(half);
        let (ds, dd) = dydt.split_at_mut(half);
        dnls_rhs(state, self.params, ds);
        variational_rhs(state, dev, self.params, dd);
    }
}
