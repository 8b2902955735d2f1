//! Facet velocities from the averaged Gibbs-Thomson law and integration of
//! the facet-distance ODE.
//!
//! The facet-averaged Gibbs-Thomson balance
//! -int_S sigma = kappa_i H^2 - beta_i V_i H^2 gives
//! V_i = (kappa_i + avg sigma_i) / beta_i (crystal-outward positive).

use crate::energy::{crystalline_curvature, Anisotropy, CurvatureReport};
use crate::error::{Error, Result};
use crate::geometry::CrystalState;

/// Per-facet kinetic coefficients (all strictly positive).
#[derive(Debug, Clone)]
pub struct KineticParams {
    pub beta: Vec<f64>,
}

impl KineticParams {
    pub fn new(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::Config("kinetic coefficients must be positive".into()));
        }
        Ok(Self { beta })
    }

    pub fn uniform(n: usize, beta: f64) -> Result<Self> {
        Self::new(vec![beta; n])
    }
}

/// Normal facet velocities, crystal-outward positive.
#[derive(Debug, Clone)]
pub struct FacetVelocities {
    pub v: Vec<f64>,
}

/// V_i = (kappa_i + avg sigma_i) / beta_i.
pub fn facet_velocity(
    report: &CurvatureReport,
    avg_sigma: &[f64],
    params: &KineticParams,
) -> Result<FacetVelocities> {
    let n = report.kappa.len();
    if avg_sigma.len() != n || params.beta.len() != n {
        return Err(Error::Config(format!(
            "facet count mismatch: kappa {n}, avg {}, beta {}",
            avg_sigma.len(),
            params.beta.len()
        )));
    }
    let v: Vec<f64> = (0..n)
        .map(|i| (report.kappa[i] + avg_sigma[i]) / params.beta[i])
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config("non-finite facet velocity".into()));
    }
    Ok(FacetVelocities { v })
}

/// One forward-Euler step of z; errors with DegenerateGeometry when the
/// advanced state loses a facet (extinction / topology event).
pub fn step_facets(state: &CrystalState, vel: &FacetVelocities, dt: f64) -> Result<CrystalState> {
    let z: Vec<f64> = state
        .z
        .iter()
        .zip(&vel.v)
        .map(|(zi, vi)| zi + dt * vi)
        .collect();
    state.advanced(z)
}

/// One classical RK4 step of dz/dt = rhs(state); used when the velocity is
/// a closed function of z (curvature-only runs).
pub fn rk4_step<F>(state: &CrystalState, dt: f64, rhs: F) -> Result<CrystalState>
where
    F: Fn(&CrystalState) -> Result<Vec<f64>>,
{
    let z0 = &state.z;
    let add = |z: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        z.iter().zip(k).map(|(a, b)| a + c * b).collect()
    };
    let k1 = rhs(state)?;
    let k2 = rhs(&state.advanced(add(z0, &k1, 0.5 * dt))?)?;
    let k3 = rhs(&state.advanced(add(z0, &k2, 0.5 * dt))?)?;
    let k4 = rhs(&state.advanced(add(z0, &k3, dt))?)?;
    let z: Vec<f64> = (0..z0.len())
        .map(|i| z0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    state.advanced(z)
}

/// RHS of pure curvature flow with a uniform ambient supersaturation:
/// dz_i/dt = (kappa_i + sigma) / beta_i.
pub fn curvature_flow_rhs(
    state: &CrystalState,
    aniso: &Anisotropy,
    params: &KineticParams,
    sigma: f64,
) -> Result<Vec<f64>> {
    let rep = crystalline_curvature(state, aniso)?;
    Ok(rep
        .kappa
        .iter()
        .zip(&params.beta)
        .map(|(k, b)| (k + sigma) / b)
        .collect())
}

/// The per-facet supersaturation that makes the facet stationary: -kappa_i.
pub fn equilibrium_supersaturation(state: &CrystalState, aniso: &Anisotropy) -> Result<Vec<f64>> {
    Ok(crystalline_curvature(state, aniso)?
        .kappa
        .iter()
        .map(|k| -k)
        .collect())
}
