//! TOML configuration schema. Unknown keys are rejected everywhere and a
//! parsed config serializes back to an equivalent document.

use serde::{Deserialize, Serialize};

use crate::dynamics::KineticParams;
use crate::energy::{wulff_state, Anisotropy};
use crate::error::{Error, Result};
use crate::field::DriftSpec;
use crate::geometry::{BasePolygon, CrystalState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub anisotropy: AnisotropySection,
    pub crystal: CrystalSection,
    pub kinetics: KineticsSection,
    pub boundary: BoundarySection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub coupling: CouplingMode,
    #[serde(default)]
    pub picard: PicardSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnisotropySection {
    pub k: usize,
    pub gamma_l: f64,
    pub gamma_t: f64,
}

/// Initial shape: the Wulff prism at a given scale, or an explicit regular
/// prism (admissible only if its normals match the Wulff prism's, which
/// `regular` guarantees for the same k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum CrystalSection {
    Wulff { scale: f64 },
    Prism { in_radius: f64, half_height: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum KineticsSection {
    Uniform { beta: f64 },
    PerFacet { beta_per_facet: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub sigma_inf: f64,
    #[serde(default)]
    pub flux: FluxSection,
    #[serde(default)]
    pub drift: DriftSection,
}

/// Per-facet Neumann data g, constant in time or linearly ramped from zero
/// over `ramp_time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxSection {
    Zero,
    Constant { values: Vec<f64> },
    Ramp { values: Vec<f64>, ramp_time: f64 },
}

impl Default for FluxSection {
    fn default() -> Self {
        FluxSection::Zero
    }
}

impl FluxSection {
    pub fn at(&self, t: f64, n_facets: usize) -> Result<Vec<f64>> {
        match self {
            FluxSection::Zero => Ok(vec![0.0; n_facets]),
            FluxSection::Constant { values } => {
                if values.len() != n_facets {
                    return Err(Error::Config(format!(
                        "flux values must have {n_facets} entries"
                    )));
                }
                Ok(values.clone())
            }
            FluxSection::Ramp { values, ramp_time } => {
                if values.len() != n_facets {
                    return Err(Error::Config(format!(
                        "flux values must have {n_facets} entries"
                    )));
                }
                if !(*ramp_time > 0.0) {
                    return Err(Error::Config("ramp_time must be positive".into()));
                }
                let f = (t / ramp_time).min(1.0);
                Ok(values.iter().map(|v| v * f).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSection {
    Zero,
    Constant { v: [f64; 3] },
    Shear { rate: f64 },
}

impl Default for DriftSection {
    fn default() -> Self {
        DriftSection::Zero
    }
}

impl DriftSection {
    pub fn to_spec(&self) -> DriftSpec {
        match self {
            DriftSection::Zero => DriftSpec::Zero,
            DriftSection::Constant { v } => {
                DriftSpec::Constant(nalgebra::Vector3::new(v[0], v[1], v[2]))
            }
            DriftSection::Shear { rate } => DriftSpec::Shear { rate: *rate },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Cell size.
    pub h: f64,
    /// Box half-width; must be at least 3 x the crystal diameter.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    pub dt: f64,
    /// Fraction of the CFL bound the field step may use; dt is rejected if
    /// it exceeds safety x limit.
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
}

fn default_cfl_safety() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingMode {
    /// Lie splitting: field step, then facet ODE step, then re-mask.
    Splitting,
    /// Windowed successive approximation.
    Picard,
    /// Dynamics only; the field is never solved (sigma = sigma_inf).
    Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSection {
    pub window: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Bounded retries with a halved window on degeneracy or stagnation.
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn default_retries() -> usize {
    4
}

impl Default for PicardSection {
    fn default() -> Self {
        PicardSection {
            window: 0.1,
            tol: 1e-10,
            max_iters: 30,
            max_retries: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Record every n-th step.
    pub cadence: usize,
    /// Write a field snapshot alongside every m-th record (0 = never).
    pub snapshot_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            cadence: 1,
            snapshot_every: 0,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn anisotropy(&self) -> Result<Anisotropy> {
        Anisotropy::new(
            self.anisotropy.k,
            self.anisotropy.gamma_l,
            self.anisotropy.gamma_t,
        )
    }

    pub fn initial_state(&self) -> Result<CrystalState> {
        let aniso = self.anisotropy()?;
        match &self.crystal {
            CrystalSection::Wulff { scale } => wulff_state(&aniso, *scale),
            CrystalSection::Prism {
                in_radius,
                half_height,
            } => Ok(CrystalState::initial(BasePolygon::regular(
                self.anisotropy.k,
                *in_radius,
                *half_height,
            )?)),
        }
    }

    pub fn kinetics(&self, n_facets: usize) -> Result<KineticParams> {
        match &self.kinetics {
            KineticsSection::Uniform { beta } => KineticParams::uniform(n_facets, *beta),
            KineticsSection::PerFacet { beta_per_facet } => {
                if beta_per_facet.len() != n_facets {
                    return Err(Error::Config(format!(
                        "beta_per_facet must have {n_facets} entries"
                    )));
                }
                KineticParams::new(beta_per_facet.clone())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let state = self.initial_state()?;
        let n = state.n_facets();
        self.kinetics(n)?;
        self.boundary.flux.at(0.0, n)?;
        if !(self.grid.h > 0.0) {
            return Err(Error::Config("grid.h must be positive".into()));
        }
        if self.grid.r < 3.0 * state.diameter() {
            return Err(Error::Config(format!(
                "grid.r must be at least 3 x diameter = {}",
                3.0 * state.diameter()
            )));
        }
        if !(self.time.dt > 0.0 && self.time.t_end > 0.0) {
            return Err(Error::Config("time.dt and time.t_end must be positive".into()));
        }
        if !(self.time.cfl_safety > 0.0 && self.time.cfl_safety <= 1.0) {
            return Err(Error::Config("time.cfl_safety must lie in (0, 1]".into()));
        }
        if self.coupling == CouplingMode::Picard {
            let p = &self.picard;
            if !(p.window > 0.0 && p.tol > 0.0 && p.max_iters >= 2) {
                return Err(Error::Config("invalid picard section".into()));
            }
        }
        if self.output.cadence == 0 {
            return Err(Error::Config("output.cadence must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"
coupling = "splitting"

[anisotropy]
k = 6
gamma_l = 1.0
gamma_t = 1.0

[crystal]
shape = "wulff"
scale = 1.0

[kinetics]
beta = 1.0

[boundary]
sigma_inf = 0.5

[boundary.flux]
law = "constant"
values = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.1]

[boundary.drift]
kind = "shear"
rate = 0.2

[grid]
h = 0.2
r = 10.0

[time]
t_end = 0.1
dt = 0.005

[output]
cadence = 2
snapshot_every = 0
"#
    }

    #[test]
    fn parse_validate_roundtrip() {
        let cfg = SimConfig::from_toml(sample()).unwrap();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let cfg2 = SimConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, cfg2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = sample().replace("[grid]", "[grid]\nbogus = 1");
        assert!(SimConfig::from_toml(&bad).is_err());
        let bad2 = format!("{}\nunknown_top = 3\n", sample());
        assert!(SimConfig::from_toml(&bad2).is_err());
    }

    #[test]
    fn flux_ramp_law() {
        let f = FluxSection::Ramp {
            values: vec![1.0; 8],
            ramp_time: 2.0,
        };
        assert_eq!(f.at(0.0, 8).unwrap()[0], 0.0);
        assert_eq!(f.at(1.0, 8).unwrap()[0], 0.5);
        assert_eq!(f.at(5.0, 8).unwrap()[0], 1.0);
    }

    #[test]
    fn margin_validation() {
        let mut cfg = SimConfig::from_toml(sample()).unwrap();
        cfg.grid.r = 1.0;
        assert!(cfg.validate().is_err());
    }
}
