//! Python bindings: crystal geometry, curvature, the field grid and the
//! simulation driver, mirroring the Rust API closely enough to script
//! experiments from Python.

use nalgebra::Vector3;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use facetgrow::dynamics::KineticParams;
use facetgrow::energy;
use facetgrow::field;
use facetgrow::geometry::{self, BasePolygon, CrystalState};
use facetgrow::mapping::{LambdaMap, MappingConfig};
use facetgrow::sim::config::SimConfig;
use facetgrow::sim::runner::{self, RunOutcome};

fn err(e: facetgrow::error::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Surface energy density gamma with k-fold lateral symmetry.
#[pyclass(name = "Anisotropy")]
#[derive(Clone)]
struct PyAnisotropy {
    inner: energy::Anisotropy,
}

#[pymethods]
impl PyAnisotropy {
    #[new]
    fn new(k: usize, gamma_l: f64, gamma_t: f64) -> PyResult<Self> {
        Ok(PyAnisotropy {
            inner: energy::Anisotropy::new(k, gamma_l, gamma_t).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k
    }

    /// gamma evaluated at an arbitrary vector (positively one-homogeneous).
    fn gamma(&self, x: (f64, f64, f64)) -> f64 {
        self.inner.gamma(Vector3::new(x.0, x.1, x.2))
    }

    /// Vertices of the Wulff prism (unit scale) as (x, y, z) triples.
    fn wulff_vertices(&self) -> Vec<(f64, f64, f64)> {
        energy::wulff_shape(&self.inner)
            .vertices(self.inner.k)
            .into_iter()
            .map(|v| (v.x, v.y, v.z))
            .collect()
    }

    /// Vertices of the Frank diagram (the 1/gamma polar plot sampled at
    /// the facet normals).
    fn frank_diagram(&self) -> Vec<(f64, f64, f64)> {
        energy::frank_diagram(&self.inner)
            .into_iter()
            .map(|v| (v.x, v.y, v.z))
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Anisotropy(k={}, gamma_l={}, gamma_t={})",
            self.inner.k, self.inner.gamma_l, self.inner.gamma_t
        )
    }
}

/// A k-gonal prism crystal described by its per-facet normal displacements.
#[pyclass(name = "Crystal")]
#[derive(Clone)]
struct PyCrystal {
    inner: CrystalState,
}

#[pymethods]
impl PyCrystal {
    /// Regular prism with the given in-radius and half-height.
    #[staticmethod]
    fn regular(k: usize, in_radius: f64, half_height: f64) -> PyResult<Self> {
        Ok(PyCrystal {
            inner: CrystalState::initial(
                BasePolygon::regular(k, in_radius, half_height).map_err(err)?,
            ),
        })
    }

    /// The Wulff prism of an anisotropy at a given scale.
    #[staticmethod]
    fn wulff(aniso: &PyAnisotropy, scale: f64) -> PyResult<Self> {
        Ok(PyCrystal {
            inner: energy::wulff_state(&aniso.inner, scale).map_err(err)?,
        })
    }

    /// Same base prism displaced to new facet heights z (length k + 2,
    /// lateral facets first, then top, then bottom).
    fn advanced(&self, z: Vec<f64>) -> PyResult<Self> {
        Ok(PyCrystal {
            inner: self.inner.advanced(z).map_err(err)?,
        })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn n_facets(&self) -> usize {
        self.inner.n_facets()
    }

    #[getter]
    fn z(&self) -> Vec<f64> {
        self.inner.z.clone()
    }

    #[getter]
    fn in_radius(&self) -> f64 {
        self.inner.in_radius()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    fn vertices(&self) -> Vec<(f64, f64)> {
        self.inner.vertices.iter().map(|v| (v.x, v.y)).collect()
    }

    fn facet_normal(&self, i: usize) -> PyResult<(f64, f64, f64)> {
        if i >= self.inner.n_facets() {
            return Err(PyValueError::new_err("facet index out of range"));
        }
        let n = self.inner.facet_normal3(i);
        Ok((n.x, n.y, n.z))
    }

    fn volume(&self) -> PyResult<f64> {
        Ok(geometry::measures(&self.inner).map_err(err)?.volume)
    }

    fn facet_areas(&self) -> PyResult<Vec<f64>> {
        let m = geometry::measures(&self.inner).map_err(err)?;
        Ok((0..self.inner.n_facets())
            .map(|i| m.facet_area(&self.inner, i))
            .collect())
    }

    /// Crystalline mean curvature per facet.
    fn curvature(&self, aniso: &PyAnisotropy) -> PyResult<Vec<f64>> {
        Ok(energy::crystalline_curvature(&self.inner, &aniso.inner)
            .map_err(err)?
            .kappa)
    }

    /// Curvature from the definitional difference quotient at offset a
    /// (Richardson-extrapolated), for cross-checking `curvature`.
    fn curvature_oracle(&self, aniso: &PyAnisotropy, facet: usize, a: f64) -> PyResult<f64> {
        energy::curvature_oracle(&self.inner, &aniso.inner, facet, a).map_err(err)
    }

    fn surface_energy(&self, aniso: &PyAnisotropy) -> PyResult<f64> {
        energy::surface_energy(&self.inner, &aniso.inner).map_err(err)
    }

    /// Explicit curvature-flow step with constant supersaturation sigma.
    fn flow_step(
        &self,
        aniso: &PyAnisotropy,
        beta: Vec<f64>,
        sigma: f64,
        dt: f64,
    ) -> PyResult<Self> {
        let params = KineticParams::new(beta).map_err(err)?;
        let next = facetgrow::dynamics::rk4_step(&self.inner, dt, |s| {
            facetgrow::dynamics::curvature_flow_rhs(s, &aniso.inner, &params, sigma)
        })
        .map_err(err)?;
        Ok(PyCrystal { inner: next })
    }

    /// Evaluate the moving-domain diffeomorphism for displacement z at a
    /// point; returns the image point.
    fn map_point(&self, z: Vec<f64>, x: (f64, f64, f64)) -> PyResult<(f64, f64, f64)> {
        let cfg = MappingConfig::default_for(&self.inner);
        let map = LambdaMap::build(&self.inner, &z, &cfg).map_err(err)?;
        let q = map.apply(Vector3::new(x.0, x.1, x.2));
        Ok((q.x, q.y, q.z))
    }

    fn __repr__(&self) -> String {
        format!(
            "Crystal(k={}, in_radius={:.6}, z={:?})",
            self.inner.k(),
            self.inner.in_radius(),
            self.inner.z
        )
    }
}

/// Supersaturation field on a uniform grid around a crystal.
#[pyclass(name = "FieldGrid")]
struct PyFieldGrid {
    inner: field::FieldGrid,
}

#[pymethods]
impl PyFieldGrid {
    #[new]
    fn new(crystal: &PyCrystal, h: f64, r: f64, sigma_inf: f64) -> PyResult<Self> {
        let n = crystal.inner.n_facets();
        Ok(PyFieldGrid {
            inner: field::build_grid(
                &crystal.inner,
                h,
                r,
                sigma_inf,
                field::DriftSpec::Zero,
                vec![0.0; n],
            )
            .map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn cfl_limit(&self) -> f64 {
        self.inner.cfl_limit()
    }

    fn step(&mut self, dt: f64, t: f64) -> PyResult<()> {
        self.inner.step(dt, t).map_err(err)
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn facet_average(&self, crystal: &PyCrystal, facet: usize) -> PyResult<f64> {
        self.inner.facet_average(&crystal.inner, facet).map_err(err)
    }

    fn interpolate(&self, x: (f64, f64, f64)) -> Option<f64> {
        self.inner.interpolate(Vector3::new(x.0, x.1, x.2))
    }
}

/// Run a full simulation from a TOML config string. Returns a dict with
/// the outcome, the final facet heights and the time series columns.
#[pyfunction]
#[pyo3(signature = (config_toml, output_dir=None, quiet=true))]
fn run_simulation(
    py: Python<'_>,
    config_toml: &str,
    output_dir: Option<&str>,
    quiet: bool,
) -> PyResult<PyObject> {
    let config = SimConfig::from_toml(config_toml).map_err(err)?;
    let result = runner::run(&config, output_dir.map(std::path::Path::new), quiet).map_err(err)?;
    let dict = pyo3::types::PyDict::new_bound(py);
    match result.outcome {
        RunOutcome::Completed => {
            dict.set_item("outcome", "completed")?;
        }
        RunOutcome::Extinct { t } => {
            dict.set_item("outcome", "extinct")?;
            dict.set_item("extinction_time", t)?;
        }
    }
    dict.set_item("final_z", result.final_state.z.clone())?;
    let recs = &result.series.records;
    dict.set_item("t", recs.iter().map(|r| r.t).collect::<Vec<_>>())?;
    dict.set_item("volume", recs.iter().map(|r| r.volume).collect::<Vec<_>>())?;
    dict.set_item(
        "surface_energy",
        recs.iter().map(|r| r.surface_energy).collect::<Vec<_>>(),
    )?;
    dict.set_item("z", recs.iter().map(|r| r.z.clone()).collect::<Vec<_>>())?;
    dict.set_item("v", recs.iter().map(|r| r.v.clone()).collect::<Vec<_>>())?;
    dict.set_item(
        "avg_sigma",
        recs.iter().map(|r| r.avg_sigma.clone()).collect::<Vec<_>>(),
    )?;
    Ok(dict.into())
}

#[pymodule]
fn facetgrow_py(_py: Python, m: &Bound<PyModule>) -> PyResult<()> {
    m.add_class::<PyAnisotropy>()?;
    m.add_class::<PyCrystal>()?;
    m.add_class::<PyFieldGrid>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    Ok(())
}
