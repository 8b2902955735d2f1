//! Anisotropic surface energy: density gamma, Frank diagram, Wulff shape,
//! total surface energy, and crystalline curvature.
//!
//! gamma is the piecewise-linear k-fold symmetric density whose Frank
//! diagram {gamma <= 1} is a bipyramid: a regular k-gon in the plane plus
//! apexes at (0,0,+-1/gamma_t). The dual Wulff shape is a prism with
//! in-radius gamma_l and half-height gamma_t whose lateral facet normals
//! point along the angles 2*pi*j/k.
//!
//! The crystalline curvature of facet i is the facet-averaged quantity
//! kappa_i = -lim_{a->0} dE/dV under translation of facet i; the closed
//! form below is checked against that definition by `curvature_oracle`.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{measures, BasePolygon, CrystalState};

/// Surface energy density parameters: planar symmetry order k, lateral
/// density gamma_l, top/bottom density gamma_t.
#[derive(Debug, Clone, Copy)]
pub struct Anisotropy {
    pub k: usize,
    pub gamma_l: f64,
    pub gamma_t: f64,
}

impl Anisotropy {
    pub fn new(k: usize, gamma_l: f64, gamma_t: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::Config(format!("symmetry order k must be >= 3, got {k}")));
        }
        if gamma_l <= 0.0 || gamma_t <= 0.0 {
            return Err(Error::Config("energy densities must be positive".into()));
        }
        Ok(Self { k, gamma_l, gamma_t })
    }

    /// Evaluate gamma(x). Positively 1-homogeneous; piecewise linear per
    /// planar sector plus |x3| * gamma_t.
    pub fn gamma(&self, x: Vector3<f64>) -> f64 {
        self.gamma_planar(Vector2::new(x.x, x.y)) + x.z.abs() * self.gamma_t
    }

    /// Planar part: gauge of the regular k-gon Frank cross-section, i.e.
    /// max over the sector-bisector directions m_j of x.m_j / cos(pi/k),
    /// scaled so gamma(facet normal) = gamma_l.
    fn gamma_planar(&self, p: Vector2<f64>) -> f64 {
        let k = self.k as f64;
        let half = std::f64::consts::PI / k;
        let mut best: f64 = 0.0;
        for j in 0..self.k {
            let th = (2.0 * j as f64 + 1.0) * half;
            best = best.max(p.x * th.cos() + p.y * th.sin());
        }
        self.gamma_l * best / half.cos()
    }
}

/// The Wulff shape of a k-fold planar anisotropy: a prism with regular
/// k-gonal base.
#[derive(Debug, Clone)]
pub struct WulffPrism {
    pub in_radius: f64,
    pub half_height: f64,
    pub side: f64,
    /// k lateral facet normals followed by top and bottom.
    pub normals: Vec<Vector3<f64>>,
}

impl WulffPrism {
    /// Base polygon of the Wulff prism scaled by `scale`.
    pub fn base_polygon(&self, k: usize, scale: f64) -> Result<BasePolygon> {
        BasePolygon::regular(k, self.in_radius * scale, self.half_height * scale)
    }

    /// The 3-D vertices of the prism (top ring then bottom ring).
    pub fn vertices(&self, k: usize) -> Vec<Vector3<f64>> {
        let base = BasePolygon::regular(k, self.in_radius, self.half_height)
            .expect("wulff parameters are valid");
        let mut out = Vec::with_capacity(2 * k);
        for v in &base.vertices0 {
            out.push(Vector3::new(v.x, v.y, self.half_height));
        }
        for v in &base.vertices0 {
            out.push(Vector3::new(v.x, v.y, -self.half_height));
        }
        out
    }
}

/// Wulff shape of the anisotropy: lateral in-radius gamma_l, half-height
/// gamma_t, lateral facet normals at angles 2*pi*j/k.
pub fn wulff_shape(aniso: &Anisotropy) -> WulffPrism {
    let k = aniso.k;
    let mut normals: Vec<Vector3<f64>> = (0..k)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            Vector3::new(th.cos(), th.sin(), 0.0)
        })
        .collect();
    normals.push(Vector3::new(0.0, 0.0, 1.0));
    normals.push(Vector3::new(0.0, 0.0, -1.0));
    WulffPrism {
        in_radius: aniso.gamma_l,
        half_height: aniso.gamma_t,
        side: 2.0 * aniso.gamma_l * (std::f64::consts::PI / k as f64).tan(),
        normals,
    }
}

/// Crystal state shaped like the Wulff prism scaled by `scale`.
pub fn wulff_state(aniso: &Anisotropy, scale: f64) -> Result<CrystalState> {
    let w = wulff_shape(aniso);
    Ok(CrystalState::initial(w.base_polygon(aniso.k, scale)?))
}

/// Vertices of the Frank diagram {gamma <= 1}: a bipyramid with a regular
/// k-gon waist at radius 1/gamma_l (vertex directions 2*pi*j/k) and apexes
/// at (0,0,+-1/gamma_t).
pub fn frank_diagram(aniso: &Anisotropy) -> Vec<Vector3<f64>> {
    let k = aniso.k;
    let mut out: Vec<Vector3<f64>> = (0..k)
        .map(|j| {
            let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            Vector3::new(th.cos() / aniso.gamma_l, th.sin() / aniso.gamma_l, 0.0)
        })
        .collect();
    out.push(Vector3::new(0.0, 0.0, 1.0 / aniso.gamma_t));
    out.push(Vector3::new(0.0, 0.0, -1.0 / aniso.gamma_t));
    out
}

/// Total surface energy E = sum_i gamma(n_i) * area_i. Exact for flat facets.
pub fn surface_energy(state: &CrystalState, aniso: &Anisotropy) -> Result<f64> {
    let m = measures(state)?;
    let mut e = 0.0;
    for i in 0..state.n_facets() {
        e += aniso.gamma(state.facet_normal3(i)) * m.facet_area(state, i);
    }
    Ok(e)
}

/// Per-facet crystalline curvatures plus the energy and volume they were
/// evaluated from.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub kappa: Vec<f64>,
    pub surface_energy: f64,
    pub volume: f64,
}

/// Closed-form crystalline curvature of every facet.
///
/// Top/bottom: kappa = -sum_j l_j gamma(n_j) / area(S_T).
/// Lateral j: kappa_j = -(1/l_j) [ (cot a_j + cot a_{j+1}) gamma(n_j)
///   + gamma(n_{j-1})/sin a_j + gamma(n_{j+1})/sin a_{j+1} ]
///   - (2/l) gamma(n_T),
/// where a_j is the interior angle at vertex j and l the prism height.
/// The sign of the height term follows the dE/dV definition (the
/// definitional oracle enforces it).
pub fn crystalline_curvature(state: &CrystalState, aniso: &Anisotropy) -> Result<CurvatureReport> {
    let m = measures(state)?;
    let k = state.k();
    let mut kappa = vec![0.0; k + 2];

    let gam: Vec<f64> = (0..k)
        .map(|j| aniso.gamma(state.facet_normal3(j)))
        .collect();
    let gam_t = aniso.gamma(Vector3::new(0.0, 0.0, 1.0));

    let perimeter_energy: f64 = (0..k).map(|j| m.edge_lengths[j] * gam[j]).sum();
    kappa[state.top_index()] = -perimeter_energy / m.top_area;
    kappa[state.bottom_index()] = kappa[state.top_index()];

    for j in 0..k {
        let a_j = m.interior_angles[j];
        let a_j1 = m.interior_angles[(j + 1) % k];
        let own = (1.0 / a_j.tan() + 1.0 / a_j1.tan()) * gam[j];
        let prev = gam[(j + k - 1) % k] / a_j.sin();
        let next = gam[(j + 1) % k] / a_j1.sin();
        kappa[j] = -(own + prev + next) / m.edge_lengths[j] - 2.0 * gam_t / m.height;
    }

    Ok(CurvatureReport {
        kappa,
        surface_energy: surface_energy(state, aniso)?,
        volume: m.volume,
    })
}

/// Definitional curvature estimate: -(E(z_i + a) - E(z_i)) / (V(z_i + a) - V(z_i)),
/// Richardson-extrapolated over a and a/2 to remove the O(a) bias.
pub fn curvature_oracle(
    state: &CrystalState,
    aniso: &Anisotropy,
    facet: usize,
    a: f64,
) -> Result<f64> {
    let k1 = curvature_quotient(state, aniso, facet, a)?;
    let k2 = curvature_quotient(state, aniso, facet, 0.5 * a)?;
    Ok(2.0 * k2 - k1)
}

/// Single-step difference quotient -(dE/dV) for a translation of facet i by a.
pub fn curvature_quotient(
    state: &CrystalState,
    aniso: &Anisotropy,
    facet: usize,
    a: f64,
) -> Result<f64> {
    let m0 = measures(state)?;
    let e0 = surface_energy(state, aniso)?;
    let mut z = state.z.clone();
    z[facet] += a;
    let moved = state.advanced(z)?;
    let m1 = measures(&moved)?;
    let e1 = surface_energy(&moved, aniso)?;
    Ok(-(e1 - e0) / (m1.volume - m0.volume))
}
