//! Admissible prism crystals parameterized by per-facet signed distances.
//!
//! A crystal is a prism over a convex polygon. Facets can only move parallel
//! to themselves, so the whole state is the vector `z` of signed distances
//! (positive = outward growth) of the k lateral facets plus top and bottom.
//! Vertices are reconstructed by intersecting the offset supporting lines of
//! consecutive edges.
//!
//! Facet indexing: `0..k` lateral counterclockwise, `k` = top, `k+1` = bottom.

use nalgebra::{Vector2, Vector3};

use crate::energy::Anisotropy;
use crate::error::{Error, Result};

/// Relative edge-length threshold below which a state counts as degenerate.
pub const EDGE_EPS_FACTOR: f64 = 1e-9;
/// Angular tolerance for matching facet normals (radians).
pub const ANGLE_TOL: f64 = 1e-9;
/// Relative tolerance for boundary point classification.
pub const BOUNDARY_TOL_FACTOR: f64 = 1e-12;

/// Rotate a planar vector by +90 degrees (CCW edge direction from an
/// outward normal).
fn perp(n: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-n.y, n.x)
}

/// The initial prism: base polygon W(0) and half-height, so
/// Omega_0 = W(0) x [-half_height, half_height].
#[derive(Debug, Clone)]
pub struct BasePolygon {
    pub k: usize,
    pub vertices0: Vec<Vector2<f64>>,
    pub normals: Vec<Vector2<f64>>,
    pub half_height0: f64,
}

impl BasePolygon {
    /// Build from a CCW-ordered convex vertex list; normals are derived
    /// from the edges. Edge i runs from vertex i to vertex i+1.
    pub fn new(vertices0: Vec<Vector2<f64>>, half_height0: f64) -> Result<Self> {
        let k = vertices0.len();
        if k < 3 {
            return Err(Error::Config(format!("need at least 3 vertices, got {k}")));
        }
        if half_height0 <= 0.0 {
            return Err(Error::Config("half height must be positive".into()));
        }
        let mut normals = Vec::with_capacity(k);
        for i in 0..k {
            let e = vertices0[(i + 1) % k] - vertices0[i];
            let len = e.norm();
            if len <= 0.0 {
                return Err(Error::Config(format!("zero-length edge {i}")));
            }
            // outward normal of a CCW polygon
            normals.push(Vector2::new(e.y, -e.x) / len);
        }
        let poly = Self {
            k,
            vertices0,
            normals,
            half_height0,
        };
        poly.validate()?;
        Ok(poly)
    }

    /// Regular k-gon with lateral facet normals at angles 2*pi*j/k and the
    /// given in-radius, as a prism of the given half-height.
    pub fn regular(k: usize, in_radius: f64, half_height: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::Config(format!("k must be >= 3, got {k}")));
        }
        if in_radius <= 0.0 {
            return Err(Error::Config("in-radius must be positive".into()));
        }
        let normals: Vec<Vector2<f64>> = (0..k)
            .map(|j| {
                let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                Vector2::new(th.cos(), th.sin())
            })
            .collect();
        // vertex i = intersection of supporting lines of edges i-1 and i
        let mut vertices0 = Vec::with_capacity(k);
        for i in 0..k {
            let a = normals[(i + k - 1) % k];
            let b = normals[i];
            vertices0.push(intersect_lines(a, in_radius, b, in_radius)?);
        }
        Self::new(vertices0, half_height)
    }

    fn validate(&self) -> Result<()> {
        let k = self.k;
        for i in 0..k {
            let e = self.vertices0[(i + 1) % k] - self.vertices0[i];
            let n = self.normals[i];
            if (n.norm() - 1.0).abs() > 1e-12 || n.dot(&e).abs() > 1e-9 * e.norm() {
                return Err(Error::Config(format!("normal {i} inconsistent with edge")));
            }
            // convexity: CCW turn at every vertex
            let e_prev = self.vertices0[i] - self.vertices0[(i + k - 1) % k];
            let cross = e_prev.x * e.y - e_prev.y * e.x;
            if cross <= 0.0 {
                return Err(Error::Config(format!("polygon not strictly convex at vertex {i}")));
            }
        }
        // 0 must lie strictly inside W(0)
        for i in 0..k {
            if self.support0(i) <= 0.0 {
                return Err(Error::Config("origin not strictly inside base polygon".into()));
            }
        }
        Ok(())
    }

    /// Support value of edge i's line: vertices on the line satisfy x.n = support0(i).
    pub fn support0(&self, i: usize) -> f64 {
        self.vertices0[i].dot(&self.normals[i])
    }

    /// Diameter of the initial prism (max vertex-to-vertex distance in 3-D).
    pub fn diameter0(&self) -> f64 {
        let mut planar: f64 = 0.0;
        for i in 0..self.k {
            for j in (i + 1)..self.k {
                planar = planar.max((self.vertices0[i] - self.vertices0[j]).norm());
            }
        }
        (planar * planar + 4.0 * self.half_height0 * self.half_height0).sqrt()
    }
}

fn intersect_lines(
    n1: Vector2<f64>,
    d1: f64,
    n2: Vector2<f64>,
    d2: f64,
) -> Result<Vector2<f64>> {
    let det = n1.x * n2.y - n1.y * n2.x;
    if det.abs() < 1e-14 {
        return Err(Error::DegenerateGeometry("parallel supporting lines".into()));
    }
    Ok(Vector2::new(
        (d1 * n2.y - d2 * n1.y) / det,
        (n1.x * d2 - n2.x * d1) / det,
    ))
}

/// Intersect the offset supporting lines of consecutive edges. Vertex i is
/// the intersection of line i-1 (offset z[i-1]) and line i (offset z[i]).
pub fn reconstruct_vertices(base: &BasePolygon, z_lateral: &[f64]) -> Result<Vec<Vector2<f64>>> {
    let k = base.k;
    assert_eq!(z_lateral.len(), k, "need one offset per lateral facet");
    let mut vertices = Vec::with_capacity(k);
    for i in 0..k {
        let p = (i + k - 1) % k;
        vertices.push(intersect_lines(
            base.normals[p],
            base.support0(p) + z_lateral[p],
            base.normals[i],
            base.support0(i) + z_lateral[i],
        )?);
    }
    // every reconstructed edge must keep strictly positive signed length
    let eps = EDGE_EPS_FACTOR * base.diameter0();
    for i in 0..k {
        let t = perp(base.normals[i]);
        let signed_len = (vertices[(i + 1) % k] - vertices[i]).dot(&t);
        if signed_len <= eps {
            return Err(Error::DegenerateGeometry(format!(
                "lateral facet {i} vanished (signed edge length {signed_len:.3e})"
            )));
        }
    }
    Ok(vertices)
}

/// The current crystal: base polygon plus the signed-distance vector `z`
/// (length k+2; lateral 0..k, then top, then bottom) and the geometry
/// reconstructed from it.
#[derive(Debug, Clone)]
pub struct CrystalState {
    pub base: BasePolygon,
    pub z: Vec<f64>,
    pub vertices: Vec<Vector2<f64>>,
    /// Current top height L_T = half_height0 + z_top.
    pub l_t: f64,
    /// Current bottom height L_B = -half_height0 - z_bottom.
    pub l_b: f64,
}

impl CrystalState {
    pub fn initial(base: BasePolygon) -> Self {
        let z = vec![0.0; base.k + 2];
        let vertices = base.vertices0.clone();
        let l_t = base.half_height0;
        let l_b = -base.half_height0;
        Self {
            base,
            z,
            vertices,
            l_t,
            l_b,
        }
    }

    pub fn with_z(base: BasePolygon, z: Vec<f64>) -> Result<Self> {
        if z.len() != base.k + 2 {
            return Err(Error::Config(format!(
                "z must have {} entries, got {}",
                base.k + 2,
                z.len()
            )));
        }
        let vertices = reconstruct_vertices(&base, &z[..base.k])?;
        let l_t = base.half_height0 + z[base.k];
        let l_b = -base.half_height0 - z[base.k + 1];
        let eps = EDGE_EPS_FACTOR * base.diameter0();
        if l_t - l_b <= eps {
            return Err(Error::DegenerateGeometry(format!(
                "height collapsed (L_T - L_B = {:.3e})",
                l_t - l_b
            )));
        }
        Ok(Self {
            base,
            z,
            vertices,
            l_t,
            l_b,
        })
    }

    /// Replace z, keeping the base. Errors if the result is degenerate.
    pub fn advanced(&self, z: Vec<f64>) -> Result<Self> {
        Self::with_z(self.base.clone(), z)
    }

    pub fn k(&self) -> usize {
        self.base.k
    }

    /// Total facet count k+2.
    pub fn n_facets(&self) -> usize {
        self.base.k + 2
    }

    pub fn top_index(&self) -> usize {
        self.base.k
    }

    pub fn bottom_index(&self) -> usize {
        self.base.k + 1
    }

    /// Crystal-outward unit normal of facet i in 3-D.
    pub fn facet_normal3(&self, i: usize) -> Vector3<f64> {
        if i == self.top_index() {
            Vector3::new(0.0, 0.0, 1.0)
        } else if i == self.bottom_index() {
            Vector3::new(0.0, 0.0, -1.0)
        } else {
            let n = self.base.normals[i];
            Vector3::new(n.x, n.y, 0.0)
        }
    }

    /// Current support value of lateral edge i.
    pub fn support(&self, i: usize) -> f64 {
        self.base.support0(i) + self.z[i]
    }

    /// Smallest current lateral support distance from the origin.
    pub fn in_radius(&self) -> f64 {
        (0..self.base.k)
            .map(|i| self.support(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Diameter of the initial crystal (tolerance scale).
    pub fn diameter0(&self) -> f64 {
        self.base.diameter0()
    }

    /// Diameter of the current crystal.
    pub fn diameter(&self) -> f64 {
        let mut planar: f64 = 0.0;
        for i in 0..self.k() {
            for j in (i + 1)..self.k() {
                planar = planar.max((self.vertices[i] - self.vertices[j]).norm());
            }
        }
        let h = self.l_t - self.l_b;
        (planar * planar + h * h).sqrt()
    }

    /// A point on facet i (for plane offsets).
    pub fn facet_point(&self, i: usize) -> Vector3<f64> {
        if i == self.top_index() {
            Vector3::new(0.0, 0.0, self.l_t)
        } else if i == self.bottom_index() {
            Vector3::new(0.0, 0.0, self.l_b)
        } else {
            let v = self.vertices[i];
            Vector3::new(v.x, v.y, 0.5 * (self.l_t + self.l_b))
        }
    }

    /// Euclidean distance from a point to (the closure of) facet i.
    pub fn distance_to_facet(&self, i: usize, x: Vector3<f64>) -> f64 {
        let p = Vector2::new(x.x, x.y);
        if i == self.top_index() || i == self.bottom_index() {
            let height = if i == self.top_index() { self.l_t } else { self.l_b };
            let dz = x.z - height;
            let inside = (0..self.k()).all(|j| p.dot(&self.base.normals[j]) <= self.support(j));
            if inside {
                dz.abs()
            } else {
                let db = self.planar_boundary_distance(p);
                (db * db + dz * dz).sqrt()
            }
        } else {
            let t = perp(self.base.normals[i]);
            let v = self.vertices[i];
            let len = (self.vertices[(i + 1) % self.k()] - v).dot(&t);
            let s = (p - v).dot(&t).clamp(0.0, len);
            let foot = v + t * s;
            let planar2 = (p - foot).norm_squared();
            let dz = if x.z > self.l_t {
                x.z - self.l_t
            } else if x.z < self.l_b {
                self.l_b - x.z
            } else {
                0.0
            };
            (planar2 + dz * dz).sqrt()
        }
    }

    fn planar_boundary_distance(&self, p: Vector2<f64>) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % self.k()];
            let ab = b - a;
            let s = ((p - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
            best = best.min((p - (a + ab * s)).norm());
        }
        best
    }
}

/// Lengths, areas, angles and volume evaluated from the reconstructed state.
#[derive(Debug, Clone)]
pub struct FacetMeasures {
    pub edge_lengths: Vec<f64>,
    pub lateral_areas: Vec<f64>,
    pub top_area: f64,
    /// Interior angle at vertex j (between edges j-1 and j).
    pub interior_angles: Vec<f64>,
    /// Prism height l = L_T - L_B.
    pub height: f64,
    pub volume: f64,
}

impl FacetMeasures {
    /// Area of facet i (lateral, top, or bottom).
    pub fn facet_area(&self, state: &CrystalState, i: usize) -> f64 {
        if i == state.top_index() || i == state.bottom_index() {
            self.top_area
        } else {
            self.lateral_areas[i]
        }
    }
}

pub fn measures(state: &CrystalState) -> Result<FacetMeasures> {
    let k = state.k();
    let eps = EDGE_EPS_FACTOR * state.diameter0();
    let height = state.l_t - state.l_b;
    if height <= eps {
        return Err(Error::DegenerateGeometry("height collapsed".into()));
    }
    let mut edge_lengths = Vec::with_capacity(k);
    let mut interior_angles = Vec::with_capacity(k);
    let mut area2 = 0.0;
    for i in 0..k {
        let v = state.vertices[i];
        let w = state.vertices[(i + 1) % k];
        let t = perp(state.base.normals[i]);
        let len = (w - v).dot(&t);
        if len <= eps {
            return Err(Error::DegenerateGeometry(format!("edge {i} vanished")));
        }
        edge_lengths.push(len);
        area2 += v.x * w.y - w.x * v.y;

        let e_prev = v - state.vertices[(i + k - 1) % k];
        let e_next = w - v;
        let turn = (e_prev.x * e_next.y - e_prev.y * e_next.x)
            .atan2(e_prev.dot(&e_next));
        interior_angles.push(std::f64::consts::PI - turn);
    }
    let top_area = 0.5 * area2;
    let lateral_areas = edge_lengths.iter().map(|l| l * height).collect();
    Ok(FacetMeasures {
        edge_lengths,
        lateral_areas,
        top_area,
        interior_angles,
        height,
        volume: top_area * height,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointLocation {
    Inside,
    Outside,
    /// On the boundary (within tolerance), assigned to the nearest facet.
    Boundary(usize),
}

/// Classify a 3-D point against the current crystal. Exact off the boundary;
/// points within `BOUNDARY_TOL_FACTOR * diameter` of the boundary are
/// assigned the facet with the largest signed distance.
pub fn point_classification(state: &CrystalState, x: Vector3<f64>) -> PointLocation {
    let tol = BOUNDARY_TOL_FACTOR * state.diameter0();
    let p = Vector2::new(x.x, x.y);
    let mut sd_max = f64::NEG_INFINITY;
    let mut facet = 0;
    for i in 0..state.k() {
        let sd = p.dot(&state.base.normals[i]) - state.support(i);
        if sd > sd_max {
            sd_max = sd;
            facet = i;
        }
    }
    let sd_top = x.z - state.l_t;
    if sd_top > sd_max {
        sd_max = sd_top;
        facet = state.top_index();
    }
    let sd_bot = state.l_b - x.z;
    if sd_bot > sd_max {
        sd_max = sd_bot;
        facet = state.bottom_index();
    }
    if sd_max > tol {
        PointLocation::Outside
    } else if sd_max < -tol {
        PointLocation::Inside
    } else {
        PointLocation::Boundary(facet)
    }
}

/// Result of checking the crystal's normal set against the Wulff shape's.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub pass: bool,
    /// Crystal facet normals with no Wulff counterpart.
    pub unmatched_crystal: Vec<Vector3<f64>>,
    /// Wulff facet normals with no crystal counterpart.
    pub unmatched_wulff: Vec<Vector3<f64>>,
}

/// The crystal is admissible iff its facet normal set coincides with the
/// Wulff shape's facet normal set (within `ANGLE_TOL`).
pub fn admissibility_check(state: &CrystalState, aniso: &Anisotropy) -> AdmissibilityReport {
    let crystal: Vec<Vector3<f64>> = (0..state.n_facets())
        .map(|i| state.facet_normal3(i))
        .collect();
    let wulff = crate::energy::wulff_shape(aniso).normals;
    let mut used = vec![false; wulff.len()];
    let mut unmatched_crystal = Vec::new();
    for n in &crystal {
        let mut found = false;
        for (j, w) in wulff.iter().enumerate() {
            // chord distance ~ angle for small angles, without acos noise
            if !used[j] && (n - w).norm() <= ANGLE_TOL {
                used[j] = true;
                found = true;
                break;
            }
        }
        if !found {
            unmatched_crystal.push(*n);
        }
    }
    let unmatched_wulff: Vec<Vector3<f64>> = wulff
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(w, _)| *w)
        .collect();
    AdmissibilityReport {
        pass: unmatched_crystal.is_empty() && unmatched_wulff.is_empty(),
        unmatched_crystal,
        unmatched_wulff,
    }
}
