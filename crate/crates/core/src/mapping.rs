//! Diffeomorphism Lambda from the initial exterior domain onto the current
//! one, assembled as a vertical rescale-and-shift (Phi) followed by the
//! time-1 flow of a sector-interpolated planar vector field (Psi).
//!
//! Lambda is the identity, exactly, once max(planar radius, |x3|) reaches
//! 7 x diameter, which covers everything beyond the 10 x diameter ball.
//! Construction invariant that the verification suite leans on: near each
//! lateral facet the planar field's normal component equals z_i at every
//! point, so the time-1 flow translates the facet plane by exactly z_i.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::CrystalState;
use crate::smoothstep::{ramp, smoothstep};

/// Blend radii for the far-field cut-offs, in units of the diameter.
const FAR_INNER: f64 = 3.5;
const FAR_OUTER: f64 = 7.0;

#[derive(Debug, Clone)]
pub struct MappingConfig {
    /// Vertical blend margin for Phi.
    pub delta_v: f64,
    /// Planar cut-off width (band depth inside the initial polygon where
    /// the flow field is faded out above and below the slab).
    pub eps_p: f64,
    /// RK4 substeps of the time-1 flow.
    pub n_flow: usize,
}

impl MappingConfig {
    pub fn default_for(state0: &CrystalState) -> Self {
        let m = crate::geometry::measures(state0).expect("non-degenerate initial state");
        let min_edge = m.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        MappingConfig {
            delta_v: 0.5 * state0.base.half_height0,
            eps_p: 0.4 * min_edge,
            n_flow: 64,
        }
    }

    pub fn validate(&self, state0: &CrystalState) -> Result<()> {
        if !(self.delta_v > 0.0) {
            return Err(Error::Config("delta_v must be positive".into()));
        }
        let m = crate::geometry::measures(state0)?;
        let min_edge = m.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.eps_p > 0.0 && self.eps_p < 0.5 * min_edge) {
            return Err(Error::Config(format!(
                "eps_p must lie in (0, {}), got {}",
                0.5 * min_edge,
                self.eps_p
            )));
        }
        if self.n_flow < 16 {
            return Err(Error::Config("n_flow must be at least 16".into()));
        }
        let diam = state0.diameter0();
        if state0.base.half_height0 + 2.0 * self.delta_v >= FAR_INNER * diam {
            return Err(Error::Config(
                "delta_v too large for the far-field blend bands".into(),
            ));
        }
        Ok(())
    }
}

/// Sampled Jacobian determinant of Lambda at a point.
#[derive(Debug, Clone)]
pub struct JacobianSample {
    pub point: Vector3<f64>,
    pub j: f64,
    /// False once the point is past every cut-off (Lambda = Id there).
    pub inside_support: bool,
}

/// Vertical map: linear rescale of the crystal's height range onto
/// [L_B(z), L_T(z)], blending to rigid shifts and then to the identity.
/// The whole vertical displacement is additionally faded out in the planar
/// radius so the 3-D map is the identity far away sideways too.
#[derive(Debug, Clone)]
pub struct VerticalMap {
    half_height: f64,
    z_t: f64,
    z_b: f64,
    delta: f64,
    diam: f64,
}

impl VerticalMap {
    pub fn build(state0: &CrystalState, z_t: f64, z_b: f64, cfg: &MappingConfig) -> Result<Self> {
        cfg.validate(state0)?;
        if z_t.abs() >= 0.5 * cfg.delta_v || z_b.abs() >= 0.5 * cfg.delta_v {
            return Err(Error::Config(format!(
                "top/bottom displacements ({z_t}, {z_b}) must stay below delta_v/2 = {}",
                0.5 * cfg.delta_v
            )));
        }
        Ok(VerticalMap {
            half_height: state0.base.half_height0,
            z_t,
            z_b,
            delta: cfg.delta_v,
            diam: state0.diameter0(),
        })
    }

    /// The pure vertical profile (before the planar fade-out).
    pub fn profile(&self, s: f64) -> f64 {
        let hh = self.half_height;
        let (lt, lb) = (hh + self.z_t, -hh - self.z_b);
        let lin = |s: f64| 0.5 * (lt + lb) + 0.5 * (lt - lb) / hh * s;
        let fade = |s_abs: f64| 1.0 - ramp(s_abs, FAR_INNER * self.diam, FAR_OUTER * self.diam);
        if s.abs() <= hh {
            lin(s)
        } else if s > 0.0 {
            if s >= hh + 2.0 * self.delta {
                s + self.z_t * fade(s)
            } else {
                let w = smoothstep((s - hh) / (2.0 * self.delta));
                (1.0 - w) * lin(s) + w * (s + self.z_t)
            }
        } else if s <= -hh - 2.0 * self.delta {
            s - self.z_b * fade(-s)
        } else {
            let w = smoothstep((-s - hh) / (2.0 * self.delta));
            (1.0 - w) * lin(s) + w * (s - self.z_b)
        }
    }

    /// Vertical image at planar radius `rho`.
    pub fn apply(&self, rho: f64, s: f64) -> f64 {
        let zeta = 1.0 - ramp(rho, FAR_INNER * self.diam, FAR_OUTER * self.diam);
        if zeta == 0.0 {
            s
        } else {
            s + zeta * (self.profile(s) - s)
        }
    }
}

/// Planar map: time-1 flow of the sector field. In the wedge between the
/// rays through initial vertices i and i+1 the field interpolates the two
/// vertex displacements with a smoothstep of the normalized angle, which
/// keeps the facet-normal component constant near every facet.
#[derive(Debug, Clone)]
pub struct PlanarFlow {
    vertices0: Vec<Vector2<f64>>,
    angles0: Vec<f64>,
    /// Vertex displacements w_i = v_i(z) - v_i(0).
    w: Vec<Vector2<f64>>,
    normals: Vec<Vector2<f64>>,
    supports0: Vec<f64>,
    eps_p: f64,
    diam: f64,
    n_flow: usize,
}

impl PlanarFlow {
    pub fn build(state0: &CrystalState, z: &[f64], cfg: &MappingConfig) -> Result<Self> {
        cfg.validate(state0)?;
        let k = state0.k();
        if z.len() != state0.n_facets() {
            return Err(Error::Config(format!(
                "expected {} displacements, got {}",
                state0.n_facets(),
                z.len()
            )));
        }
        let current = state0.advanced(z.to_vec())?;
        let w: Vec<Vector2<f64>> = (0..k)
            .map(|i| current.vertices[i] - state0.vertices[i])
            .collect();
        let angles0: Vec<f64> = state0.vertices.iter().map(|v| v.y.atan2(v.x)).collect();
        Ok(PlanarFlow {
            vertices0: state0.vertices.clone(),
            angles0,
            w,
            normals: state0.base.normals.clone(),
            supports0: (0..k).map(|i| state0.base.support0(i)).collect(),
            eps_p: cfg.eps_p,
            diam: state0.diameter0(),
            n_flow: cfg.n_flow,
        })
    }

    /// Sector interpolation of the vertex displacements at planar point p.
    fn xi(&self, p: Vector2<f64>) -> Vector2<f64> {
        let k = self.vertices0.len();
        if p.norm() < 1e-12 * self.diam {
            return self.w[0];
        }
        let theta = p.y.atan2(p.x);
        let two_pi = 2.0 * std::f64::consts::PI;
        for i in 0..k {
            let a = self.angles0[i];
            let mut b = self.angles0[(i + 1) % k];
            let mut t = theta;
            if b <= a {
                b += two_pi;
            }
            if t < a {
                t += two_pi;
            }
            if t >= a && t <= b {
                let tt = (t - a) / (b - a);
                // transition confined to the middle third of the sector
                let tau = smoothstep((tt - 1.0 / 3.0) * 3.0);
                return (1.0 - tau) * self.w[i] + tau * self.w[(i + 1) % k];
            }
        }
        self.w[0]
    }

    /// Depth of p inside the initial base polygon (0 outside).
    fn inside_depth(&self, p: Vector2<f64>) -> f64 {
        let mut d = f64::INFINITY;
        for (n, s) in self.normals.iter().zip(&self.supports0) {
            d = d.min(s - p.dot(n));
        }
        d.max(0.0)
    }

    /// Scalar modulation of the field at planar point p and height s.
    ///
    /// The polygon-interior cut-off eta applies at every height: points of
    /// the exterior domain never sit deeper than |z| <= eps_p / 3 inside
    /// the initial polygon, where eta = 1, so the flow acts at full
    /// strength everywhere it matters. Deeper inside (the planar interior
    /// of the top and bottom facets) the field fades to zero, which keeps
    /// the sector interpolation away from its angular singularity at the
    /// origin and the flow fold-free.
    fn factor(&self, p: Vector2<f64>, s: f64) -> f64 {
        let rho = p.norm();
        let zeta_p = 1.0 - ramp(rho, FAR_INNER * self.diam, FAR_OUTER * self.diam);
        if zeta_p == 0.0 {
            return 0.0;
        }
        let zeta_v = 1.0 - ramp(s.abs(), FAR_INNER * self.diam, FAR_OUTER * self.diam);
        if zeta_v == 0.0 {
            return 0.0;
        }
        let depth = self.inside_depth(p);
        let eta = 1.0 - ramp(depth, self.eps_p / 3.0, 2.0 * self.eps_p / 3.0);
        zeta_p * zeta_v * eta
    }

    pub fn field(&self, p: Vector2<f64>, s: f64) -> Vector2<f64> {
        let f = self.factor(p, s);
        if f == 0.0 {
            Vector2::zeros()
        } else {
            f * self.xi(p)
        }
    }

    /// Time-1 RK4 flow of the field at fixed height s.
    pub fn apply(&self, p: Vector2<f64>, s: f64) -> Vector2<f64> {
        let dt = 1.0 / self.n_flow as f64;
        let mut x = p;
        for _ in 0..self.n_flow {
            let k1 = self.field(x, s);
            let k2 = self.field(x + 0.5 * dt * k1, s);
            let k3 = self.field(x + 0.5 * dt * k2, s);
            let k4 = self.field(x + dt * k3, s);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        x
    }
}

/// The assembled map Lambda = Psi o Phi together with the data needed for
/// Jacobian sampling and facet pullbacks.
#[derive(Debug, Clone)]
pub struct LambdaMap {
    pub phi: VerticalMap,
    pub psi: PlanarFlow,
    pub state0: CrystalState,
    pub current: CrystalState,
    pub diam: f64,
}

impl LambdaMap {
    /// Builds both stages and runs a coarse positivity screen on the
    /// sampled Jacobian near the crystal.
    pub fn build(state0: &CrystalState, z: &[f64], cfg: &MappingConfig) -> Result<LambdaMap> {
        let k = state0.k();
        let phi = VerticalMap::build(state0, z[k], z[k + 1], cfg)?;
        let psi = PlanarFlow::build(state0, z, cfg)?;
        let current = state0.advanced(z.to_vec())?;
        let map = LambdaMap {
            phi,
            psi,
            state0: state0.clone(),
            current,
            diam: state0.diameter0(),
        };
        for sample in map.screen_points() {
            let j = map.jacobian(sample);
            if !(j.j > 0.0) {
                return Err(Error::Flow(format!(
                    "non-positive Jacobian {} sampled at {:?}",
                    j.j, sample
                )));
            }
        }
        Ok(map)
    }

    fn screen_points(&self) -> Vec<Vector3<f64>> {
        let d = self.diam;
        let mut pts = Vec::new();
        for &r in &[0.6 * d, 1.2 * d, 4.0 * d] {
            for a in 0..6 {
                let th = a as f64 * std::f64::consts::PI / 3.0 + 0.21;
                for &s in &[0.0, 0.8 * d, -1.5 * d] {
                    pts.push(Vector3::new(r * th.cos(), r * th.sin(), s));
                }
            }
        }
        pts
    }

    pub fn apply(&self, x: Vector3<f64>) -> Vector3<f64> {
        let p = Vector2::new(x.x, x.y);
        let s = self.phi.apply(p.norm(), x.z);
        let q = self.psi.apply(p, s);
        Vector3::new(q.x, q.y, s)
    }

    pub fn inside_support(&self, x: Vector3<f64>) -> bool {
        let rho = (x.x * x.x + x.y * x.y).sqrt();
        rho < FAR_OUTER * self.diam && x.z.abs() < FAR_OUTER * self.diam
    }

    /// |det D Lambda| by central differences, step 1e-6 x diameter.
    pub fn jacobian(&self, x: Vector3<f64>) -> JacobianSample {
        let h = 1e-6 * self.diam;
        let rho = (x.x * x.x + x.y * x.y).sqrt();
        if rho - h >= FAR_OUTER * self.diam || x.z.abs() - h >= FAR_OUTER * self.diam {
            // Lambda is the identity on the whole stencil
            return JacobianSample {
                point: x,
                j: 1.0,
                inside_support: false,
            };
        }
        let mut cols = [Vector3::zeros(); 3];
        for d in 0..3 {
            let mut e = Vector3::zeros();
            e[d] = h;
            cols[d] = (self.apply(x + e) - self.apply(x - e)) / (2.0 * h);
        }
        let det = cols[0].dot(&cols[1].cross(&cols[2]));
        JacobianSample {
            point: x,
            j: det.abs(),
            inside_support: self.inside_support(x),
        }
    }
}

/// Integrates `integrand(Lambda(x))` times the surface Jacobian of Lambda
/// restricted to initial facet `facet`, over that facet. With integrand 1
/// this returns the area of the current facet.
pub fn pullback_facet_integral<F>(
    map: &LambdaMap,
    facet: usize,
    integrand: F,
    n_quad: usize,
) -> Result<f64>
where
    F: Fn(Vector3<f64>) -> f64 + Sync,
{
    use rayon::prelude::*;
    let state0 = &map.state0;
    let h_t = 1e-6 * map.diam;
    let surf = |x0: Vector3<f64>, tu: Vector3<f64>, tv: Vector3<f64>| -> f64 {
        let du = (map.apply(x0 + h_t * tu) - map.apply(x0 - h_t * tu)) / (2.0 * h_t);
        let dv = (map.apply(x0 + h_t * tv) - map.apply(x0 - h_t * tv)) / (2.0 * h_t);
        du.cross(&dv).norm()
    };
    let k = state0.k();
    if facet < k {
        let v0 = state0.vertices[facet];
        let v1 = state0.vertices[(facet + 1) % k];
        let len = (v1 - v0).norm();
        let height = 2.0 * state0.base.half_height0;
        let tu3 = Vector3::new((v1.x - v0.x) / len, (v1.y - v0.y) / len, 0.0);
        let tv3 = Vector3::new(0.0, 0.0, 1.0);
        let cell = (len / n_quad as f64) * (height / n_quad as f64);
        let total: f64 = (0..n_quad * n_quad)
            .into_par_iter()
            .map(|id| {
                let (a, b) = (id / n_quad, id % n_quad);
                let su = (a as f64 + 0.5) / n_quad as f64;
                let sv = (b as f64 + 0.5) / n_quad as f64;
                let e = v0 + (v1 - v0) * su;
                let x0 = Vector3::new(e.x, e.y, -state0.base.half_height0 + sv * height);
                integrand(map.apply(x0)) * surf(x0, tu3, tv3) * cell
            })
            .sum();
        Ok(total)
    } else {
        let s = if facet == state0.top_index() {
            state0.base.half_height0
        } else {
            -state0.base.half_height0
        };
        // fan triangulation from the centroid, centroid rule per subcell
        let centroid: Vector2<f64> =
            state0.vertices.iter().sum::<Vector2<f64>>() / k as f64;
        let m = n_quad;
        let tu3 = Vector3::new(1.0, 0.0, 0.0);
        let tv3 = Vector3::new(0.0, 1.0, 0.0);
        let mut total = 0.0;
        for tri in 0..k {
            let a = state0.vertices[tri];
            let b = state0.vertices[(tri + 1) % k];
            let area2 = ((a - centroid).x * (b - centroid).y
                - (a - centroid).y * (b - centroid).x)
                .abs();
            let sub_area = 0.5 * area2 / (m * m) as f64;
            // uniform subdivision into m^2 subtriangles, centroid rule
            let part: f64 = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    let mut eval = |u: f64, v: f64| {
                        let q = centroid + u * (a - centroid) + v * (b - centroid);
                        let x0 = Vector3::new(q.x, q.y, s);
                        acc += integrand(map.apply(x0)) * surf(x0, tu3, tv3) * sub_area;
                    };
                    let mf = m as f64;
                    for j in 0..(m - i) {
                        eval((i as f64 + 1.0 / 3.0) / mf, (j as f64 + 1.0 / 3.0) / mf);
                        if i + j < m - 1 {
                            eval((i as f64 + 2.0 / 3.0) / mf, (j as f64 + 2.0 / 3.0) / mf);
                        }
                    }
                    acc
                })
                .sum();
            total += part;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{measures, BasePolygon};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hex_state() -> CrystalState {
        CrystalState::initial(BasePolygon::regular(6, 1.0, 1.0).unwrap())
    }

    fn small_z(rng: &mut ChaCha8Rng, state: &CrystalState, frac: f64) -> Vec<f64> {
        let amp = frac * state.in_radius();
        (0..state.n_facets()).map(|_| rng.gen_range(-amp..amp)).collect()
    }

    #[test]
    fn identity_at_zero_displacement() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let map = LambdaMap::build(&state, &vec![0.0; 8], &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = state.diameter0();
        for _ in 0..200 {
            let x = Vector3::new(
                rng.gen_range(-3.0 * d..3.0 * d),
                rng.gen_range(-3.0 * d..3.0 * d),
                rng.gen_range(-3.0 * d..3.0 * d),
            );
            assert!((map.apply(x) - x).norm() <= 1e-12 * d);
        }
    }

    #[test]
    fn exact_identity_far_away() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let z = small_z(&mut rng, &state, 0.05);
        let map = LambdaMap::build(&state, &z, &cfg).unwrap();
        let d = state.diameter0();
        for &x in &[
            Vector3::new(10.5 * d, 0.0, 0.0),
            Vector3::new(0.0, -12.0 * d, 1.0),
            Vector3::new(3.0 * d, 3.0 * d, 11.0 * d),
            Vector3::new(20.0 * d, 20.0 * d, 20.0 * d),
        ] {
            assert_eq!(map.apply(x), x);
            assert_eq!(map.jacobian(x).j, 1.0);
        }
    }

    #[test]
    fn phi_maps_facet_heights_and_is_monotone() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let (z_t, z_b) = (0.08, -0.05);
        let phi = VerticalMap::build(&state, z_t, z_b, &cfg).unwrap();
        let hh = state.base.half_height0;
        assert!((phi.profile(hh) - (hh + z_t)).abs() < 1e-14);
        assert!((phi.profile(-hh) - (-hh - z_b)).abs() < 1e-14);
        // rigid branch
        let far = hh + 2.5 * cfg.delta_v;
        assert!((phi.profile(far) - (far + z_t)).abs() < 1e-14);
        // monotone over the whole line
        let d = state.diameter0();
        let mut prev = phi.profile(-8.0 * d);
        for i in 1..=1000 {
            let s = -8.0 * d + 16.0 * d * i as f64 / 1000.0;
            let v = phi.profile(s);
            assert!(v > prev, "profile not increasing at s = {s}");
            prev = v;
        }
    }

    #[test]
    fn vertex_images_match_reconstruction() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = state.diameter0();
        for _ in 0..5 {
            let z = small_z(&mut rng, &state, 0.05);
            let map = LambdaMap::build(&state, &z, &cfg).unwrap();
            for i in 0..state.k() {
                let v0 = state.vertices[i];
                let img = map.apply(Vector3::new(v0.x, v0.y, 0.3));
                let target = map.current.vertices[i];
                let err = (Vector2::new(img.x, img.y) - target).norm();
                assert!(err <= 1e-6 * d, "vertex {i}: error {err:.3e}");
            }
        }
    }

    #[test]
    fn boundary_maps_onto_boundary() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = small_z(&mut rng, &state, 0.05);
        let map = LambdaMap::build(&state, &z, &cfg).unwrap();
        let d = state.diameter0();
        let current = &map.current;
        let mut worst: f64 = 0.0;
        // lateral samples
        for i in 0..state.k() {
            let v0 = state.vertices[i];
            let v1 = state.vertices[(i + 1) % state.k()];
            for a in 0..10 {
                for b in 0..4 {
                    let t = (a as f64 + 0.5) / 10.0;
                    let s = -state.base.half_height0
                        + (b as f64 + 0.5) / 4.0 * 2.0 * state.base.half_height0;
                    let e = v0 + (v1 - v0) * t;
                    let img = map.apply(Vector3::new(e.x, e.y, s));
                    let dist = (0..current.n_facets())
                        .map(|f| current.distance_to_facet(f, img))
                        .fold(f64::INFINITY, f64::min);
                    worst = worst.max(dist);
                }
            }
        }
        // top and bottom samples
        for &(sign, _idx) in &[(1.0, 6usize), (-1.0, 7usize)] {
            for a in 0..20 {
                let th = a as f64 * 0.31;
                let r = 0.3 + 0.55 * ((a * 7) % 10) as f64 / 10.0;
                let p = Vector2::new(r * th.cos(), r * th.sin());
                if crate::geometry::point_classification(
                    &state,
                    Vector3::new(p.x, p.y, 0.0),
                ) != crate::geometry::PointLocation::Inside
                {
                    continue;
                }
                let img = map.apply(Vector3::new(p.x, p.y, sign * state.base.half_height0));
                let dist = (0..current.n_facets())
                    .map(|f| current.distance_to_facet(f, img))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(dist);
            }
        }
        assert!(worst <= 1e-5 * d, "worst boundary distance {worst:.3e}");
    }

    #[test]
    fn jacobian_near_one_for_small_z() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = small_z(&mut rng, &state, 0.05);
        let map = LambdaMap::build(&state, &z, &cfg).unwrap();
        let d = state.diameter0();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..300 {
            let x = Vector3::new(
                rng.gen_range(-2.0 * d..2.0 * d),
                rng.gen_range(-2.0 * d..2.0 * d),
                rng.gen_range(-2.0 * d..2.0 * d),
            );
            if crate::geometry::point_classification(&state, x)
                != crate::geometry::PointLocation::Outside
            {
                continue;
            }
            let j = map.jacobian(x).j;
            assert!(j > 0.0);
            lo = lo.min(j);
            hi = hi.max(j);
        }
        assert!(lo >= 0.5 && hi <= 2.0, "J range [{lo}, {hi}]");
    }

    #[test]
    fn pullback_of_one_is_current_facet_area() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = small_z(&mut rng, &state, 0.04);
        let map = LambdaMap::build(&state, &z, &cfg).unwrap();
        let m = measures(&map.current).unwrap();
        for facet in [0usize, 3, 6, 7] {
            let area = pullback_facet_integral(&map, facet, |_| 1.0, 96).unwrap();
            let expect = m.facet_area(&map.current, facet);
            let rel = (area - expect).abs() / expect;
            assert!(rel <= 1e-4, "facet {facet}: rel error {rel:.3e}");
        }
    }

    #[test]
    fn pullback_linear_integrand_matches_direct_quadrature() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        // pure top translation: current facet is the initial one shifted
        let mut z = vec![0.0; 8];
        z[6] = 0.07;
        let map = LambdaMap::build(&state, &z, &cfg).unwrap();
        let f = |x: Vector3<f64>| 1.0 + 0.3 * x.x - 0.2 * x.y + 0.5 * x.z;
        let pulled = pullback_facet_integral(&map, 6, f, 96).unwrap();
        // direct: top facet at height 1.07; linear part in x,y integrates to
        // area x value at centroid (origin)
        let area = measures(&map.current).unwrap().top_area;
        let direct = area * (1.0 + 0.5 * 1.07);
        let rel = (pulled - direct).abs() / direct.abs();
        assert!(rel <= 1e-4, "rel error {rel:.3e}");
    }

    #[test]
    fn oversized_displacement_rejected() {
        let state = hex_state();
        let cfg = MappingConfig::default_for(&state);
        let mut z = vec![0.0; 8];
        z[6] = cfg.delta_v; // above the delta_v/2 margin
        assert!(matches!(
            LambdaMap::build(&state, &z, &cfg),
            Err(Error::Config(_))
        ));
    }
}

