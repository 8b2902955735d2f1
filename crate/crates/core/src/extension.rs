//! Boundary extension functions h_i and the homogenizing field G.
//!
//! h_i extends the facet-i normal coordinate into space: h_i(x) equals the
//! signed distance to facet i's plane times a plateau cut-off that is 1 on
//! a tube around the facet interior (inset from its edges), 0 near every
//! other facet, and 0 beyond 10 x diameter. The payoff is the trace
//! property d h_i / d n_j = delta_ij on facet interiors, which makes
//! G = sum h_i g_i satisfy d G / d n_j = g_j there.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{measures, CrystalState};
use crate::smoothstep::{plateau, ramp};

/// One facet's extension function. Evaluable anywhere in space.
#[derive(Debug, Clone)]
pub struct Extension {
    facet: usize,
    k: usize,
    eps_cut: f64,
    /// Support radius: 10 x diameter.
    delta_s: f64,
    normals: Vec<Vector2<f64>>,
    supports: Vec<f64>,
    vertices: Vec<Vector2<f64>>,
    l_t: f64,
    l_b: f64,
}

impl Extension {
    pub fn facet(&self) -> usize {
        self.facet
    }

    /// Planar distance of p to the inside of the base polygon:
    /// negative inside, positive outside (max over edge planes).
    fn planar_excess(&self, p: Vector2<f64>) -> f64 {
        let mut d = f64::NEG_INFINITY;
        for (n, s) in self.normals.iter().zip(&self.supports) {
            d = d.max(p.dot(n) - s);
        }
        d
    }

    pub fn eval(&self, x: Vector3<f64>) -> f64 {
        if x.norm() >= self.delta_s {
            return 0.0;
        }
        let e = self.eps_cut;
        let far = 1.0 - ramp(x.norm(), 0.8 * self.delta_s, self.delta_s);
        let p = Vector2::new(x.x, x.y);
        if self.facet < self.k {
            let n = self.normals[self.facet];
            let q = p.dot(&n) - self.supports[self.facet];
            // fade in the normal direction: full weight only near the plane
            let chi_n = 1.0 - ramp(q.abs(), 0.5 * e, e);
            if chi_n == 0.0 {
                return 0.0;
            }
            // tangential coordinate along the edge, inset by eps_cut
            let v0 = self.vertices[self.facet];
            let v1 = self.vertices[(self.facet + 1) % self.k];
            let t = (v1 - v0).normalize();
            let s = (p - v0).dot(&t);
            let len = (v1 - v0).norm();
            let chi_s = plateau(s, 0.0, e, len - e, len);
            // vertical plateau between the horizontal facets
            let chi_v = plateau(x.z, self.l_b, self.l_b + e, self.l_t - e, self.l_t);
            q * chi_n * chi_s * chi_v * far
        } else {
            let q = if self.facet == self.k {
                x.z - self.l_t
            } else {
                self.l_b - x.z
            };
            let chi_n = 1.0 - ramp(q.abs(), 0.5 * e, e);
            if chi_n == 0.0 {
                return 0.0;
            }
            // planar plateau: 1 when at least eps_cut inside the polygon,
            // 0 on and outside the lateral planes
            let excess = self.planar_excess(p);
            let chi_p = 1.0 - ramp(excess, -e, 0.0);
            q * chi_n * chi_p * far
        }
    }
}

/// All facets' extensions for one geometry.
#[derive(Debug, Clone)]
pub struct ExtensionSet {
    pub extensions: Vec<Extension>,
}

/// Builds h_i for one facet. `eps_cut` controls every cut-off band and
/// must leave room inside the facet: smaller than half the shortest edge
/// and half the height.
pub fn build_extension(state0: &CrystalState, facet: usize, eps_cut: f64) -> Result<Extension> {
    let m = measures(state0)?;
    if facet >= state0.n_facets() {
        return Err(Error::Config(format!("facet {facet} out of range")));
    }
    let min_edge = m.edge_lengths.iter().cloned().fold(f64::INFINITY, f64::min);
    let bound = (0.5 * min_edge).min(0.5 * m.height);
    if !(eps_cut > 0.0 && eps_cut < bound) {
        return Err(Error::Config(format!(
            "eps_cut must lie in (0, {bound}), got {eps_cut}"
        )));
    }
    let k = state0.k();
    Ok(Extension {
        facet,
        k,
        eps_cut,
        delta_s: 10.0 * state0.diameter(),
        normals: state0.base.normals.clone(),
        supports: (0..k).map(|i| state0.support(i)).collect(),
        vertices: state0.vertices.clone(),
        l_t: state0.l_t,
        l_b: state0.l_b,
    })
}

pub fn build_extension_set(state0: &CrystalState, eps_cut: f64) -> Result<ExtensionSet> {
    let extensions = (0..state0.n_facets())
        .map(|i| build_extension(state0, i, eps_cut))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtensionSet { extensions })
}

/// The homogenizing field G(x) = sum_i h_i(x) g_i.
#[derive(Debug, Clone)]
pub struct GField {
    pub set: ExtensionSet,
    pub g: Vec<f64>,
}

pub fn assemble_g(set: ExtensionSet, g: Vec<f64>) -> Result<GField> {
    if g.len() != set.extensions.len() {
        return Err(Error::Config(format!(
            "g must have {} entries, got {}",
            set.extensions.len(),
            g.len()
        )));
    }
    Ok(GField { set, g })
}

impl GField {
    pub fn eval(&self, x: Vector3<f64>) -> f64 {
        self.set
            .extensions
            .iter()
            .zip(&self.g)
            .map(|(h, gi)| if *gi == 0.0 { 0.0 } else { h.eval(x) * gi })
            .sum()
    }
}

/// Central-difference directional derivative, step 1e-6.
pub fn directional_derivative<F>(f: F, x: Vector3<f64>, dir: Vector3<f64>) -> f64
where
    F: Fn(Vector3<f64>) -> f64,
{
    let h = 1e-6;
    (f(x + h * dir) - f(x - h * dir)) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BasePolygon;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hex_state() -> CrystalState {
        CrystalState::initial(BasePolygon::regular(6, 1.0, 1.0).unwrap())
    }

    /// Sample points on facet `j`, at least `margin` from its edges.
    fn facet_samples(state: &CrystalState, j: usize, margin: f64) -> Vec<Vector3<f64>> {
        let mut pts = Vec::new();
        let k = state.k();
        if j < k {
            let v0 = state.vertices[j];
            let v1 = state.vertices[(j + 1) % k];
            let len = (v1 - v0).norm();
            let t = (v1 - v0) / len;
            for a in 0..5 {
                let s = margin + (len - 2.0 * margin) * (a as f64 + 0.5) / 5.0;
                for b in 0..3 {
                    let z = state.l_b
                        + margin
                        + (state.l_t - state.l_b - 2.0 * margin) * (b as f64 + 0.5) / 3.0;
                    let p = v0 + t * s;
                    pts.push(Vector3::new(p.x, p.y, z));
                }
            }
        } else {
            let height = if j == state.top_index() { state.l_t } else { state.l_b };
            let r_max = state.in_radius() - margin;
            for a in 0..12 {
                let th = a as f64 * 0.53;
                let r = r_max * (0.2 + 0.75 * ((a * 3) % 5) as f64 / 5.0);
                pts.push(Vector3::new(r * th.cos(), r * th.sin(), height));
            }
        }
        pts
    }

    #[test]
    fn kronecker_property_on_all_facet_pairs() {
        let state = hex_state();
        let eps = 0.15;
        let set = build_extension_set(&state, eps).unwrap();
        for i in 0..state.n_facets() {
            let h = &set.extensions[i];
            for j in 0..state.n_facets() {
                let nj = state.facet_normal3(j);
                for x in facet_samples(&state, j, 2.0 * eps) {
                    let d = directional_derivative(|y| h.eval(y), x, nj);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (d - want).abs() <= 1e-4,
                        "dh_{i}/dn_{j} = {d} at {x:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn vanishes_on_facet_planes_of_others() {
        // h_i itself is zero on every other facet, not just its derivative
        let state = hex_state();
        let set = build_extension_set(&state, 0.15).unwrap();
        for i in 0..state.n_facets() {
            for j in 0..state.n_facets() {
                if i == j {
                    continue;
                }
                for x in facet_samples(&state, j, 0.3) {
                    assert!(set.extensions[i].eval(x).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn compact_support() {
        let state = hex_state();
        let set = build_extension_set(&state, 0.15).unwrap();
        let d = state.diameter();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let dir = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            )
            .normalize();
            let r = rng.gen_range(10.0 * d..30.0 * d);
            for h in &set.extensions {
                assert_eq!(h.eval(r * dir), 0.0);
            }
        }
    }

    #[test]
    fn g_field_linearity_and_trace() {
        let state = hex_state();
        let eps = 0.15;
        let set = build_extension_set(&state, eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let gf = assemble_g(set.clone(), g.clone()).unwrap();
        // linearity: G = sum of single-facet fields
        let singles: Vec<GField> = (0..8)
            .map(|i| {
                let mut e = vec![0.0; 8];
                e[i] = g[i];
                assemble_g(set.clone(), e).unwrap()
            })
            .collect();
        let x = Vector3::new(0.4, -0.2, 0.9);
        let total: f64 = singles.iter().map(|s| s.eval(x)).sum();
        assert!((gf.eval(x) - total).abs() < 1e-14);
        // trace: dG/dn_j = g_j on facet interiors
        for j in 0..state.n_facets() {
            let nj = state.facet_normal3(j);
            for x in facet_samples(&state, j, 2.0 * eps) {
                let d = directional_derivative(|y| gf.eval(y), x, nj);
                assert!((d - g[j]).abs() <= 1e-4 * (1.0 + g[j].abs()));
            }
        }
    }

    #[test]
    fn zero_g_gives_zero_field() {
        let state = hex_state();
        let set = build_extension_set(&state, 0.1).unwrap();
        let gf = assemble_g(set, vec![0.0; 8]).unwrap();
        assert_eq!(gf.eval(Vector3::new(1.0, 0.2, -0.4)), 0.0);
    }

    #[test]
    fn eps_cut_preconditions() {
        let state = hex_state();
        assert!(build_extension(&state, 0, 0.0).is_err());
        assert!(build_extension(&state, 0, 10.0).is_err());
        assert!(build_extension(&state, 99, 0.1).is_err());
    }
}
