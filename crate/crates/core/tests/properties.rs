//! Randomized invariants checked with proptest.

use nalgebra::Vector3;
use proptest::prelude::*;

use facetgrow::energy::{surface_energy, Anisotropy};
use facetgrow::geometry::{measures, reconstruct_vertices, BasePolygon, CrystalState};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// Pushing every facet outward can only grow the volume; inward can
    /// only shrink it.
    #[test]
    fn volume_monotone_in_facet_heights(
        k in 3usize..9,
        dz in 1e-4..0.2f64,
        seedz in proptest::collection::vec(-0.1..0.1f64, 11),
    ) {
        let base = BasePolygon::regular(k, 1.0, 1.0).unwrap();
        let z: Vec<f64> = seedz[..k + 2].to_vec();
        let state = CrystalState::with_z(base.clone(), z.clone()).unwrap();
        let v0 = measures(&state).unwrap().volume;
        let outward: Vec<f64> = z.iter().map(|x| x + dz).collect();
        let inward: Vec<f64> = z.iter().map(|x| x - dz).collect();
        let vo = measures(&CrystalState::with_z(base.clone(), outward).unwrap()).unwrap().volume;
        let vi = measures(&CrystalState::with_z(base, inward).unwrap()).unwrap().volume;
        prop_assert!(vo > v0);
        prop_assert!(vi < v0);
    }

    /// Vertices reconstructed from the lateral heights reproduce the
    /// supports: the offset lines really do pass through them.
    #[test]
    fn reconstruction_roundtrip(
        k in 3usize..9,
        seedz in proptest::collection::vec(-0.08..0.08f64, 9),
    ) {
        let base = BasePolygon::regular(k, 1.0, 1.0).unwrap();
        let z = &seedz[..k];
        let verts = reconstruct_vertices(&base, z).unwrap();
        for i in 0..k {
            let n = base.normals[i];
            let want = base.support0(i) + z[i];
            let prev = verts[i];
            let next = verts[(i + 1) % k];
            prop_assert!((n.dot(&prev) - want).abs() < 1e-10);
            prop_assert!((n.dot(&next) - want).abs() < 1e-10);
        }
    }

    /// gamma is positively one-homogeneous: gamma(c x) = c gamma(x).
    #[test]
    fn gamma_is_one_homogeneous(
        k in 3usize..13,
        gl in 0.1..5.0f64,
        gt in 0.1..5.0f64,
        c in 1e-3..1e3f64,
        x in -2.0..2.0f64,
        y in -2.0..2.0f64,
        z in -2.0..2.0f64,
    ) {
        let aniso = Anisotropy::new(k, gl, gt).unwrap();
        let v = Vector3::new(x, y, z);
        prop_assume!(v.norm() > 1e-6);
        let lhs = aniso.gamma(v * c);
        let rhs = c * aniso.gamma(v);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    /// Surface energy scales like area: scaling the crystal by c scales
    /// the energy by c^2.
    #[test]
    fn surface_energy_scales_quadratically(
        k in 3usize..9,
        c in 0.2..4.0f64,
    ) {
        let aniso = Anisotropy::new(k, 1.0, 1.0).unwrap();
        let small = CrystalState::initial(BasePolygon::regular(k, 1.0, 1.0).unwrap());
        let big = CrystalState::initial(BasePolygon::regular(k, c, c).unwrap());
        let es = surface_energy(&small, &aniso).unwrap();
        let eb = surface_energy(&big, &aniso).unwrap();
        prop_assert!((eb - c * c * es).abs() <= 1e-10 * eb.abs());
    }
}
