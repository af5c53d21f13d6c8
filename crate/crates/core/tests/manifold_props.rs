//! Geometric invariants of the three manifolds on random points and tangent vectors.

use nalgebra::{Rotation3, Vector3};
use proptest::prelude::*;
use rsf::manifold::{flat3, AmbientVector, EmbeddedManifold};
use rsf::vecops::{dist, dot, norm};

#[derive(Clone, Copy, Debug)]
enum Kind {
    Flat,
    Sphere,
    So3,
}

fn manifold(kind: Kind) -> EmbeddedManifold {
    match kind {
        Kind::Flat => EmbeddedManifold::euclidean(3),
        Kind::Sphere => EmbeddedManifold::sphere(2),
        Kind::So3 => EmbeddedManifold::so3(),
    }
}

fn point(kind: Kind, raw: &[f64]) -> AmbientVector {
    match kind {
        Kind::Flat => raw[..3].to_vec(),
        Kind::Sphere => {
            // keep away from the origin before normalising
            let v = [raw[0] + 3.0, raw[1], raw[2]];
            let r = norm(&v);
            v.iter().map(|x| x / r).collect()
        }
        Kind::So3 => flat3(Rotation3::from_scaled_axis(Vector3::new(raw[0], raw[1], raw[2])).matrix()),
    }
}

fn tangent(m: &EmbeddedManifold, p: &[f64], raw: &[f64]) -> AmbientVector {
    m.project_tangent(p, &raw[..p.len()]).unwrap()
}

fn kinds() -> impl Strategy<Value = Kind> {
    prop_oneof![Just(Kind::Flat), Just(Kind::Sphere), Just(Kind::So3)]
}

fn raw(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5..1.5f64, n)
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    dist(a, b) / norm(a).max(norm(b)).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sff_symmetric_and_normal(kind in kinds(), p in raw(3), u in raw(9), v in raw(9), w in raw(9)) {
        let m = manifold(kind);
        let p = point(kind, &p);
        let (u, v, w) = (tangent(&m, &p, &u), tangent(&m, &p, &v), tangent(&m, &p, &w));
        let a = m.second_fundamental_form(&p, &u, &v).unwrap();
        let b = m.second_fundamental_form(&p, &v, &u).unwrap();
        prop_assert!(dist(&a, &b) <= 1e-12);
        prop_assert!(dot(&a, &w).abs() <= 1e-10);
    }

    #[test]
    fn gauss_equation_matches_closed_form(kind in kinds(), p in raw(3), x in raw(9), y in raw(9), z in raw(9)) {
        let m = manifold(kind);
        let p = point(kind, &p);
        let (x, y, z) = (tangent(&m, &p, &x), tangent(&m, &p, &y), tangent(&m, &p, &z));
        let r = m.curvature(&p, &x, &y, &z).unwrap();
        let g = m.curvature_gauss(&p, &x, &y, &z).unwrap();
        let scale = norm(&x) * norm(&y) * norm(&z);
        prop_assert!(dist(&r, &g) <= 1e-8 * scale.max(1e-12), "R {:?} vs Gauss {:?}", r, g);
    }

    #[test]
    fn curvature_antisymmetry_and_bianchi(kind in kinds(), p in raw(3), x in raw(9), y in raw(9), z in raw(9)) {
        let m = manifold(kind);
        let p = point(kind, &p);
        let (x, y, z) = (tangent(&m, &p, &x), tangent(&m, &p, &y), tangent(&m, &p, &z));
        let rxy = m.curvature(&p, &x, &y, &z).unwrap();
        let ryx = m.curvature(&p, &y, &x, &z).unwrap();
        let s: Vec<f64> = rxy.iter().zip(&ryx).map(|(a, b)| a + b).collect();
        prop_assert!(norm(&s) <= 1e-10);
        let ryz = m.curvature(&p, &y, &z, &x).unwrap();
        let rzx = m.curvature(&p, &z, &x, &y).unwrap();
        let b: Vec<f64> = (0..p.len()).map(|i| rxy[i] + ryz[i] + rzx[i]).collect();
        prop_assert!(norm(&b) <= 1e-10);
    }

    #[test]
    fn tangent_projection_idempotent(kind in kinds(), p in raw(3), v in raw(9)) {
        let m = manifold(kind);
        let p = point(kind, &p);
        let once = tangent(&m, &p, &v);
        let twice = m.project_tangent(&p, &once).unwrap();
        prop_assert!(dist(&once, &twice) <= 1e-12 * norm(&once).max(1.0));
    }

    #[test]
    fn geodesics_stay_on_manifold(kind in kinds(), a in raw(3), b in raw(3), s in 0.0..1.0f64) {
        let m = manifold(kind);
        let (p, q) = (point(kind, &a), point(kind, &b));
        // the raw ranges keep sphere points within a hemisphere and SO(3) angles below π
        let g = m.geodesic(&p, &q, s).unwrap();
        prop_assert!(m.constraint_violation(&g) <= 1e-12);
        let g0 = m.geodesic(&p, &q, 0.0).unwrap();
        let g1 = m.geodesic(&p, &q, 1.0).unwrap();
        prop_assert!(dist(&g0, &p) <= 1e-12 && rel(&g1, &q) <= 1e-10);
    }

    #[test]
    fn projection_lands_on_manifold(kind in kinds(), p in raw(3), v in raw(9)) {
        let m = manifold(kind);
        let p = point(kind, &p);
        let moved: Vec<f64> = p.iter().zip(&v).map(|(a, b)| a + 0.05 * b).collect();
        let back = m.project_point(&moved).unwrap();
        prop_assert!(m.constraint_violation(&back) <= 1e-12);
    }
}

#[test]
fn sphere_has_unit_sectional_curvature() {
    let m = EmbeddedManifold::sphere(2);
    let p = vec![0.0, 0.0, 1.0];
    let (x, y) = (vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]);
    let r = m.curvature(&p, &x, &y, &y).unwrap();
    assert!((dot(&r, &x) - 1.0).abs() < 1e-14);
}
