//! Independent closed forms checked against the library.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use kgeodesic::classify::gs_critical;
use kgeodesic::distance::{self, PointKind};
use kgeodesic::geodesic::ClosedGeodesic;
use kgeodesic::{SurfaceModel, SurfacePoint, TangentVector, Vector2};
use nalgebra::Vector3;
use proptest::prelude::*;

/// Embedding of the ellipsoid `x² + y² + z²/c² = 1` in colatitude/longitude.
fn embed(c: f64, th: f64, ph: f64) -> Vector3<f64> {
    Vector3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), c * th.cos())
}

/// Metric coefficients from the embedding by central differences.
fn fd_metric(c: f64, th: f64, ph: f64) -> (f64, f64) {
    let h = 1e-6;
    let xt = (embed(c, th + h, ph) - embed(c, th - h, ph)) / (2.0 * h);
    let xp = (embed(c, th, ph + h) - embed(c, th, ph - h)) / (2.0 * h);
    (xt.norm_squared(), xp.norm_squared())
}

#[test]
fn metric_matches_embedding() {
    for c in [0.3, 0.7, 1.0] {
        let s = if c == 1.0 { SurfaceModel::unit_sphere() } else { SurfaceModel::ellipsoid(c).unwrap() };
        for th in [0.2, 0.9, FRAC_PI_2, 2.4] {
            let (e, g) = fd_metric(c, th, 0.4);
            let m = s.metric_at(&SurfacePoint::new(th, 0.4)).unwrap();
            assert!((m[(0, 0)] - e).abs() < 1e-8 && (m[(1, 1)] - g).abs() < 1e-8, "c={c} th={th}");
            assert_eq!(m[(0, 1)], 0.0);
        }
    }
}

#[test]
fn christoffels_from_metric_derivatives() {
    let c = 0.6;
    let s = SurfaceModel::ellipsoid(c).unwrap();
    let h = 1e-5;
    for th in [0.3, 1.1, 2.0] {
        let (e0, g0) = fd_metric(c, th, 0.0);
        let (ep, gp) = fd_metric(c, th + h, 0.0);
        let (em, gm) = fd_metric(c, th - h, 0.0);
        let (de, dg) = ((ep - em) / (2.0 * h), (gp - gm) / (2.0 * h));
        let gam = s.christoffel_at(&SurfacePoint::new(th, 0.0)).unwrap();
        assert!((gam[0][0][0] - de / (2.0 * e0)).abs() < 1e-5);
        assert!((gam[0][1][1] + dg / (2.0 * e0)).abs() < 1e-5);
        assert!((gam[1][0][1] - dg / (2.0 * g0)).abs() < 1e-5);
        assert_eq!(gam[1][0][1], gam[1][1][0]);
    }
}

#[test]
fn curvature_from_metric() {
    // K = -(1/sqrt(EG)) d/dθ (d/dθ sqrt(G) / sqrt(E)) for a diagonal metric
    let c = 0.5;
    let s = SurfaceModel::ellipsoid(c).unwrap();
    let h = 1e-4;
    let inner = |th: f64| {
        let (e, _) = fd_metric(c, th, 0.0);
        let dsg = (fd_metric(c, th + h, 0.0).1.sqrt() - fd_metric(c, th - h, 0.0).1.sqrt()) / (2.0 * h);
        dsg / e.sqrt()
    };
    for th in [0.4, 1.0, FRAC_PI_2] {
        let (e, g) = fd_metric(c, th, 0.0);
        let k = -(inner(th + h) - inner(th - h)) / (2.0 * h) / (e * g).sqrt();
        let got = s.gauss_curvature(&SurfacePoint::new(th, 0.0)).unwrap();
        assert!((got - k).abs() < 1e-4 * k.abs().max(1.0), "th={th}: {got} vs {k}");
    }
    assert!((s.min_gauss_curvature().unwrap() - c * c).abs() < 1e-12);
}

#[test]
fn meridian_length_by_quadrature() {
    for c in [0.2, 0.5, 0.9] {
        let s = SurfaceModel::ellipsoid(c).unwrap();
        let n = 20_000;
        let f = |t: f64| (t.cos().powi(2) + (c * t.sin()).powi(2)).sqrt();
        let h = PI / n as f64;
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * f(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let m = ClosedGeodesic::meridian(&s, 0.3).unwrap();
        assert!((m.length() - 2.0 * simpson).abs() < 1e-7, "c={c}: {} vs {}", m.length(), 2.0 * simpson);
    }
}

#[test]
fn equator_length() {
    let s = SurfaceModel::ellipsoid(0.4).unwrap();
    assert!((ClosedGeodesic::equator(&s).unwrap().length() - TAU).abs() < 1e-9);
}

fn sphere_point() -> impl Strategy<Value = SurfacePoint> {
    (0.05..PI - 0.05, 0.0..TAU).prop_map(|(u, v)| SurfacePoint::new(u, v))
}

fn torus_point() -> impl Strategy<Value = SurfacePoint> {
    (0.0..2.0f64, 0.0..1.0f64).prop_map(|(u, v)| SurfacePoint::new(u, v))
}

fn torus_distance(p: &SurfacePoint, q: &SurfacePoint) -> f64 {
    let mut best = f64::INFINITY;
    for i in -2..=2 {
        for j in -2..=2 {
            let du = q.u - p.u + 2.0 * i as f64;
            let dv = q.v - p.v + j as f64;
            best = best.min(du.hypot(dv));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inner_product_is_frame_dot(p in sphere_point(), a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64) {
        let s = SurfaceModel::ellipsoid(0.7).unwrap();
        let x = TangentVector::new(a, b);
        let y = TangentVector::new(c, d);
        let fx = s.to_frame(&p, &x).unwrap();
        let fy = s.to_frame(&p, &y).unwrap();
        prop_assert!((s.inner(&p, &x, &y).unwrap() - fx.dot(&fy)).abs() < 1e-12);
        let back = s.from_frame(&p, &fx).unwrap();
        prop_assert!((back.a - a).abs() < 1e-12 && (back.b - b).abs() < 1e-12);
    }

    #[test]
    fn sphere_distance_is_arccos(p in sphere_point(), q in sphere_point()) {
        let s = SurfaceModel::unit_sphere();
        let dot = embed(1.0, p.u, p.v).dot(&embed(1.0, q.u, q.v)).clamp(-1.0, 1.0);
        let d = distance::distance(&s, &p, &q).unwrap();
        prop_assert!((d - dot.acos()).abs() < 1e-9);
    }

    #[test]
    fn torus_distance_is_lattice_minimum(p in torus_point(), q in torus_point()) {
        let s = SurfaceModel::torus(2.0, 1.0).unwrap();
        let d = distance::distance(&s, &p, &q).unwrap();
        prop_assert!((d - torus_distance(&p, &q)).abs() < 1e-12);
    }

    #[test]
    fn torus_gap_criterion_matches_brute_force(q in torus_point()) {
        // q is critical for d_p iff no direction makes an obtuse angle with
        // every minimizer
        let s = SurfaceModel::torus(2.0, 1.0).unwrap();
        let p = SurfacePoint::new(0.3, 0.4);
        prop_assume!(torus_distance(&p, &q) > 1e-3);
        let r = gs_critical(&s, &p, &q).unwrap();
        let set = distance::minimizers(&s, &q, &p).unwrap();
        let dirs = set.directions();
        // best escape: the direction whose largest dot with a minimizer is least
        let escape = (0..720)
            .map(|j| {
                let a = TAU * j as f64 / 720.0;
                let v = Vector2::new(a.cos(), a.sin());
                dirs.iter().map(|w| v.dot(w)).fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min);
        if escape < -1e-2 {
            prop_assert!(!r.critical);
        }
        if escape > 1e-2 {
            prop_assert!(r.critical);
        }
    }
}

#[test]
fn sphere_antipode_is_a_continuum() {
    let s = SurfaceModel::unit_sphere();
    let p = SurfacePoint::new(1.0, 0.5);
    let q = SurfacePoint::new(PI - 1.0, 0.5 + PI);
    let set = distance::minimizers(&s, &p, &q).unwrap();
    assert!(set.continuum);
    assert!((set.distance - PI).abs() < 1e-9);
    assert_eq!(distance::classify_set(&s, &set).kind, PointKind::OrdinaryCut);
}

#[test]
fn ellipsoid_distance_is_symmetric() {
    let s = SurfaceModel::ellipsoid(0.6).unwrap();
    let pts = [(0.4, 0.1), (1.3, 2.0), (2.2, 4.1), (FRAC_PI_2, 3.0)];
    for a in &pts {
        for b in &pts {
            if a == b {
                continue;
            }
            let p = SurfacePoint::new(a.0, a.1);
            let q = SurfacePoint::new(b.0, b.1);
            let d1 = distance::distance(&s, &p, &q).unwrap();
            let d2 = distance::distance(&s, &q, &p).unwrap();
            assert!((d1 - d2).abs() < 1e-8, "{a:?} {b:?}: {d1} vs {d2}");
            // chord is a lower bound
            let chord = (embed(0.6, a.0, a.1) - embed(0.6, b.0, b.1)).norm();
            assert!(d1 >= chord - 1e-12);
        }
    }
}

#[test]
fn torus_half_lattice_points_are_critical() {
    let s = SurfaceModel::torus(2.0, 1.0).unwrap();
    let p = SurfacePoint::new(0.3, 0.4);
    for (du, dv, critical) in [(1.0, 0.0, true), (0.0, 0.5, true), (1.0, 0.5, true), (0.9, 0.5, false), (0.5, 0.2, false)] {
        let q = SurfacePoint::new(p.u + du, p.v + dv);
        assert_eq!(gs_critical(&s, &p, &q).unwrap().critical, critical, "offset ({du}, {dv})");
    }
}
