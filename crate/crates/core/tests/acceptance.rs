//! Acceptance criteria 1–10. Each criterion prints one PASS/FAIL line; the
//! test fails if any criterion fails.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use kgeodesic::classify::{
    enumerate_gs_critical, is_k_geodesic, minimal_k, verify_theorem_behavior, MinimalK, Verdict, DEFAULT_K_MAX,
};
use kgeodesic::distance::{self, PointKind};
use kgeodesic::energy::{
    associated_geodesics, balance_test, build_class, energy_gradient_frame, find_balanced, uniform_energy,
    BalanceReport, BalanceTolerances, ClassOutcome, FindOptions, Outcome, TuplePoint,
};
use kgeodesic::export::num;
use kgeodesic::geodesic::{shoot_frame, ClosedGeodesic};
use kgeodesic::sweep::{
    blowup_experiment, blowup_monotone, equator_cut_distance, find_c0, persistence_experiment, LimitClass,
};
use kgeodesic::{Error, Result, SurfaceModel, SurfacePoint, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x6b67_656f;

#[derive(Default)]
struct Run {
    failures: Vec<String>,
    log: String,
}

impl Run {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn record(&mut self, line: impl AsRef<str>) {
        self.log.push_str(line.as_ref());
        self.log.push('\n');
    }
}

fn exp(s: &SurfaceModel, p: &SurfacePoint, v: &Vector2<f64>) -> Result<SurfacePoint> {
    let n = v.norm();
    if n == 0.0 {
        return Ok(*p);
    }
    Ok(shoot_frame(s, p, &(v / n), n)?.end().0)
}

fn unit(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let a = rng.gen_range(0.0..TAU);
    Vector2::new(a.cos(), a.sin())
}

fn random_point(s: &SurfaceModel, rng: &mut ChaCha8Rng) -> SurfacePoint {
    match s {
        SurfaceModel::FlatTorus { a, b } => SurfacePoint::new(rng.gen_range(0.0..*a), rng.gen_range(0.0..*b)),
        _ => {
            // area-uniform on the sphere, away from the chart poles
            let z: f64 = rng.gen_range(-0.995..0.995);
            SurfacePoint::new(z.acos(), rng.gen_range(0.0..TAU))
        }
    }
}

fn energy_from(report: &BalanceReport) -> f64 {
    report.distances.len() as f64 * report.distances.iter().map(|d| d * d).sum::<f64>()
}

fn tuple(s: &SurfaceModel, pts: &[(f64, f64)]) -> Result<TuplePoint> {
    TuplePoint::new(s, pts.iter().map(|&(u, v)| SurfacePoint::new(u, v)).collect())
}

fn midpoints(s: &SurfaceModel) -> Result<TuplePoint> {
    let poly = s.polygon().unwrap();
    let pts = (0..poly.len())
        .map(|i| {
            let m = poly.edge_midpoint(i);
            SurfacePoint::new(m.x, m.y)
        })
        .collect();
    TuplePoint::new(s, pts)
}

fn verified(s: &SurfaceModel, g: &ClosedGeodesic, k: usize) -> Result<bool> {
    Ok(is_k_geodesic(s, g, k)?.verdict != Verdict::NotKGeodesic)
}

/// Sphere half-geodesics.
fn criterion_1(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let s = SurfaceModel::unit_sphere();
    let eq = ClosedGeodesic::equator(&s)?;
    let r = is_k_geodesic(&s, &eq, 2)?;
    run.record(format!("equator k=2 {:?} defect={}", r.verdict, num(r.defect)));
    run.check(r.verdict == Verdict::StrictK, || format!("equator verdict {:?}", r.verdict));
    run.check(r.defect < 1e-6, || format!("equator defect {}", r.defect));
    let mk = minimal_k(&s, &eq, DEFAULT_K_MAX)?;
    run.check(mk == MinimalK::Found(2), || format!("minimal k {mk:?}"));

    let p = random_point(&s, rng);
    let g = ClosedGeodesic::great_circle(&s, &p, &unit(rng))?;
    let cands: Vec<ClosedGeodesic> = (0..20)
        .map(|_| ClosedGeodesic::great_circle(&s, &p, &unit(rng)))
        .collect::<Result<_>>()?;
    let rep = verify_theorem_behavior(&s, &g, &cands, 1.0)?;
    run.check(rep.violations == 0, || format!("{} violations", rep.violations));
    for c in &rep.checks {
        let err = c.antipode_error.unwrap_or(f64::INFINITY);
        run.record(format!("circle {} half={} antipode_error={}", c.index, c.half_geodesic, num(err)));
        run.check(c.half_geodesic && err < 1e-5, || format!("circle {}: half={} err={err}", c.index, c.half_geodesic));
    }
    Ok(())
}

/// Torus class census from the centre.
fn criterion_2(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let t = SurfaceModel::torus(1.0, 1.0)?;
    let p = SurfacePoint::new(0.5, 0.5);
    let crit = enumerate_gs_critical(&t, &p, 32)?;
    let expected = [(0.0, 0.5), (0.5, 0.0), (0.0, 0.0)];
    run.check(crit.len() == 3, || format!("{} critical points", crit.len()));
    for (u, v) in expected {
        let hit = crit.iter().any(|c| (c.q.u - u).abs() < 1e-6 && (c.q.v - v).abs() < 1e-6);
        run.check(hit, || format!("critical point ({u}, {v}) missing"));
    }
    for c in &crit {
        run.record(format!("critical ({}, {})", num(c.q.u), num(c.q.v)));
    }

    // class keys: lattice directions of the associated half-geodesics
    let mut seen = std::collections::BTreeMap::<(i64, i64), usize>::new();
    let mut collapsed = 0;
    for n in 0..100 {
        let (a, b) = loop {
            let a = random_point(&t, rng);
            let b = random_point(&t, rng);
            if distance::distance(&t, &a, &b)? > 1e-3 {
                break (a, b);
            }
        };
        let seed = TuplePoint::new(&t, vec![a, b])?;
        let res = find_balanced(&t, 2, &seed, &FindOptions::default())?;
        match res.outcome {
            Outcome::Collapsed => collapsed += 1,
            Outcome::Stalled => run.check(false, || format!("seed {n} stalled")),
            Outcome::Converged => {
                let rep = res.report.clone().unwrap();
                let d = rep.distances[0];
                run.check((d - 0.5).abs() < 1e-6 || (d - SQRT_2 / 2.0).abs() < 1e-6, || format!("seed {n}: distance {d}"));
                let geos = associated_geodesics(&t, &res.tuple, &rep)?;
                run.check(!geos.is_empty(), || format!("seed {n}: no associated geodesic"));
                for g in geos {
                    let w = g.arc.start_dir * g.length();
                    let (mut m, mut k) = (w.x.round() as i64, w.y.round() as i64);
                    if m < 0 || (m == 0 && k < 0) {
                        m = -m;
                        k = -k;
                    }
                    let l = g.length();
                    let ok = (w - Vector2::new(w.x.round(), w.y.round())).norm() < 1e-6
                        && matches!((m, k), (1, 0) | (0, 1) | (1, 1) | (1, -1))
                        && ((l - 1.0).abs() < 1e-6 || (l - SQRT_2).abs() < 1e-6);
                    run.check(ok, || format!("seed {n}: unexpected class {w:?} length {l}"));
                    *seen.entry((m, k)).or_default() += 1;
                }
            }
        }
    }
    run.record(format!("collapsed {collapsed}"));
    for (key, count) in &seen {
        run.record(format!("class {key:?} seen {count}"));
        let g = ClosedGeodesic::torus_line(&t, &SurfacePoint::new(0.1, 0.2), key.0, key.1)?;
        let built = build_class(&t, &g, 2)?;
        run.check(built.class().is_some(), || format!("class {key:?} does not rotate"));
    }
    Ok(())
}

/// One-sided directional derivative against finite differences.
fn criterion_3(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let h = 1e-4;
    let surfaces = [
        SurfaceModel::unit_sphere(),
        SurfaceModel::torus(1.0, 1.0)?,
        SurfaceModel::ellipsoid(0.5)?,
    ];
    for s in &surfaces {
        let mut worst: f64 = 0.0;
        let mut ordinary = 0;
        for n in 0..50 {
            let p = random_point(s, rng);
            let q = if matches!(s, SurfaceModel::FlatTorus { .. }) && n < 12 {
                // points on the cut locus of p
                let r = rng.gen_range(0.05..0.45);
                if n % 2 == 0 {
                    SurfacePoint::new(p.u + 0.5, p.v + r)
                } else {
                    SurfacePoint::new(p.u + r, p.v + 0.5)
                }
            } else {
                loop {
                    let q = random_point(s, rng);
                    if distance::distance(s, &p, &q)? > 0.3 {
                        break q;
                    }
                }
            };
            let q = s.canonicalize(&q);
            if distance::classify_point(s, &p, &q)?.kind == PointKind::OrdinaryCut {
                ordinary += 1;
            }
            let v = unit(rng);
            let d = distance::directional_derivative_frame(s, &p, &q, &v)?;
            let fd = (distance::distance(s, &p, &exp(s, &q, &(v * h))?)? - distance::distance(s, &p, &q)?) / h;
            worst = worst.max((d - fd).abs());
            run.check((d - fd).abs() < 1e-3, || format!("{}: D={d} fd={fd}", s.name()));
        }
        run.record(format!("{} worst={} ordinary={ordinary}", s.name(), num(worst)));
        if matches!(s, SurfaceModel::FlatTorus { .. }) {
            run.check(ordinary >= 10, || format!("only {ordinary} ordinary cut points"));
        }
    }
    Ok(())
}

fn pair_energy(s: &SurfaceModel, pts: &[SurfacePoint], i: usize) -> Result<f64> {
    let k = pts.len();
    let d = |a: usize, b: usize| -> Result<f64> { Ok(distance::minimizers_with(s, &pts[a], &pts[b], 64)?.distance) };
    let prev = (i + k - 1) % k;
    let next = (i + 1) % k;
    Ok(if k == 2 {
        2.0 * 2.0 * d(i, next)?.powi(2)
    } else {
        k as f64 * (d(prev, i)?.powi(2) + d(i, next)?.powi(2))
    })
}

fn critical_suite(rng: &mut ChaCha8Rng) -> Result<Vec<(SurfaceModel, TuplePoint)>> {
    let sphere = SurfaceModel::unit_sphere();
    let torus = SurfaceModel::torus(1.0, 1.0)?;
    let wide = SurfaceModel::torus(2.0, 1.0)?;
    let e9 = SurfaceModel::ellipsoid(0.9)?;
    let e5 = SurfaceModel::ellipsoid(0.5)?;
    let mut out = Vec::new();
    for k in [3, 3, 3, 4, 4, 5, 5] {
        let g = ClosedGeodesic::great_circle(&sphere, &random_point(&sphere, rng), &unit(rng))?;
        out.push((sphere.clone(), TuplePoint::on_geodesic(&sphere, &g, k, rng.gen_range(0.0..TAU))?));
    }
    for (m, n, k) in [(1, 0, 3), (1, 0, 3), (0, 1, 3), (1, 1, 3), (1, 0, 4), (1, -1, 4)] {
        let g = ClosedGeodesic::torus_line(&torus, &random_point(&torus, rng), m, n)?;
        out.push((torus.clone(), TuplePoint::on_geodesic(&torus, &g, k, rng.gen_range(0.0..TAU))?));
    }
    for _ in 0..2 {
        let g = ClosedGeodesic::torus_line(&wide, &random_point(&wide, rng), 1, 0)?;
        out.push((wide.clone(), TuplePoint::on_geodesic(&wide, &g, 5, rng.gen_range(0.0..TAU))?));
    }
    let eq9 = ClosedGeodesic::equator(&e9)?;
    for _ in 0..3 {
        out.push((e9.clone(), TuplePoint::on_geodesic(&e9, &eq9, 3, rng.gen_range(0.0..TAU))?));
    }
    let eq5 = ClosedGeodesic::equator(&e5)?;
    for _ in 0..2 {
        out.push((e5.clone(), TuplePoint::on_geodesic(&e5, &eq5, 5, rng.gen_range(0.0..TAU))?));
    }
    Ok(out)
}

/// Gradient of the uniform energy and the critical/balanced equivalence.
fn criterion_4(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let h = 1e-5;
    let surfaces = [
        SurfaceModel::unit_sphere(),
        SurfaceModel::torus(1.0, 1.0)?,
        SurfaceModel::ellipsoid(0.5)?,
    ];
    for s in &surfaces {
        let mut worst: f64 = 0.0;
        for n in 0..50 {
            let k = 2 + n % 3;
            let x = 'draw: loop {
                let pts: Vec<SurfacePoint> = (0..k).map(|_| random_point(s, rng)).collect();
                let x = TuplePoint::new(s, pts)?;
                for set in x.pairs(s)? {
                    let c = distance::classify_set(s, set);
                    if c.kind != PointKind::Regular || c.second_gap < 1e-2 || set.distance < 0.1 {
                        continue 'draw;
                    }
                }
                break x;
            };
            let g = energy_gradient_frame(s, &x)?;
            let scale = g.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-3);
            for i in 0..k {
                for a in 0..2 {
                    let mut e = Vector2::zeros();
                    e[a] = h;
                    let mut plus = x.points().to_vec();
                    plus[i] = exp(s, &plus[i], &e)?;
                    let mut minus = x.points().to_vec();
                    minus[i] = exp(s, &minus[i], &(-e))?;
                    let fd = (pair_energy(s, &plus, i)? - pair_energy(s, &minus, i)?) / (2.0 * h);
                    let rel = (g[i][a] - fd).abs() / scale;
                    worst = worst.max(rel);
                    run.check(rel < 1e-4, || format!("{} tuple {n} point {i} axis {a}: {} vs {fd}", s.name(), g[i][a]));
                }
            }
        }
        run.record(format!("{} worst relative gradient error {}", s.name(), num(worst)));
    }

    let critical = critical_suite(rng)?;
    let mut suite: Vec<(SurfaceModel, TuplePoint, bool)> = Vec::new();
    for (s, x) in &critical {
        suite.push((s.clone(), x.clone(), true));
        let mut pts = x.points().to_vec();
        let i = rng.gen_range(0..pts.len());
        pts[i] = exp(s, &pts[i], &(unit(rng) * 0.05))?;
        suite.push((s.clone(), TuplePoint::new(s, pts)?, false));
    }
    for (n, (s, x, expect)) in suite.iter().enumerate() {
        let g = energy_gradient_frame(s, x)?;
        let norm = g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        let r = balance_test(s, x, &BalanceTolerances::for_surface(s))?;
        let ub = r.balanced && r.uniquely && r.spacing_residual < 1e-6 && r.antipodal_residual < 1e-6;
        run.record(format!("suite {n} {} |grad|={} uniquely_balanced={ub}", s.name(), num(norm)));
        run.check((norm < 1e-6) == ub, || format!("suite {n}: |grad|={norm} but uniquely balanced={ub}"));
        run.check(ub == *expect, || format!("suite {n}: expected critical={expect}"));
    }
    Ok(())
}

/// Balanced points and 1/k-geodesics correspond.
fn criterion_5(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let sphere = SurfaceModel::unit_sphere();
    let torus = SurfaceModel::torus(1.0, 1.0)?;
    let ell = SurfaceModel::ellipsoid(0.75)?;
    let gc = ClosedGeodesic::great_circle(&sphere, &random_point(&sphere, rng), &unit(rng))?;
    let hz = ClosedGeodesic::torus_line(&torus, &random_point(&torus, rng), 1, 0)?;
    let eq = ClosedGeodesic::equator(&ell)?;
    let catalog = [
        (&sphere, &gc, 2),
        (&sphere, &gc, 3),
        (&torus, &hz, 2),
        (&torus, &hz, 3),
        (&ell, &eq, 3),
    ];
    for (s, g, k) in catalog {
        run.check(verified(s, g, k)?, || format!("{} k={k} not verified", s.name()));
        for _ in 0..8 {
            let t = rng.gen_range(0.0..TAU);
            let x = TuplePoint::on_geodesic(s, g, k, t)?;
            let r = balance_test(s, &x, &BalanceTolerances::for_surface(s))?;
            run.check(r.balanced, || format!("{} k={k} t={t}: not balanced", s.name()));
        }
        run.record(format!("{} k={k} catalog ok", s.name()));
    }

    // converse: searched balanced points have verified associated geodesics
    let mut searches: Vec<(SurfaceModel, TuplePoint, usize)> = Vec::new();
    for _ in 0..6 {
        let seed = TuplePoint::new(&torus, vec![random_point(&torus, rng), random_point(&torus, rng)])?;
        searches.push((torus.clone(), seed, 2));
    }
    let perturbed = |s: &SurfaceModel, g: &ClosedGeodesic, k: usize, rng: &mut ChaCha8Rng| -> Result<TuplePoint> {
        let x = TuplePoint::on_geodesic(s, g, k, rng.gen_range(0.0..TAU))?;
        let pts = x
            .points()
            .iter()
            .map(|p| exp(s, p, &(unit(rng) * 0.03)))
            .collect::<Result<Vec<_>>>()?;
        TuplePoint::new(s, pts)
    };
    searches.push((sphere.clone(), perturbed(&sphere, &gc, 3, rng)?, 3));
    searches.push((torus.clone(), perturbed(&torus, &hz, 3, rng)?, 3));
    searches.push((ell.clone(), perturbed(&ell, &eq, 3, rng)?, 3));
    for (n, (s, seed, k)) in searches.iter().enumerate() {
        let res = find_balanced(s, *k, seed, &FindOptions::default())?;
        run.record(format!("search {n} {} k={k} {:?} iterations={}", s.name(), res.outcome, res.iterations));
        if res.outcome == Outcome::Collapsed {
            continue;
        }
        run.check(res.outcome == Outcome::Converged, || format!("search {n} on {}: {:?}", s.name(), res.outcome));
        let Some(rep) = res.report.as_ref().filter(|r| r.balanced) else { continue };
        let geos = associated_geodesics(s, &res.tuple, rep)?;
        run.check(!geos.is_empty(), || format!("search {n} on {}: no associated geodesic", s.name()));
        for g in &geos {
            run.check(verified(s, g, *k)?, || format!("search {n}: associated geodesic not a 1/{k}-geodesic"));
        }
        if s.name() == "sphere" {
            let e = uniform_energy(s, &res.tuple)?;
            run.check((e - 4.0 * PI * PI).abs() < 1e-4, || format!("sphere search energy {e}"));
        }
    }

    let square = SurfaceModel::doubled_square();
    let x = midpoints(&square)?;
    let r = balance_test(&square, &x, &BalanceTolerances::for_surface(&square))?;
    let geos = associated_geodesics(&square, &x, &r)?;
    run.check(r.balanced && !geos.is_empty(), || "square midpoints without associated geodesic".into());
    for g in &geos {
        run.check(verified(&square, g, 4)?, || "square associated geodesic not a 1/4-geodesic".into());
    }
    let pentagon = SurfaceModel::doubled_pentagon();
    let x = midpoints(&pentagon)?;
    let r = balance_test(&pentagon, &x, &BalanceTolerances::for_surface(&pentagon))?;
    run.check(r.balanced, || "pentagon midpoints not balanced".into());
    let geos = associated_geodesics(&pentagon, &x, &r)?;
    run.record(format!("pentagon associated {}", geos.len()));
    run.check(geos.is_empty(), || format!("pentagon has {} associated geodesics", geos.len()));
    Ok(())
}

/// Doubled square examples.
fn criterion_6(run: &mut Run, _rng: &mut ChaCha8Rng) -> Result<()> {
    let s = SurfaceModel::doubled_square();
    let ou = ClosedGeodesic::over_under(&s, true)?;
    let r = is_k_geodesic(&s, &ou, 4)?;
    run.record(format!("over-under k=4 {:?} defect={}", r.verdict, num(r.defect)));
    run.check(r.verdict == Verdict::StrictK, || format!("over-under verdict {:?}", r.verdict));

    let x = midpoints(&s)?;
    let rep = balance_test(&s, &x, &BalanceTolerances::for_surface(&s))?;
    run.record(format!("midpoints {:?}", rep.labels()));
    run.check(rep.balanced && rep.non_smooth(), || format!("midpoints {:?}", rep.labels()));
    let geos = associated_geodesics(&s, &x, &rep)?;
    run.record(format!("midpoints associated {}", geos.len()));
    run.check(geos.len() >= 2, || format!("{} associated geodesics", geos.len()));

    let corners = tuple(&s, &[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])?;
    match balance_test(&s, &corners, &BalanceTolerances::for_surface(&s)) {
        Err(Error::ConePointVertex(cd)) => {
            run.record(format!(
                "corner vertex {} cone={} parts=({}, {}) split_ok={}",
                cd.vertex,
                num(cd.cone_angle),
                num(cd.parts.0),
                num(cd.parts.1),
                cd.split_ok
            ));
        }
        other => run.check(false, || format!("corner tuple gave {other:?}")),
    }
    Ok(())
}

/// Ellipsoid family sweep.
fn criterion_7(run: &mut Run, _rng: &mut ChaCha8Rng) -> Result<()> {
    let grid: Vec<f64> = (0..20).map(|i| 0.2 + 0.79 * i as f64 / 19.0).collect();
    let cut: Vec<f64> = grid.iter().map(|&c| equator_cut_distance(c)).collect::<Result<_>>()?;
    for (c, d) in grid.iter().zip(&cut) {
        run.record(format!("cutdist({}) = {}", num(*c), num(*d)));
    }
    run.check(cut.windows(2).all(|w| w[1] >= w[0] - 1e-6), || "cut distance not monotone".into());

    let c0 = find_c0((0.2, 0.99))?;
    run.record(format!("c0 = {}", num(c0)));
    // Jacobi oracle: curvature 1/c² along the equator puts the conjugate point at πc
    run.check((c0 - 2.0 / 3.0).abs() < 1e-4, || format!("c0 = {c0}"));

    let above = ClosedGeodesic::equator(&SurfaceModel::ellipsoid(c0 + 0.01)?)?;
    let va = is_k_geodesic(above.surface(), &above, 3)?.verdict;
    let below = ClosedGeodesic::equator(&SurfaceModel::ellipsoid(c0 - 0.01)?)?;
    let vb = is_k_geodesic(below.surface(), &below, 3)?.verdict;
    run.record(format!("c0+0.01 {va:?} c0-0.01 {vb:?}"));
    run.check(va == Verdict::OpenlyK, || format!("above c0: {va:?}"));
    run.check(vb == Verdict::NotKGeodesic, || format!("below c0: {vb:?}"));

    let pers = persistence_experiment(&[c0 + 0.1, c0 + 0.05, c0 + 0.01], c0, 3)?;
    for r in &pers.records {
        run.record(format!("persistence c={} found={} smooth={}", num(r.c), r.class_found, r.smooth));
    }
    run.record(format!("limit {:?}", pers.limit));
    run.check(pers.confirmed && pers.limit == LimitClass::NonSmooth, || format!("persistence {:?}", pers.limit));

    let rows = blowup_experiment(&[0.9, 0.5, 0.3, 0.1], 16)?;
    for r in &rows {
        run.record(format!("blowup c={} {:?}", num(r.c), r.minimal_k));
    }
    run.check(blowup_monotone(&rows), || "minimal k not monotone".into());
    run.check(matches!(rows.last().unwrap().minimal_k, MinimalK::NotFound(16)), || "k_max not exceeded".into());
    // ⌈2/c⌉ from the conjugate distance πc
    for (r, want) in rows.iter().zip([Some(3), Some(4), Some(7), None]) {
        run.check(r.minimal_k.value() == want, || format!("c={}: {:?}, expected {want:?}", r.c, r.minimal_k));
    }
    Ok(())
}

/// Uniform energy equals length squared along classes.
fn criterion_8(run: &mut Run, rng: &mut ChaCha8Rng) -> Result<()> {
    let sphere = SurfaceModel::unit_sphere();
    let x = tuple(&sphere, &[(FRAC_PI_2, 0.0), (FRAC_PI_2, PI)])?;
    let e = uniform_energy(&sphere, &x)?;
    run.record(format!("antipodal E = {}", num(e)));
    run.check((e - 4.0 * PI * PI).abs() < 1e-8, || format!("antipodal E = {e}"));

    let torus = SurfaceModel::torus(1.0, 1.0)?;
    let square = SurfaceModel::doubled_square();
    let ell = SurfaceModel::ellipsoid(0.75)?;
    let gc = ClosedGeodesic::great_circle(&sphere, &random_point(&sphere, rng), &unit(rng))?;
    let classes = [
        (sphere.clone(), gc.clone(), 2),
        (sphere.clone(), gc, 3),
        (torus.clone(), ClosedGeodesic::torus_line(&torus, &random_point(&torus, rng), 1, 0)?, 2),
        (torus.clone(), ClosedGeodesic::torus_line(&torus, &random_point(&torus, rng), 1, 1)?, 2),
        (square.clone(), ClosedGeodesic::over_under(&square, true)?, 4),
        (ell.clone(), ClosedGeodesic::equator(&ell)?, 3),
    ];
    for (s, g, k) in &classes {
        let l2 = g.length().powi(2);
        match build_class(s, g, *k)? {
            ClassOutcome::Class(cl) => {
                let worst = cl
                    .samples
                    .iter()
                    .map(|(_, r)| (energy_from(r) - l2).abs() / l2)
                    .fold(0.0, f64::max);
                run.record(format!("{} k={k} samples={} worst relative {}", s.name(), cl.samples.len(), num(worst)));
                run.check(worst < 1e-6, || format!("{} k={k}: E deviates by {worst}", s.name()));
            }
            ClassOutcome::NotRotating { t0, .. } => run.check(false, || format!("{} k={k} not rotating at {t0}", s.name())),
        }
    }
    Ok(())
}

/// Half-geodesic rigidity on an oblate ellipsoid.
fn criterion_9(run: &mut Run, _rng: &mut ChaCha8Rng) -> Result<()> {
    let s = SurfaceModel::ellipsoid(0.9)?;
    let h = s.min_gauss_curvature().unwrap();
    run.check((h - 0.81).abs() < 1e-12, || format!("H = {h}"));
    let m = ClosedGeodesic::meridian(&s, 0.0)?;
    run.check(m.length() > PI / h.sqrt(), || "meridian too short for the hypothesis".into());
    let cands = vec![
        ClosedGeodesic::meridian(&s, 0.7)?,
        ClosedGeodesic::meridian(&s, 1.9)?,
        ClosedGeodesic::meridian(&s, 2.5)?,
        ClosedGeodesic::equator(&s)?,
    ];
    let rep = verify_theorem_behavior(&s, &m, &cands, h)?;
    run.check(rep.violations == 0, || format!("{} violations", rep.violations));
    for c in &rep.checks {
        run.record(format!(
            "candidate {} half={} hits={} antipode_error={} length_error={}",
            c.index,
            c.half_geodesic,
            c.intersections.len(),
            c.antipode_error.map_or("na".into(), num),
            c.length_error.map_or("na".into(), num)
        ));
        if c.index < 3 {
            run.check(c.half_geodesic, || format!("meridian {} not a half-geodesic", c.index));
            run.check(c.antipode_error.is_some_and(|e| e < 1e-4), || format!("meridian {} antipode", c.index));
            run.check(c.length_error.is_some_and(|e| e < 1e-5), || format!("meridian {} length", c.index));
        } else {
            run.check(!c.intersections.is_empty() && c.length_ok, || "equator check".into());
            run.check(c.length >= m.length(), || "equator shorter than the meridian".into());
        }
    }
    Ok(())
}

type Criterion = fn(&mut Run, &mut ChaCha8Rng) -> Result<()>;

const CRITERIA: [(&str, Criterion, Duration); 9] = [
    ("sphere half-geodesics", criterion_1, Duration::from_secs(10)),
    ("torus census", criterion_2, Duration::from_secs(60)),
    ("directional derivative oracle", criterion_3, Duration::from_secs(60)),
    ("energy gradient", criterion_4, Duration::MAX),
    ("correspondence", criterion_5, Duration::MAX),
    ("doubled square", criterion_6, Duration::from_secs(30)),
    ("ellipsoid sweep", criterion_7, Duration::from_secs(600)),
    ("energy identity", criterion_8, Duration::MAX),
    ("rigidity spot-check", criterion_9, Duration::MAX),
];

fn run_criterion(i: usize) -> (Run, Duration) {
    let (_, f, _) = CRITERIA[i];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + i as u64);
    let mut run = Run::default();
    let start = Instant::now();
    if let Err(e) = f(&mut run, &mut rng) {
        run.failures.push(format!("error: {e}"));
    }
    (run, start.elapsed())
}

fn out_dir() -> PathBuf {
    std::env::var_os("KGEO_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("kgeo-acceptance"))
}

/// Written to stderr directly so the lines survive the harness's output capture.
fn report(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stderr(), "{line}");
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("KGEO_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |n: usize| only.as_ref().map_or(true, |o| o.contains(&n));
    let dir = out_dir();
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut logs = Vec::new();
    for (i, (name, _, limit)) in CRITERIA.iter().enumerate() {
        if !selected(i + 1) {
            continue;
        }
        let (run, took) = run_criterion(i);
        let mut failures = run.failures.clone();
        if took > *limit {
            failures.push(format!("runtime {:.1}s over {:.0}s", took.as_secs_f64(), limit.as_secs_f64()));
        }
        let ok = failures.is_empty();
        all_ok &= ok;
        let line = format!(
            "criterion {}: {} ({name}, {:.1}s){}",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            if ok { String::new() } else { format!(" {}", failures.join("; ")) }
        );
        report(&line);
        lines.push(line);
        logs.push((i, run.log));
    }

    if selected(10) {
        // rerun with the same seeds and compare the artifact files byte for byte
        let first = dir.join("run1");
        let second = dir.join("run2");
        std::fs::create_dir_all(&first).unwrap();
        std::fs::create_dir_all(&second).unwrap();
        let mut same = true;
        let start = Instant::now();
        for (i, log) in &logs {
            let name = format!("criterion_{}.txt", i + 1);
            std::fs::write(first.join(&name), log).unwrap();
            let (rerun, _) = run_criterion(*i);
            std::fs::write(second.join(&name), &rerun.log).unwrap();
            let a = std::fs::read(first.join(&name)).unwrap();
            let b = std::fs::read(second.join(&name)).unwrap();
            same &= a == b && !a.is_empty();
        }
        all_ok &= same;
        let line = format!(
            "criterion 10: {} (determinism, {:.1}s)",
            if same { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        report(&line);
        lines.push(line);
    }
    assert!(all_ok, "acceptance failures:\n{}", lines.join("\n"));
}
