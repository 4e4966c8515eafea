//! 1/k-geodesic classification, Grove–Shiohama criticality and numerical
//! checks of the half-geodesic rigidity statements.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::distance::{self, candidates, classify_set, continue_segment, PointKind, Segment};
use crate::energy::TuplePoint;
use crate::error::{Error, Result};
use crate::export::{num, Svg};
use crate::geodesic::ClosedGeodesic;
use crate::surfaces::{SurfaceModel, SurfacePoint, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    NotKGeodesic,
    OpenlyK,
    StrictK,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KSample {
    pub t: f64,
    pub distance: f64,
    pub defect: f64,
    pub kind: PointKind,
    pub second_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KGeodesicReport {
    pub length: f64,
    pub k: usize,
    pub verdict: Verdict,
    /// `max_t [l/k − d(γ(t), γ(t + 2π/k))]`.
    pub defect: f64,
    pub witness_t: f64,
    /// A parameter whose pair is a cut pair (strict case).
    pub cut_witness: Option<f64>,
    /// Some sampled pair could not be classified with margin.
    pub inconclusive: bool,
    pub samples: Vec<KSample>,
}

impl KGeodesicReport {
    pub fn tol(&self) -> f64 {
        1e-5 * self.length
    }

    pub const CSV_HEADER: &'static str = "k,length,verdict,defect,witness_t,cut_witness,inconclusive";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{},{},{},{}",
            self.k,
            num(self.length),
            self.verdict,
            num(self.defect),
            num(self.witness_t),
            self.cut_witness.map_or("none".into(), num),
            self.inconclusive
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KOptions {
    pub samples: usize,
    /// Stop at the first sample whose defect exceeds the tolerance.
    pub early_exit: bool,
    pub refine: bool,
}

impl Default for KOptions {
    fn default() -> Self {
        Self {
            samples: 128,
            early_exit: true,
            refine: true,
        }
    }
}

fn pair_sample(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize, t: f64) -> Result<KSample> {
    let (a, _) = g.evaluate(t);
    let (b, _) = g.evaluate(t + TAU / k as f64);
    let set = distance::minimizers(surface, &a, &b)?;
    let pc = classify_set(surface, &set);
    Ok(KSample {
        t,
        distance: set.distance,
        defect: g.length() / k as f64 - set.distance,
        kind: pc.kind,
        second_gap: set.second_gap,
    })
}

/// Sample order that spreads early evaluations over the circle.
fn spread_order(n: usize) -> Vec<usize> {
    let bits = usize::BITS - n.next_power_of_two().leading_zeros() - 1;
    let mut out: Vec<usize> = (0..n.next_power_of_two())
        .map(|i| if bits == 0 { i } else { i.reverse_bits() >> (usize::BITS - bits) })
        .filter(|&i| i < n)
        .collect();
    out.dedup();
    out
}

/// Golden-section maximization of `f` on `[a, b]`.
fn golden_max(mut a: f64, mut b: f64, iters: usize, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

pub fn is_k_geodesic(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize) -> Result<KGeodesicReport> {
    is_k_geodesic_with(surface, g, k, &KOptions::default())
}

/// Tests `d(γ(t), γ(t + 2π/k)) = l/k` on a t-grid with refinement.
pub fn is_k_geodesic_with(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize, opts: &KOptions) -> Result<KGeodesicReport> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    let n = opts.samples.max(4);
    let l = g.length();
    let tol = 1e-5 * l;
    let ts: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
    let order = spread_order(n);
    let mut samples: Vec<Option<KSample>> = vec![None; n];
    // evaluate in parallel batches so that a failure stops the scan early
    let batch = rayon::current_num_threads().max(1) * 2;
    let mut failed = false;
    for chunk in order.chunks(batch) {
        let got: Vec<Result<KSample>> = chunk.par_iter().map(|&i| pair_sample(surface, g, k, ts[i])).collect();
        for (&i, s) in chunk.iter().zip(got) {
            let s = s?;
            failed |= s.defect >= tol;
            samples[i] = Some(s);
        }
        if failed && opts.early_exit {
            break;
        }
    }
    let mut done: Vec<KSample> = samples.iter().flatten().copied().collect();
    done.sort_by(|a, b| a.t.total_cmp(&b.t));
    let h = TAU / n as f64;

    if !failed && opts.refine && done.len() == n {
        // golden-section search around the two largest local maxima of the defect
        let mut peaks: Vec<usize> = (0..n)
            .filter(|&i| done[i].defect >= done[(i + n - 1) % n].defect && done[i].defect >= done[(i + 1) % n].defect)
            .collect();
        peaks.sort_by(|&a, &b| done[b].defect.total_cmp(&done[a].defect).then(a.cmp(&b)));
        for &i in peaks.iter().take(2) {
            if done[i].defect < -10.0 * tol {
                continue;
            }
            let t0 = done[i].t;
            let (t, _) = golden_max(t0 - h, t0 + h, 6, |t| Ok(pair_sample(surface, g, k, t)?.defect))?;
            let s = pair_sample(surface, g, k, t)?;
            failed |= s.defect >= tol;
            done.push(s);
        }
    }

    let cut_witness = if failed {
        None
    } else if let Some(s) = done.iter().find(|s| matches!(s.kind, PointKind::OrdinaryCut | PointKind::SingularCut)) {
        Some(s.t)
    } else if opts.refine && done.len() >= n {
        // isolated cut events: refine where the second-shortest branch comes closest
        let s = done[..n]
            .iter()
            .filter(|s| s.second_gap.is_finite())
            .min_by(|a, b| a.second_gap.total_cmp(&b.second_gap))
            .copied()
            .unwrap_or(done[0]);
        if s.second_gap.is_finite() && s.second_gap < 0.1 * l / k as f64 {
            let (t, _) = golden_max(s.t - h, s.t + h, 12, |t| Ok(-pair_sample(surface, g, k, t)?.second_gap))?;
            let r = pair_sample(surface, g, k, t)?;
            let cut = matches!(r.kind, PointKind::OrdinaryCut | PointKind::SingularCut);
            done.push(r);
            if r.defect >= tol {
                failed = true;
            }
            cut.then_some(r.t)
        } else {
            None
        }
    } else {
        None
    };

    let worst = done
        .iter()
        .max_by(|a, b| a.defect.total_cmp(&b.defect))
        .copied()
        .unwrap();
    let verdict = if failed || worst.defect >= tol {
        Verdict::NotKGeodesic
    } else if cut_witness.is_some() {
        Verdict::StrictK
    } else {
        Verdict::OpenlyK
    };
    done.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(KGeodesicReport {
        length: l,
        k,
        verdict,
        defect: worst.defect,
        witness_t: worst.t,
        cut_witness: if verdict == Verdict::NotKGeodesic { None } else { cut_witness },
        inconclusive: done.iter().any(|s| s.kind == PointKind::Inconclusive),
        samples: done,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum MinimalK {
    Found(usize),
    NotFound(usize),
}

impl MinimalK {
    pub fn value(&self) -> Option<usize> {
        match self {
            MinimalK::Found(k) => Some(*k),
            MinimalK::NotFound(_) => None,
        }
    }
}

pub const DEFAULT_K_MAX: usize = 64;

/// Smallest `k ∈ 2..=k_max` for which `γ` is a 1/k-geodesic.
pub fn minimal_k(surface: &SurfaceModel, g: &ClosedGeodesic, k_max: usize) -> Result<MinimalK> {
    minimal_k_with(surface, g, k_max, &KOptions::default())
}

pub fn minimal_k_with(surface: &SurfaceModel, g: &ClosedGeodesic, k_max: usize, opts: &KOptions) -> Result<MinimalK> {
    for k in 2..=k_max {
        if is_k_geodesic_with(surface, g, k, opts)?.verdict != Verdict::NotKGeodesic {
            return Ok(MinimalK::Found(k));
        }
    }
    Ok(MinimalK::NotFound(k_max))
}

/// Angular tolerance of the gap criterion.
pub const TOL_ANGLE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSCriticalReport {
    pub p: SurfacePoint,
    pub q: SurfacePoint,
    pub critical: bool,
    /// Angles (frame at `q`) of the minimizing directions toward `p`.
    pub angles: Vec<f64>,
    pub gaps: Vec<f64>,
    pub max_gap: f64,
    /// Frame direction making an angle above π/2 with every minimizer.
    pub witness: Option<[f64; 2]>,
    pub continuum: bool,
}

impl GSCriticalReport {
    pub fn witness_tangent(&self, surface: &SurfaceModel) -> Option<TangentVector> {
        self.witness
            .and_then(|w| surface.from_frame(&self.q, &Vector2::new(w[0], w[1])).ok())
    }
}

/// Grove–Shiohama criticality of `q` for `d_p` via the 2-D gap criterion.
pub fn gs_critical(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint) -> Result<GSCriticalReport> {
    let set = distance::minimizers(surface, q, p)?;
    if set.is_base() {
        return Err(Error::InvalidArgument("q coincides with p".into()));
    }
    let dirs = set.at_q();
    let mut angles: Vec<f64> = set.segments.iter().map(|s| s.dir_q.y.atan2(s.dir_q.x).rem_euclid(TAU)).collect();
    angles.sort_by(f64::total_cmp);
    let gaps: Vec<f64> = if set.continuum {
        Vec::new()
    } else {
        (0..angles.len())
            .map(|i| {
                let next = if i + 1 < angles.len() { angles[i + 1] } else { angles[0] + TAU };
                next - angles[i]
            })
            .collect()
    };
    let (max_gap, bisector) = dirs.max_gap();
    let critical = max_gap <= PI + TOL_ANGLE;
    Ok(GSCriticalReport {
        p: set.p,
        q: set.q,
        critical,
        angles,
        gaps,
        max_gap,
        witness: (!critical).then(|| [bisector.cos(), bisector.sin()]),
        continuum: set.continuum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub q: SurfacePoint,
    pub distance: f64,
    pub multiplicity: usize,
    pub max_gap: f64,
}

/// Equations for an active set of two (equal length, antiparallel) or three
/// (equal lengths) segments.
fn active_residual(segs: &[Segment]) -> Vec<f64> {
    if segs.len() == 2 {
        let (a, b) = (&segs[0], &segs[1]);
        vec![a.length - b.length, a.dir_q.x * b.dir_q.y - a.dir_q.y * b.dir_q.x]
    } else {
        vec![segs[0].length - segs[1].length, segs[0].length - segs[2].length]
    }
}

fn solve_active(surface: &SurfaceModel, p: &SurfacePoint, q0: &SurfacePoint, segs0: &[Segment], reach: f64) -> Option<SurfacePoint> {
    let mut q = *q0;
    let mut segs = segs0.to_vec();
    let diam = surface.diameter();
    let eval = |q: &SurfacePoint, segs: &[Segment]| -> Option<Vec<Segment>> {
        segs.iter().map(|s| continue_segment(surface, q, p, s).ok()).collect()
    };
    for _ in 0..40 {
        let r = DVector::from_vec(active_residual(&segs));
        if r.norm() < 1e-13 * surface.diameter().max(1.0) {
            return Some(q);
        }
        // keep the difference step well inside the residual scale (the length
        // difference has a kink at a continuum)
        let h = (1e-7 * diam).min(1e-2 * r.norm()).max(1e-14 * diam);
        let mut jac = DMatrix::zeros(r.len(), 2);
        for a in 0..2 {
            let (du, dv) = if a == 0 { (h, 0.0) } else { (0.0, h) };
            let qh = SurfacePoint::on_sheet(q.u + du, q.v + dv, q.sheet);
            let sh = eval(&qh, &segs)?;
            jac.set_column(a, &((DVector::from_vec(active_residual(&sh)) - &r) / h));
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd.solve(&(-&r), 1e-6 * smax).ok()?;
        let mut accepted = false;
        let mut lam = 1.0;
        while lam > 1e-4 {
            let qn = SurfacePoint::on_sheet(q.u + lam * step[0], q.v + lam * step[1], q.sheet);
            if let Some(sn) = eval(&qn, &segs) {
                if DVector::from_vec(active_residual(&sn)).norm() < r.norm() {
                    q = qn;
                    segs = sn;
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
        if (q.u - q0.u).hypot(q.v - q0.v) > reach {
            return None;
        }
    }
    let r = active_residual(&segs);
    (r.iter().map(|x| x * x).sum::<f64>().sqrt() < 1e-10 * surface.diameter().max(1.0)).then_some(q)
}

fn chart_grid(surface: &SurfaceModel, n: usize) -> (Vec<SurfacePoint>, f64) {
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => {
            let pts = (0..n)
                .flat_map(|i| (0..n).map(move |j| SurfacePoint::new(PI * (i as f64 + 0.5) / n as f64, TAU * j as f64 / n as f64)))
                .collect();
            (pts, TAU / n as f64)
        }
        SurfaceModel::FlatTorus { a, b } => {
            let pts = (0..n)
                .flat_map(|i| (0..n).map(move |j| SurfacePoint::new(a * i as f64 / n as f64, b * j as f64 / n as f64)))
                .collect();
            (pts, a.max(*b) / n as f64)
        }
        SurfaceModel::DoubledPolygon(poly) => {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
            for v in poly.vertices() {
                x0 = x0.min(v.x);
                x1 = x1.max(v.x);
                y0 = y0.min(v.y);
                y1 = y1.max(v.y);
            }
            let h = (x1 - x0).max(y1 - y0) / n as f64;
            let mut pts = Vec::new();
            for sheet in [crate::surfaces::Sheet::Front, crate::surfaces::Sheet::Back] {
                for i in 0..n {
                    for j in 0..n {
                        let uv = Vector2::new(x0 + h * (i as f64 + 0.5), y0 + h * (j as f64 + 0.5));
                        if poly.contains(&uv) && poly.at_vertex(&uv).is_none() {
                            pts.push(SurfacePoint::on_sheet(uv.x, uv.y, sheet));
                        }
                    }
                }
            }
            (pts, h)
        }
    }
}

/// Grid scan for Grove–Shiohama critical points of `d_p`.
///
/// At each grid node the segments whose lengths are within a few cell sizes
/// of the shortest form the active set; every pair or triple of them is
/// solved for equal lengths (and opposite directions for pairs) and the
/// solutions are confirmed with [`gs_critical`].
pub fn enumerate_gs_critical(surface: &SurfaceModel, p: &SurfacePoint, grid_n: usize) -> Result<Vec<CriticalPoint>> {
    if grid_n < 16 {
        return Err(Error::InvalidArgument("grid_n must be at least 16".into()));
    }
    let p = surface.canonicalize(p);
    let (grid, h) = chart_grid(surface, grid_n);
    let eps = 3.0 * h * std::f64::consts::SQRT_2;
    let found: Vec<Vec<SurfacePoint>> = grid
        .par_iter()
        .map(|q0| -> Vec<SurfacePoint> {
            if surface.is_cone_point(q0) {
                return Vec::new();
            }
            let Ok(mut segs) = candidates(surface, q0, &p, eps) else { return Vec::new() };
            let Some(l0) = segs.first().map(|s| s.length) else { return Vec::new() };
            if l0 < 1e-9 * surface.diameter() {
                return Vec::new();
            }
            segs.retain(|s| s.length <= l0 + eps);
            segs.truncate(6);
            let m = segs.len();
            let mut out = Vec::new();
            for i in 0..m {
                for j in i + 1..m {
                    if let Some(q) = solve_active(surface, &p, q0, &[segs[i].clone(), segs[j].clone()], 4.0 * h) {
                        out.push(q);
                    }
                    for l in j + 1..m {
                        if let Some(q) = solve_active(surface, &p, q0, &[segs[i].clone(), segs[j].clone(), segs[l].clone()], 4.0 * h) {
                            out.push(q);
                        }
                    }
                }
            }
            out
        })
        .collect();
    let tol = 1e-6 * surface.diameter();
    let mut pts: Vec<CriticalPoint> = Vec::new();
    for q in found.into_iter().flatten() {
        let q = surface.canonicalize(&q);
        if pts.iter().any(|c| surface.chord(&c.q, &q) < tol) {
            continue;
        }
        let Ok(rep) = gs_critical(surface, &p, &q) else { continue };
        if !rep.critical {
            continue;
        }
        let set = distance::minimizers(surface, &q, &p)?;
        pts.push(CriticalPoint {
            q,
            distance: set.distance,
            multiplicity: set.multiplicity(),
            max_gap: rep.max_gap,
        });
    }
    // snap to clean values
    for c in &mut pts {
        let snap = |x: f64| {
            let r = (x * 1e9).round() / 1e9;
            if (r - x).abs() < 1e-10 { r } else { x }
        };
        c.q = surface.canonicalize(&SurfacePoint::on_sheet(snap(c.q.u), snap(c.q.v), c.q.sheet));
    }
    pts.sort_by(|a, b| a.q.u.total_cmp(&b.q.u).then(a.q.v.total_cmp(&b.q.v)));
    Ok(pts)
}

/// Both endpoints of a balanced pair are Grove–Shiohama critical for each
/// other's distance function.
pub fn balanced_implies_gs(surface: &SurfaceModel, x: &TuplePoint) -> Result<bool> {
    if x.k() != 2 {
        return Err(Error::InvalidArgument("expected a 2-tuple".into()));
    }
    let (p, q) = (x.point(0), x.point(1));
    Ok(gs_critical(surface, p, q)?.critical && gs_critical(surface, q, p)?.critical)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intersection {
    /// Arc length along `γ`.
    pub s_gamma: f64,
    /// Arc length along the candidate.
    pub s_candidate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCheck {
    pub index: usize,
    pub length: f64,
    pub half_geodesic: bool,
    pub intersections: Vec<Intersection>,
    pub length_ok: bool,
    /// Largest distance from `γ(t + π)` to the candidate over intersections.
    pub antipode_error: Option<f64>,
    pub length_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub length: f64,
    pub bound: f64,
    pub checks: Vec<CandidateCheck>,
    pub violations: usize,
}

const POLY_SAMPLES: usize = 4096;

fn ambient_polyline(g: &ClosedGeodesic) -> Result<Vec<Vector3<f64>>> {
    let s = g.surface();
    (0..=POLY_SAMPLES)
        .map(|i| {
            let (p, _) = g.evaluate(TAU * i as f64 / POLY_SAMPLES as f64);
            s.embed(&p).ok_or_else(|| Error::InvalidArgument("theorem check needs an embedded surface".into()))
        })
        .collect()
}

/// Closest points of segments `[a0,a1]` and `[b0,b1]`: (distance, s, t).
fn segment_distance(a0: &Vector3<f64>, a1: &Vector3<f64>, b0: &Vector3<f64>, b1: &Vector3<f64>) -> (f64, f64, f64) {
    let d1 = a1 - a0;
    let d2 = b1 - b0;
    let r = a0 - b0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;
    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((a0 + d1 * s - (b0 + d2 * t)).norm(), s, t)
}

fn point_to_polyline(x: &Vector3<f64>, poly: &[Vector3<f64>]) -> f64 {
    poly.windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let t = ((x - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            (w[0] + d * t - x).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn intersections(g: &[Vector3<f64>], c: &[Vector3<f64>], lg: f64, lc: f64) -> Vec<Intersection> {
    let n = POLY_SAMPLES as f64;
    let mut hits: Vec<(f64, Intersection)> = Vec::new();
    let tol = 1e-4;
    for i in 0..g.len() - 1 {
        for j in 0..c.len() - 1 {
            // cheap rejection
            if (g[i] - c[j]).norm() > 4.0 * (lg.max(lc) / n) + tol {
                continue;
            }
            let (d, s, t) = segment_distance(&g[i], &g[i + 1], &c[j], &c[j + 1]);
            if d < tol {
                let sg = (i as f64 + s) / n * lg;
                let sc = (j as f64 + t) / n * lc;
                if let Some(h) = hits.iter_mut().find(|h| {
                    let dg = (h.1.s_gamma - sg).abs();
                    dg.min(lg - dg) < 1e-2 * lg
                }) {
                    if d < h.0 {
                        *h = (d, Intersection { s_gamma: sg, s_candidate: sc });
                    }
                } else {
                    hits.push((d, Intersection { s_gamma: sg, s_candidate: sc }));
                }
            }
        }
    }
    hits.into_iter().map(|h| h.1).collect()
}

/// Checks the conclusions of the half-geodesic rigidity theorem for a
/// half-geodesic `γ` against candidate closed geodesics, on a surface with
/// curvature at least `h > 0`.
pub fn verify_theorem_behavior(surface: &SurfaceModel, g: &ClosedGeodesic, candidates: &[ClosedGeodesic], h: f64) -> Result<TheoremReport> {
    if h <= 0.0 {
        return Err(Error::InvalidArgument("curvature bound must be positive".into()));
    }
    let l = g.length();
    let bound = PI / h.sqrt();
    if l <= bound * (1.0 + 1e-9) {
        return Err(Error::HypothesisUnmet { length: l, bound });
    }
    let gp = ambient_polyline(g)?;
    let len_tol = 1e-5;
    let checks: Vec<Result<CandidateCheck>> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, c)| {
            let cp = ambient_polyline(c)?;
            let hits = intersections(&gp, &cp, l, c.length());
            let half = if hits.is_empty() {
                false
            } else {
                let opts = KOptions {
                    samples: 32,
                    early_exit: true,
                    refine: false,
                };
                is_k_geodesic_with(surface, c, 2, &opts)?.verdict != Verdict::NotKGeodesic
            };
            let mut antipode_error = None;
            let mut length_error = None;
            if half {
                let mut worst: f64 = 0.0;
                for hit in &hits {
                    let (pt, _) = g.evaluate(TAU * (hit.s_gamma + l / 2.0) / l);
                    worst = worst.max(point_to_polyline(&surface.embed(&pt).unwrap(), &cp));
                }
                antipode_error = Some(worst);
                length_error = Some((c.length() - l).abs());
            }
            Ok(CandidateCheck {
                index,
                length: c.length(),
                half_geodesic: half,
                length_ok: hits.is_empty() || c.length() >= l - len_tol,
                intersections: hits,
                antipode_error,
                length_error,
            })
        })
        .collect();
    let checks: Vec<CandidateCheck> = checks.into_iter().collect::<Result<_>>()?;
    let violations = checks
        .iter()
        .filter(|c| !c.length_ok || c.antipode_error.is_some_and(|e| e > 1e-4) || c.length_error.is_some_and(|e| e > len_tol))
        .count();
    Ok(TheoremReport {
        length: l,
        bound,
        checks,
        violations,
    })
}

fn chart_xy(surface: &SurfaceModel, p: &SurfacePoint) -> (f64, f64) {
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => (p.v.rem_euclid(TAU), PI - p.u),
        _ => (p.u, p.v),
    }
}

fn chart_box(surface: &SurfaceModel) -> (f64, f64, f64, f64) {
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => (0.0, TAU, 0.0, PI),
        SurfaceModel::FlatTorus { a, b } => (0.0, a.max(*b), 0.0, a.max(*b)),
        SurfaceModel::DoubledPolygon(poly) => {
            let xs = poly.vertices().iter().map(|v| v.x);
            let ys = poly.vertices().iter().map(|v| v.y);
            let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
            let s = (x1 - x0).max(y1 - y0);
            (x0, x0 + s, y0, y0 + s)
        }
    }
}

/// Chart plot of `γ` with the witnesses of a k-geodesic report.
pub fn report_svg(surface: &SurfaceModel, g: &ClosedGeodesic, report: &KGeodesicReport, header: &str) -> String {
    let (x0, x1, y0, y1) = chart_box(surface);
    let mut svg = Svg::new(x0, x1, y0, y1);
    svg.comment(header);
    svg.frame();
    if let Some(poly) = surface.polygon() {
        let mut pts: Vec<(f64, f64)> = poly.vertices().iter().map(|v| (v.x, v.y)).collect();
        pts.push(pts[0]);
        svg.polyline(&pts, "#444", 1.5);
    }
    let n = 1024;
    let pts: Vec<SurfacePoint> = (0..=n).map(|i| g.evaluate(TAU * i as f64 / n as f64).0).collect();
    let jump = 0.25 * (x1 - x0);
    let front: Vec<(f64, f64)> = pts.iter().map(|p| chart_xy(surface, p)).collect();
    if surface.polygon().is_some() {
        // front sheet solid, back sheet dashed-by-colour
        for sheet in [crate::surfaces::Sheet::Front, crate::surfaces::Sheet::Back] {
            let colour = if sheet == crate::surfaces::Sheet::Front { "#1f5fbf" } else { "#bf5f1f" };
            let mut run = Vec::new();
            for p in &pts {
                if p.sheet == sheet {
                    run.push(chart_xy(surface, p));
                } else {
                    svg.path_with_breaks(&run, jump, colour, 2.0);
                    run.clear();
                }
            }
            svg.path_with_breaks(&run, jump, colour, 2.0);
        }
    } else {
        svg.path_with_breaks(&front, jump, "#1f5fbf", 2.0);
    }
    let mark = |svg: &mut Svg, t: f64, colour: &str| {
        for i in 0..report.k {
            let (p, _) = g.evaluate(t + TAU * i as f64 / report.k as f64);
            let (x, y) = chart_xy(surface, &p);
            svg.circle(x, y, 5.0, colour);
        }
    };
    if let Some(t) = report.cut_witness {
        mark(&mut svg, t, "#c00");
    }
    mark(&mut svg, report.witness_t, "#080");
    svg.text(x0, y1, &format!("k={} {:?} defect={}", report.k, report.verdict, num(report.defect)));
    svg.finish()
}

/// CSV of the sampled pairs of a k-geodesic report.
pub fn report_csv(report: &KGeodesicReport, header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(&crate::export::comment_header(&format!("{}\n{}", KGeodesicReport::CSV_HEADER, report.csv_row())));
    s.push_str("t,distance,defect,kind,second_gap\n");
    for x in &report.samples {
        s.push_str(&format!(
            "{},{},{},{:?},{}\n",
            num(x.t),
            num(x.distance),
            num(x.defect),
            x.kind,
            num(x.second_gap)
        ));
    }
    s
}
