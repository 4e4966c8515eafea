//! Uniform energy on k-tuples, balanced points and their associated closed
//! geodesics.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::Serialize;

use crate::distance::{self, candidates, classify_set, continue_segment, DirectionSet, MinimizerSet, PointClass, PointKind, Segment};
use crate::error::{Error, Result};
use crate::geodesic::{self, close_up, shoot_frame, ClosedGeodesic};
use crate::polygon;
use crate::surfaces::{SurfaceModel, SurfacePoint, TangentVector};

/// An element of `M^k` with lazily computed consecutive minimizer sets.
#[derive(Debug)]
pub struct TuplePoint {
    points: Vec<SurfacePoint>,
    pairs: OnceLock<Vec<MinimizerSet>>,
}

impl Clone for TuplePoint {
    fn clone(&self) -> Self {
        let pairs = OnceLock::new();
        if let Some(p) = self.pairs.get() {
            let _ = pairs.set(p.clone());
        }
        Self {
            points: self.points.clone(),
            pairs,
        }
    }
}

impl PartialEq for TuplePoint {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points
    }
}

impl TuplePoint {
    pub fn new(surface: &SurfaceModel, points: Vec<SurfacePoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a tuple needs k >= 2 points".into()));
        }
        Ok(Self {
            points: points.iter().map(|p| surface.canonicalize(p)).collect(),
            pairs: OnceLock::new(),
        })
    }

    /// Equally spaced points `γ(t + 2πi/k)`.
    pub fn on_geodesic(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize, t: f64) -> Result<Self> {
        let pts = (0..k).map(|i| g.evaluate(t + TAU * i as f64 / k as f64).0).collect();
        Self::new(surface, pts)
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[SurfacePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &SurfacePoint {
        &self.points[i % self.k()]
    }

    /// Replaces a point and invalidates the cache.
    pub fn set_point(&mut self, surface: &SurfaceModel, i: usize, p: SurfacePoint) {
        self.points[i] = surface.canonicalize(&p);
        self.pairs = OnceLock::new();
    }

    /// Minimizer sets for `(x_i, x_{i+1})`, indices mod k.
    pub fn pairs(&self, surface: &SurfaceModel) -> Result<&[MinimizerSet]> {
        if let Some(p) = self.pairs.get() {
            return Ok(p);
        }
        let k = self.k();
        let mut sets = Vec::with_capacity(k);
        if k == 2 {
            let s = distance::minimizers(surface, &self.points[0], &self.points[1])?;
            sets.push(s.clone());
            sets.push(s.reversed());
        } else {
            for i in 0..k {
                sets.push(distance::minimizers(surface, &self.points[i], &self.points[(i + 1) % k])?);
            }
        }
        let _ = self.pairs.set(sets);
        Ok(self.pairs.get().unwrap())
    }

    pub fn distances(&self, surface: &SurfaceModel) -> Result<Vec<f64>> {
        Ok(self.pairs(surface)?.iter().map(|s| s.distance).collect())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self
            .points
            .iter()
            .map(|p| serde_json::json!({"u": p.u, "v": p.v, "sheet": format!("{:?}", p.sheet)}))
            .collect::<Vec<_>>())
    }
}

/// `E(x̄) = k · Σ d(x_i, x_{i+1})²`.
pub fn uniform_energy(surface: &SurfaceModel, x: &TuplePoint) -> Result<f64> {
    let k = x.k() as f64;
    Ok(k * x.distances(surface)?.iter().map(|d| d * d).sum::<f64>())
}

fn first_ordinary(pairs: &[MinimizerSet]) -> Option<usize> {
    pairs.iter().position(|s| s.continuum || s.multiplicity() >= 2)
}

/// Gradient of the uniform energy in frame components, one vector per point.
pub fn energy_gradient_frame(surface: &SurfaceModel, x: &TuplePoint) -> Result<Vec<Vector2<f64>>> {
    let pairs = x.pairs(surface)?;
    if let Some(i) = first_ordinary(pairs) {
        return Err(Error::OrdinaryPair(i));
    }
    let k = x.k();
    Ok((0..k)
        .map(|i| {
            let next = &pairs[i];
            let prev = &pairs[(i + k - 1) % k];
            let xi = next.segments.first().map_or(Vector2::zeros(), |s| s.dir_q * next.distance);
            let eta = prev.segments.first().map_or(Vector2::zeros(), |s| -s.end_dir * prev.distance);
            -(xi + eta) * (2.0 * k as f64)
        })
        .collect())
}

/// Gradient of the uniform energy in chart-basis components.
pub fn energy_gradient(surface: &SurfaceModel, x: &TuplePoint) -> Result<Vec<TangentVector>> {
    energy_gradient_frame(surface, x)?
        .iter()
        .zip(x.points())
        .map(|(g, p)| surface.from_frame(p, g))
        .collect()
}

/// How the directions at a cone-point vertex split its cone angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeDegenerate {
    pub vertex: usize,
    pub cone_angle: f64,
    /// The two angles cut out of the cone by the directions to the neighbours.
    pub parts: (f64, f64),
    /// Both parts are at least half the cone angle (up to tolerance).
    pub split_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BalanceClass {
    NotBalanced,
    SmoothBalanced,
    UniquelyBalanced,
    NonSmoothBalanced,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub spacing_residual: f64,
    pub antipodal_residual: f64,
    /// Matched directions `ξ_i` (frame components at `x_i`).
    pub xi: Vec<[f64; 2]>,
    pub distances: Vec<f64>,
    pub balanced: bool,
    /// No pair is an ordinary cut pair.
    pub uniquely: bool,
    /// No pair is a cut pair (and none is inconclusive).
    pub smooth: bool,
    /// `cut_pairs[i]` refers to `(x_i, x_{i+1})`.
    pub cut_pairs: Vec<bool>,
    pub ordinary_pairs: Vec<bool>,
    pub pair_classes: Vec<PointKind>,
}

impl BalanceReport {
    pub fn class(&self) -> BalanceClass {
        if !self.balanced {
            BalanceClass::NotBalanced
        } else if self.smooth {
            BalanceClass::SmoothBalanced
        } else if self.uniquely && !self.cut_pairs.iter().any(|&c| c) {
            BalanceClass::UniquelyBalanced
        } else {
            BalanceClass::NonSmoothBalanced
        }
    }

    pub fn non_smooth(&self) -> bool {
        self.balanced && self.cut_pairs.iter().any(|&c| c)
    }

    pub fn labels(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.balanced {
            v.push("NotBalanced");
            return v;
        }
        if self.smooth {
            v.push("SmoothBalanced");
        }
        if self.uniquely {
            v.push("UniquelyBalanced");
        }
        if self.non_smooth() {
            v.push("NonSmoothBalanced");
        }
        v
    }

    pub fn cut_mask(&self) -> u64 {
        self.cut_pairs
            .iter()
            .enumerate()
            .fold(0, |m, (i, &c)| if c && i < 64 { m | (1 << i) } else { m })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BalanceTolerances {
    pub spacing: f64,
    pub antipodal: f64,
}

impl BalanceTolerances {
    pub fn for_surface(surface: &SurfaceModel) -> Self {
        Self {
            spacing: 1e-6 * surface.diameter(),
            antipodal: 1e-5,
        }
    }
}

fn cone_split(surface: &SurfaceModel, x: &TuplePoint, i: usize) -> ConeDegenerate {
    let poly = surface.polygon().unwrap();
    let v = poly.at_vertex(&x.point(i).uv()).unwrap();
    let k = x.k();
    let alpha = poly.interior_angle(v);
    let origin = poly.vertex(v);
    let e = poly.vertex(v + 1) - origin;
    let base = e.y.atan2(e.x);
    // angle inside the wedge, measured from the outgoing edge, and allowed sheets
    let place = |p: &SurfacePoint| -> (f64, Vec<bool>) {
        let d = p.uv() - origin;
        let a = if d.norm() == 0.0 {
            0.0
        } else {
            (d.y.atan2(d.x) - base).rem_euclid(TAU).min(alpha)
        };
        let seam = poly.on_edge(&p.uv()).is_some() || poly.at_vertex(&p.uv()).is_some();
        let sheets = if seam {
            vec![true, false]
        } else {
            vec![p.sheet == crate::surfaces::Sheet::Front]
        };
        (a, sheets)
    };
    let (a1, s1) = place(x.point(i + k - 1));
    let (a2, s2) = place(x.point(i + 1));
    let cone = 2.0 * alpha;
    let mut best: (f64, f64) = (0.0, cone);
    for &f1 in &s1 {
        for &f2 in &s2 {
            let t1 = if f1 { a1 } else { cone - a1 };
            let t2 = if f2 { a2 } else { cone - a2 };
            let split = (t1 - t2).abs();
            let parts = (split, cone - split);
            if parts.0.min(parts.1) > best.0.min(best.1) {
                best = parts;
            }
        }
    }
    ConeDegenerate {
        vertex: i,
        cone_angle: cone,
        parts: best,
        split_ok: best.0.min(best.1) >= alpha - 1e-9,
    }
}

/// Spacing and antipodality residuals with the balance classification.
pub fn balance_test(surface: &SurfaceModel, x: &TuplePoint, tol: &BalanceTolerances) -> Result<BalanceReport> {
    for i in 0..x.k() {
        if surface.is_cone_point(x.point(i)) {
            return Err(Error::ConePointVertex(cone_split(surface, x, i)));
        }
    }
    let pairs = x.pairs(surface)?;
    Ok(report_from_pairs(surface, pairs, tol))
}

pub(crate) fn report_from_pairs(surface: &SurfaceModel, pairs: &[MinimizerSet], tol: &BalanceTolerances) -> BalanceReport {
    let k = pairs.len();
    let distances: Vec<f64> = pairs.iter().map(|s| s.distance).collect();
    let spacing = (0..k)
        .map(|i| (distances[(i + k - 1) % k] - distances[i]).abs())
        .fold(0.0, f64::max);
    let mut antipodal: f64 = 0.0;
    let mut xi = Vec::with_capacity(k);
    for i in 0..k {
        let a = pairs[i].at_q();
        let b = pairs[(i + k - 1) % k].at_p();
        let (ang, x, _) = if a.is_empty() || b.is_empty() {
            (std::f64::consts::PI, Vector2::zeros(), Vector2::zeros())
        } else {
            a.distance_to(&b.negated())
        };
        antipodal = antipodal.max(2.0 * (ang / 2.0).sin());
        xi.push([x.x, x.y]);
    }
    let classes: Vec<PointClass> = pairs.iter().map(|s| classify_set(surface, s)).collect();
    let ordinary: Vec<bool> = classes.iter().map(|c| c.kind == PointKind::OrdinaryCut).collect();
    let cut: Vec<bool> = classes.iter().map(|c| c.is_cut()).collect();
    let inconclusive = classes.iter().any(|c| c.kind == PointKind::Inconclusive);
    let balanced = spacing <= tol.spacing && antipodal <= tol.antipodal && distances.iter().all(|&d| d > 0.0);
    BalanceReport {
        spacing_residual: spacing,
        antipodal_residual: antipodal,
        xi,
        distances,
        balanced,
        uniquely: !ordinary.iter().any(|&o| o),
        smooth: !cut.iter().any(|&c| c) && !inconclusive,
        cut_pairs: cut,
        ordinary_pairs: ordinary,
        pair_classes: classes.iter().map(|c| c.kind).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SearchMethod {
    /// Gauss–Newton on the balance residual over segment branches; reaches
    /// saddle and maximum type balanced points.
    Newton,
    /// Descent on E (with a residual fallback at ordinary pairs).
    Descent,
}

#[derive(Debug, Clone, Copy)]
pub struct FindOptions {
    pub method: SearchMethod,
    pub tol: Option<BalanceTolerances>,
    pub max_iter: usize,
    /// Candidate segments considered per pair by the Newton search.
    pub branches: usize,
}

impl Default for FindOptions {
    fn default() -> Self {
        Self {
            method: SearchMethod::Newton,
            tol: None,
            max_iter: 10_000,
            branches: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Outcome {
    Converged,
    Stalled,
    /// Consecutive points merged: the trivial class.
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub energy: f64,
    pub spacing: f64,
    pub antipodal: f64,
}

#[derive(Debug, Clone)]
pub struct FindResult {
    pub tuple: TuplePoint,
    pub report: Option<BalanceReport>,
    pub outcome: Outcome,
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
}

impl FindResult {
    pub fn trace_csv(&self, header: &str) -> String {
        let mut s = String::from(header);
        s.push_str("iter,E,spacing,antipodal\n");
        for r in &self.trace {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.iter,
                crate::export::num(r.energy),
                crate::export::num(r.spacing),
                crate::export::num(r.antipodal)
            ));
        }
        s
    }
}

pub const COLLAPSE_DIST: f64 = 1e-6;

/// Moves `p` along the frame vector `d` (exponential map on flat surfaces,
/// projected step on spheroids).
pub(crate) fn retract(surface: &SurfaceModel, p: &SurfacePoint, d: &Vector2<f64>) -> Result<SurfacePoint> {
    let n = d.norm();
    if n == 0.0 {
        return Ok(*p);
    }
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => {
            let sph = surface.spheroid().unwrap();
            let x = sph.embed(p.u, p.v) + geodesic::frame_to_ambient(&sph, p, d);
            Ok(geodesic::chart_point(&sph, &sph.project(&x), Some(p)))
        }
        SurfaceModel::FlatTorus { .. } => Ok(SurfacePoint::new(p.u + d.x, p.v + d.y)),
        SurfaceModel::DoubledPolygon(poly) => Ok(polygon::trace(poly, p, &(d / n), n)?.end),
    }
}

fn residual_vec(segs: &[Segment], k: usize) -> DVector<f64> {
    let mut r = DVector::zeros(2 * k);
    for i in 0..k {
        let next = &segs[i];
        let prev = &segs[(i + k - 1) % k];
        let v = next.dir_q * next.length - prev.end_dir * prev.length;
        r[2 * i] = v.x;
        r[2 * i + 1] = v.y;
    }
    r
}

fn continue_all(surface: &SurfaceModel, pts: &[SurfacePoint], segs: &[Segment]) -> Result<Vec<Segment>> {
    let k = pts.len();
    (0..k)
        .map(|i| continue_segment(surface, &pts[i], &pts[(i + 1) % k], &segs[i]))
        .collect()
}

enum BranchRun {
    Converged(Vec<SurfacePoint>, usize),
    Collapsed(Vec<SurfacePoint>, usize),
    Failed(Vec<SurfacePoint>, usize),
}

/// Levenberg–Marquardt on `r_i = d_i ξ_i + d_{i-1} η_i` with fixed segment
/// branches.
fn newton_branch(surface: &SurfaceModel, start: &[SurfacePoint], segs0: Vec<Segment>, max_iter: usize, trace: &mut Vec<TraceRow>) -> BranchRun {
    let k = start.len();
    let mut pts = start.to_vec();
    let mut segs = segs0;
    let mut r = residual_vec(&segs, k);
    let mut lambda = 1e-8;
    let h = 1e-7 * surface.diameter();
    let scale = surface.diameter();
    for it in 0..max_iter.min(60) {
        let e = k as f64 * segs.iter().map(|s| s.length * s.length).sum::<f64>();
        trace.push(TraceRow {
            iter: trace.len(),
            energy: e,
            spacing: 0.0,
            antipodal: r.norm(),
        });
        if segs.iter().any(|s| s.length < COLLAPSE_DIST) {
            return BranchRun::Collapsed(pts, it);
        }
        if r.norm() < 1e-12 * scale {
            return BranchRun::Converged(pts, it);
        }
        let mut jac = DMatrix::zeros(2 * k, 2 * k);
        let mut ok = true;
        for j in 0..k {
            for a in 0..2 {
                let mut d = Vector2::zeros();
                d[a] = h;
                let Ok(pj) = retract(surface, &pts[j], &d) else {
                    ok = false;
                    break;
                };
                let mut pp = pts.clone();
                pp[j] = pj;
                let mut ss = segs.clone();
                let prev = (j + k - 1) % k;
                match (
                    continue_segment(surface, &pp[prev], &pp[j], &segs[prev]),
                    continue_segment(surface, &pp[j], &pp[(j + 1) % k], &segs[j]),
                ) {
                    (Ok(a1), Ok(a2)) => {
                        ss[prev] = a1;
                        ss[j] = a2;
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
                let rp = residual_vec(&ss, k);
                jac.set_column(2 * j + a, &((rp - &r) / h));
            }
        }
        if !ok {
            return BranchRun::Failed(pts, it);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..10 {
            let mut m = jtj.clone();
            for d in 0..2 * k {
                m[(d, d)] += lambda * (1.0 + jtj[(d, d)]);
            }
            let Some(step) = m.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            // limit the step to a fraction of the diameter
            let norm = step.norm();
            let step = if norm > 0.25 * scale { step * (0.25 * scale / norm) } else { step };
            let moved: Result<Vec<SurfacePoint>> = (0..k)
                .map(|i| retract(surface, &pts[i], &Vector2::new(step[2 * i], step[2 * i + 1])))
                .collect();
            if let Ok(np) = moved {
                if let Ok(ns) = continue_all(surface, &np, &segs) {
                    let nr = residual_vec(&ns, k);
                    if nr.norm() < r.norm() {
                        pts = np;
                        segs = ns;
                        r = nr;
                        lambda = (lambda * 0.1).max(1e-14);
                        improved = true;
                        break;
                    }
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            return if r.norm() < 1e-9 * scale {
                BranchRun::Converged(pts, it)
            } else {
                BranchRun::Failed(pts, it)
            };
        }
    }
    if r.norm() < 1e-9 * scale {
        BranchRun::Converged(pts, max_iter)
    } else {
        BranchRun::Failed(pts, max_iter)
    }
}

/// Branch combinations ordered by total rank.
fn combos(counts: &[usize], limit: usize) -> Vec<Vec<usize>> {
    let k = counts.len();
    let max_total: usize = counts.iter().map(|c| c.saturating_sub(1)).sum();
    let mut out = Vec::new();
    for total in 0..=max_total {
        let mut cur = vec![0usize; k];
        fn rec(i: usize, left: usize, counts: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) {
            if out.len() >= limit {
                return;
            }
            if i == counts.len() {
                if left == 0 {
                    out.push(cur.clone());
                }
                return;
            }
            for r in 0..counts[i].min(left + 1) {
                cur[i] = r;
                rec(i + 1, left - r, counts, cur, out, limit);
            }
        }
        rec(0, total, counts, &mut cur, &mut out, limit);
        if out.len() >= limit {
            break;
        }
    }
    out
}

/// Searches for a balanced point starting from `seed`.
pub fn find_balanced(surface: &SurfaceModel, k: usize, seed: &TuplePoint, opts: &FindOptions) -> Result<FindResult> {
    if seed.k() != k {
        return Err(Error::InvalidArgument(format!("seed has {} points, expected {k}", seed.k())));
    }
    let tol = opts.tol.unwrap_or_else(|| BalanceTolerances::for_surface(surface));
    let d0 = seed.distances(surface)?;
    if d0.iter().any(|&d| d < COLLAPSE_DIST) {
        return Err(Error::InvalidArgument("seed has coincident consecutive points".into()));
    }
    let rep = balance_test(surface, seed, &tol)?;
    let e0 = uniform_energy(surface, seed)?;
    let trace = vec![TraceRow {
        iter: 0,
        energy: e0,
        spacing: rep.spacing_residual,
        antipodal: rep.antipodal_residual,
    }];
    if rep.balanced {
        return Ok(FindResult {
            tuple: seed.clone(),
            report: Some(rep),
            outcome: Outcome::Converged,
            iterations: 0,
            trace,
        });
    }
    match opts.method {
        SearchMethod::Newton => find_newton(surface, seed, opts, &tol, trace),
        SearchMethod::Descent => find_descent(surface, seed, opts, &tol, trace),
    }
}

fn find_newton(surface: &SurfaceModel, seed: &TuplePoint, opts: &FindOptions, tol: &BalanceTolerances, mut trace: Vec<TraceRow>) -> Result<FindResult> {
    let k = seed.k();
    let pts = seed.points().to_vec();
    let window = surface.diameter();
    let mut per_pair: Vec<Vec<Segment>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut c = candidates(surface, &pts[i], &pts[(i + 1) % k], window)?;
        c.truncate(opts.branches.max(1));
        per_pair.push(c);
    }
    let counts: Vec<usize> = per_pair.iter().map(|c| c.len()).collect();
    let mut collapsed: Option<(Vec<SurfacePoint>, usize)> = None;
    let mut last: Option<(Vec<SurfacePoint>, usize)> = None;
    let mut iterations = 0;
    for combo in combos(&counts, 64) {
        let segs: Vec<Segment> = combo.iter().enumerate().map(|(i, &r)| per_pair[i][r].clone()).collect();
        if k == 2 && segs[0].branch == segs[1].branch && matches!(surface, SurfaceModel::FlatTorus { .. }) {
            // a segment and its own reversal collapse immediately
        }
        match newton_branch(surface, &pts, segs, opts.max_iter, &mut trace) {
            BranchRun::Converged(p, it) => {
                iterations += it;
                let t = TuplePoint::new(surface, p.clone())?;
                if t.distances(surface)?.iter().any(|&d| d < COLLAPSE_DIST) {
                    collapsed = Some((p, it));
                    continue;
                }
                let rep = balance_test(surface, &t, tol)?;
                if rep.balanced {
                    trace.push(TraceRow {
                        iter: trace.len(),
                        energy: uniform_energy(surface, &t)?,
                        spacing: rep.spacing_residual,
                        antipodal: rep.antipodal_residual,
                    });
                    return Ok(FindResult {
                        tuple: t,
                        report: Some(rep),
                        outcome: Outcome::Converged,
                        iterations,
                        trace,
                    });
                }
                last = Some((p, it));
            }
            BranchRun::Collapsed(p, it) => {
                iterations += it;
                collapsed = Some((p, it));
            }
            BranchRun::Failed(p, it) => {
                iterations += it;
                last = Some((p, it));
            }
        }
    }
    let (outcome, p) = match (collapsed, last) {
        (Some((p, _)), _) => (Outcome::Collapsed, p),
        (None, Some((p, _))) => (Outcome::Stalled, p),
        (None, None) => (Outcome::Stalled, pts),
    };
    let t = TuplePoint::new(surface, p)?;
    let report = if outcome == Outcome::Collapsed { None } else { balance_test(surface, &t, tol).ok() };
    Ok(FindResult {
        tuple: t,
        report,
        outcome,
        iterations,
        trace,
    })
}

fn residual_functional(rep: &BalanceReport) -> f64 {
    rep.spacing_residual.powi(2) + rep.antipodal_residual.powi(2)
}

fn find_descent(surface: &SurfaceModel, seed: &TuplePoint, opts: &FindOptions, tol: &BalanceTolerances, mut trace: Vec<TraceRow>) -> Result<FindResult> {
    let k = seed.k();
    let mut x = seed.clone();
    let mut energy = uniform_energy(surface, &x)?;
    let mut step = 0.1 * surface.diameter() / (k as f64 * energy.max(1e-12)).sqrt();
    let mut iterations = 0;
    let finish = |x: TuplePoint, outcome: Outcome, iterations: usize, trace: Vec<TraceRow>| -> Result<FindResult> {
        let report = if outcome == Outcome::Collapsed { None } else { balance_test(surface, &x, tol).ok() };
        Ok(FindResult {
            tuple: x,
            report,
            outcome,
            iterations,
            trace,
        })
    };
    while iterations < opts.max_iter {
        iterations += 1;
        if x.distances(surface)?.iter().any(|&d| d < COLLAPSE_DIST) {
            return finish(x, Outcome::Collapsed, iterations, trace);
        }
        let rep = balance_test(surface, &x, tol)?;
        if rep.balanced {
            return finish(x, Outcome::Converged, iterations, trace);
        }
        match energy_gradient_frame(surface, &x) {
            Ok(g) => {
                let gn2: f64 = g.iter().map(|v| v.norm_squared()).sum();
                let mut accepted = false;
                while step > 1e-14 {
                    let pts: Result<Vec<SurfacePoint>> = (0..k).map(|i| retract(surface, x.point(i), &(-g[i] * step))).collect();
                    if let Ok(pts) = pts {
                        let cand = TuplePoint::new(surface, pts)?;
                        let e = uniform_energy(surface, &cand)?;
                        if e <= energy - 1e-4 * step * gn2 {
                            x = cand;
                            energy = e;
                            accepted = true;
                            step *= 2.0;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !accepted || step * gn2.sqrt() < 1e-10 {
                    return finish(x, Outcome::Stalled, iterations, trace);
                }
            }
            Err(Error::OrdinaryPair(_)) => {
                // coordinate-wise line search on the residual functional
                let base = residual_functional(&rep);
                let mut best: Option<(TuplePoint, f64)> = None;
                let mut h = 0.05 * surface.diameter();
                while best.is_none() && h > 1e-10 {
                    for i in 0..k {
                        for d in [Vector2::new(h, 0.0), Vector2::new(-h, 0.0), Vector2::new(0.0, h), Vector2::new(0.0, -h)] {
                            let Ok(pi) = retract(surface, x.point(i), &d) else { continue };
                            let mut pts = x.points().to_vec();
                            pts[i] = pi;
                            let cand = TuplePoint::new(surface, pts)?;
                            let Ok(r) = balance_test(surface, &cand, tol) else { continue };
                            let f = residual_functional(&r);
                            if f < best.as_ref().map_or(base, |b| b.1) {
                                best = Some((cand, f));
                            }
                        }
                    }
                    h *= 0.5;
                }
                match best {
                    Some((c, _)) => {
                        energy = uniform_energy(surface, &c)?;
                        x = c;
                    }
                    None => return finish(x, Outcome::Stalled, iterations, trace),
                }
            }
            Err(e) => return Err(e),
        }
        let rep = balance_test(surface, &x, tol)?;
        trace.push(TraceRow {
            iter: iterations,
            energy,
            spacing: rep.spacing_residual,
            antipodal: rep.antipodal_residual,
        });
    }
    finish(x, Outcome::Stalled, iterations, trace)
}

/// Upper bound on minimizer combinations considered by
/// [`associated_geodesics`].
pub const ENUMERATION_BOUND: usize = 4096;

/// Closed geodesics through the tuple whose velocity at each `x_i` is a
/// matched minimizing direction.
pub fn associated_geodesics(surface: &SurfaceModel, x: &TuplePoint, report: &BalanceReport) -> Result<Vec<ClosedGeodesic>> {
    if !report.balanced {
        return Err(Error::InvalidArgument("tuple is not balanced".into()));
    }
    let pairs = x.pairs(surface)?;
    let k = x.k();
    let combos: f64 = pairs.iter().map(|s| s.segments.len().max(1) as f64).product();
    if combos > ENUMERATION_BOUND as f64 {
        return Err(Error::EnumerationBound(combos as usize));
    }
    let ang_tol: f64 = 1e-4;
    let d = report.distances.iter().sum::<f64>() / k as f64;
    let total = report.distances.iter().sum::<f64>();
    let back0 = pairs[k - 1].at_p();
    let starts: Vec<Vector2<f64>> = pairs[0]
        .segments
        .iter()
        .map(|s| s.dir_q)
        .filter(|xi| back0.nearest(angle_of(&(-xi))).0 <= ang_tol.max(2.0 * report.antipodal_residual))
        .collect();
    let mut out: Vec<ClosedGeodesic> = Vec::new();
    for xi in starts {
        let Ok(arc) = shoot_frame(surface, x.point(0), &xi, total) else { continue };
        let mut ok = true;
        let mut s = 0.0;
        for i in 1..k {
            s += report.distances[i - 1];
            let (pt, vel) = arc.at(s);
            if surface.chord(&pt, x.point(i)) > 1e-6 * d.max(1.0) {
                ok = false;
                break;
            }
            let set: DirectionSet = pairs[i].at_q();
            if set.nearest(angle_of(&vel)).0 > ang_tol {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }
        let (end, vel) = arc.end();
        if surface.chord(&end, x.point(0)) > 1e-6 * d.max(1.0) || (vel - xi).norm() > ang_tol {
            continue;
        }
        let g = match ClosedGeodesic::new(arc.clone()) {
            Ok(g) => g,
            Err(_) => match close_up(surface, &arc) {
                Ok(g) => g,
                Err(_) => continue,
            },
        };
        // a reversed traversal is the same geodesic
        let same = |o: &ClosedGeodesic| {
            let (a, b) = (o.arc.start_dir, g.arc.start_dir);
            ((a - b).norm() < 1e-6 || (a + b).norm() < 1e-6) && surface.chord(&o.arc.start, &g.arc.start) < 1e-9
        };
        if !out.iter().any(same) {
            out.push(g);
        }
    }
    Ok(out)
}

fn angle_of(v: &Vector2<f64>) -> f64 {
    v.y.atan2(v.x)
}

#[derive(Debug, Clone)]
pub struct BalancedClass {
    pub geodesic: ClosedGeodesic,
    pub k: usize,
    /// Sampled rotations `(t, report)`.
    pub samples: Vec<(f64, BalanceReport)>,
    pub non_smooth: bool,
}

impl BalancedClass {
    pub fn smooth(&self) -> bool {
        !self.non_smooth && self.samples.iter().all(|(_, r)| r.smooth)
    }
}

#[derive(Debug, Clone)]
pub enum ClassOutcome {
    Class(BalancedClass),
    NotRotating {
        t0: f64,
        report: Option<BalanceReport>,
        cone: Option<ConeDegenerate>,
    },
}

impl ClassOutcome {
    pub fn class(&self) -> Option<&BalancedClass> {
        match self {
            ClassOutcome::Class(c) => Some(c),
            _ => None,
        }
    }
}

pub const CLASS_GRID: usize = 64;

/// Whether the rotated tuple at `t` is balanced with `γ` associated.
fn rotation_ok(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize, t: f64, tol: &BalanceTolerances) -> Result<std::result::Result<BalanceReport, (Option<BalanceReport>, Option<ConeDegenerate>)>> {
    let x = TuplePoint::on_geodesic(surface, g, k, t)?;
    let rep = match balance_test(surface, &x, tol) {
        Ok(r) => r,
        Err(Error::ConePointVertex(c)) => return Ok(Err((None, Some(c)))),
        Err(Error::ConePointQuery { .. }) => return Ok(Err((None, None))),
        Err(e) => return Err(e),
    };
    if !rep.balanced {
        return Ok(Err((Some(rep), None)));
    }
    let pairs = x.pairs(surface)?;
    for i in 0..k {
        let (_, vel) = g.evaluate(t + TAU * i as f64 / k as f64);
        if pairs[i].at_q().nearest(angle_of(&vel)).0 > 1e-4 {
            return Ok(Err((Some(rep), None)));
        }
    }
    Ok(Ok(rep))
}

/// Samples the rotations of `γ` and checks each is balanced with `γ`
/// associated.
pub fn build_class(surface: &SurfaceModel, g: &ClosedGeodesic, k: usize) -> Result<ClassOutcome> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    let tol = BalanceTolerances::for_surface(surface);
    // one period of rotations is 2π/k
    let ts: Vec<f64> = (0..CLASS_GRID).map(|j| TAU / k as f64 * j as f64 / CLASS_GRID as f64).collect();
    let results: Vec<_> = {
        use rayon::prelude::*;
        ts.par_iter().map(|&t| rotation_ok(surface, g, k, t, &tol)).collect()
    };
    let mut samples = Vec::with_capacity(ts.len());
    for (j, r) in results.into_iter().enumerate() {
        match r? {
            Ok(rep) => samples.push((ts[j], rep)),
            Err((rep, cone)) => {
                // bisect towards the previous good sample for the first failure
                let mut t0 = ts[j];
                if j > 0 {
                    let (mut lo, mut hi) = (ts[j - 1], ts[j]);
                    for _ in 0..20 {
                        let mid = 0.5 * (lo + hi);
                        if matches!(rotation_ok(surface, g, k, mid, &tol)?, Ok(_)) {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    t0 = hi;
                }
                return Ok(ClassOutcome::NotRotating { t0, report: rep, cone });
            }
        }
    }
    let non_smooth = samples.iter().any(|(_, r)| r.non_smooth());
    Ok(ClassOutcome::Class(BalancedClass {
        geodesic: g.clone(),
        k,
        samples,
        non_smooth,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn torus() -> SurfaceModel {
        SurfaceModel::torus(1.0, 1.0).unwrap()
    }

    #[test]
    fn antipodal_energy() {
        let s = SurfaceModel::unit_sphere();
        let x = TuplePoint::new(&s, vec![SurfacePoint::new(FRAC_PI_2, 0.0), SurfacePoint::new(FRAC_PI_2, PI)]).unwrap();
        assert!((uniform_energy(&s, &x).unwrap() - 4.0 * PI * PI).abs() < 1e-12);
        let r = balance_test(&s, &x, &BalanceTolerances::for_surface(&s)).unwrap();
        assert_eq!(r.class(), BalanceClass::NonSmoothBalanced);
    }

    #[test]
    fn ordinary_pair_blocks_gradient() {
        let t = torus();
        let x = TuplePoint::new(&t, vec![SurfacePoint::new(0.0, 0.0), SurfacePoint::new(0.5, 0.5)]).unwrap();
        assert!(matches!(energy_gradient(&t, &x), Err(Error::OrdinaryPair(_))));
    }

    #[test]
    fn torus_triple_is_smooth_balanced() {
        let t = torus();
        let x = TuplePoint::new(&t, (0..3).map(|i| SurfacePoint::new(i as f64 / 3.0, 0.2)).collect()).unwrap();
        let r = balance_test(&t, &x, &BalanceTolerances::for_surface(&t)).unwrap();
        assert!(r.balanced && r.smooth && r.uniquely);
        let g = energy_gradient_frame(&t, &x).unwrap();
        assert!(g.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn newton_finds_half_lattice_pairs() {
        let t = torus();
        let seed = TuplePoint::new(&t, vec![SurfacePoint::new(0.1, 0.2), SurfacePoint::new(0.45, 0.33)]).unwrap();
        let res = find_balanced(&t, 2, &seed, &FindOptions::default()).unwrap();
        assert_eq!(res.outcome, Outcome::Converged);
        let d = res.report.unwrap().distances[0];
        assert!((d - 0.5).abs() < 1e-9 || (d - 0.5f64.sqrt()).abs() < 1e-9, "{d}");
    }

    #[test]
    fn combos_ordered_by_rank() {
        let c = combos(&[2, 2], 10);
        assert_eq!(c[0], vec![0, 0]);
        assert_eq!(c.len(), 4);
        assert_eq!(c[3], vec![1, 1]);
    }
}
