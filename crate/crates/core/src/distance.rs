//! Minimizing geodesics, distance, cut classification and the one-sided
//! directional derivative of the distance function.

use std::f64::consts::{PI, TAU};
use std::ops::ControlFlow;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{self, chart_point, initial_state, rhs, v_of, x_of, State};
use crate::ode::{self, Tolerance};
use crate::polygon;
use crate::surfaces::{centered, Spheroid, SurfaceModel, SurfacePoint, TangentVector};

/// Cluster tolerance for minimizer directions (radians).
pub const CLUSTER_TOL: f64 = 1e-3;
/// Number of shooting directions in the spheroid boundary-value search.
pub const FAN_SIZE: usize = 256;
/// Directions needed to flag a continuum of minimizers.
pub const CONTINUUM_COUNT: usize = 32;
/// Default unfolding depth for doubled polygons.
pub const DEFAULT_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Branch {
    Sphere { long: bool },
    /// Flat displacement vector in the universal cover.
    Flat { w: Vector2<f64> },
    Unfold { edges: Vec<usize> },
    Shot { psi: f64 },
}

/// A geodesic segment from `q` to `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub length: f64,
    /// Unit initial velocity at `q` (frame components).
    pub dir_q: Vector2<f64>,
    /// Unit terminal velocity at `p` (frame components).
    pub end_dir: Vector2<f64>,
    pub(crate) branch: Branch,
}

/// Unit directions given by isolated vectors and angular arcs `(lo, width)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DirectionSet {
    pub dirs: Vec<Vector2<f64>>,
    pub arcs: Vec<(f64, f64)>,
}

fn angle_of(v: &Vector2<f64>) -> f64 {
    v.y.atan2(v.x)
}

fn unit_at(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

/// Unsigned angular distance between two angles.
fn ang_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn dist_to_arc(x: f64, lo: f64, w: f64) -> f64 {
    if w >= TAU || (x - lo).rem_euclid(TAU) <= w {
        0.0
    } else {
        ang_diff(x, lo).min(ang_diff(x, lo + w))
    }
}

fn closest_in_arc(x: f64, lo: f64, w: f64) -> f64 {
    if w >= TAU || (x - lo).rem_euclid(TAU) <= w {
        x
    } else if ang_diff(x, lo) <= ang_diff(x, lo + w) {
        lo
    } else {
        lo + w
    }
}

impl DirectionSet {
    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty() && self.arcs.is_empty()
    }

    pub fn is_full_circle(&self) -> bool {
        self.arcs.iter().any(|&(_, w)| w >= TAU)
    }

    /// Angular distance from direction angle `x` to the set, with the
    /// nearest member.
    pub fn nearest(&self, x: f64) -> (f64, Vector2<f64>) {
        let mut best = (f64::INFINITY, Vector2::zeros());
        for d in &self.dirs {
            let a = ang_diff(x, angle_of(d));
            if a < best.0 {
                best = (a, *d);
            }
        }
        for &(lo, w) in &self.arcs {
            let a = dist_to_arc(x, lo, w);
            if a < best.0 {
                best = (a, unit_at(closest_in_arc(x, lo, w)));
            }
        }
        best
    }

    /// `min { -⟨v, ξ⟩ : ξ in the set }`.
    pub fn min_neg_dot(&self, v: &Vector2<f64>) -> f64 {
        let n = v.norm();
        if n == 0.0 {
            return 0.0;
        }
        let (a, _) = self.nearest(angle_of(v));
        -n * a.cos()
    }

    pub fn negated(&self) -> DirectionSet {
        DirectionSet {
            dirs: self.dirs.iter().map(|d| -d).collect(),
            arcs: self.arcs.iter().map(|&(lo, w)| (lo + PI, w)).collect(),
        }
    }

    /// Smallest angle between a member of `self` and a member of `other`,
    /// with a realizing pair.
    pub fn distance_to(&self, other: &DirectionSet) -> (f64, Vector2<f64>, Vector2<f64>) {
        let mut best = (f64::INFINITY, Vector2::zeros(), Vector2::zeros());
        let mut consider = |a: f64, x: Vector2<f64>, y: Vector2<f64>| {
            if a < best.0 {
                best = (a, x, y);
            }
        };
        for d in &self.dirs {
            let (a, m) = other.nearest(angle_of(d));
            consider(a, *d, m);
        }
        for &(lo, w) in &self.arcs {
            for e in [lo, lo + w] {
                let (a, m) = other.nearest(e);
                consider(a, unit_at(e), m);
            }
        }
        for d in &other.dirs {
            let (a, m) = self.nearest(angle_of(d));
            consider(a, m, *d);
        }
        for &(lo, w) in &other.arcs {
            for e in [lo, lo + w] {
                let (a, m) = self.nearest(e);
                consider(a, m, unit_at(e));
            }
        }
        best
    }

    /// Largest angular gap between consecutive members (2π for a single
    /// direction, 0 when the arcs cover the circle).
    pub fn max_gap(&self) -> (f64, f64) {
        // intervals as (start, end) angles; returns (gap, bisector angle)
        let mut iv: Vec<(f64, f64)> = self
            .dirs
            .iter()
            .map(|d| {
                let a = angle_of(d).rem_euclid(TAU);
                (a, a)
            })
            .chain(self.arcs.iter().map(|&(lo, w)| {
                let a = lo.rem_euclid(TAU);
                (a, a + w.min(TAU))
            }))
            .collect();
        if iv.is_empty() {
            return (TAU, 0.0);
        }
        if iv.iter().any(|&(s, e)| e - s >= TAU) {
            return (0.0, 0.0);
        }
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = (0.0, 0.0);
        let n = iv.len();
        // sweep maintaining the furthest covered angle
        let mut reach = iv[0].1;
        let first = iv[0].0;
        for i in 1..n {
            let (s, e) = iv[i];
            if s > reach {
                let gap = s - reach;
                if gap > best.0 {
                    best = (gap, reach + gap / 2.0);
                }
            }
            reach = reach.max(e);
        }
        let wrap = first + TAU - reach;
        if wrap > best.0 {
            best = (wrap, reach + wrap / 2.0);
        }
        if best.0 <= 0.0 {
            return (0.0, 0.0);
        }
        (best.0, best.1.rem_euclid(TAU))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerSet {
    pub q: SurfacePoint,
    pub p: SurfacePoint,
    pub distance: f64,
    /// Minimizing segments, or representatives when `continuum` is set.
    pub segments: Vec<Segment>,
    pub continuum: bool,
    /// Directional arcs at `q` (continuum case).
    pub arcs_q: Vec<(f64, f64)>,
    /// Arcs of terminal velocities at `p` (continuum case).
    pub arcs_p: Vec<(f64, f64)>,
    /// Length of the shortest non-minimizing candidate minus `distance`.
    pub second_gap: f64,
}

impl MinimizerSet {
    fn base(q: SurfacePoint) -> Self {
        Self {
            q,
            p: q,
            distance: 0.0,
            segments: Vec::new(),
            continuum: false,
            arcs_q: Vec::new(),
            arcs_p: Vec::new(),
            second_gap: f64::INFINITY,
        }
    }

    pub fn is_base(&self) -> bool {
        self.distance == 0.0
    }

    pub fn multiplicity(&self) -> usize {
        self.segments.len()
    }

    pub fn directions(&self) -> Vec<Vector2<f64>> {
        self.segments.iter().map(|s| s.dir_q).collect()
    }

    /// Initial directions at `q` (the set q̂p).
    pub fn at_q(&self) -> DirectionSet {
        DirectionSet {
            dirs: if self.continuum { Vec::new() } else { self.directions() },
            arcs: self.arcs_q.clone(),
        }
    }

    /// Directions at `p` pointing back to `q` (the set p̂q).
    pub fn at_p(&self) -> DirectionSet {
        DirectionSet {
            dirs: if self.continuum {
                Vec::new()
            } else {
                self.segments.iter().map(|s| -s.end_dir).collect()
            },
            arcs: self.arcs_p.iter().map(|&(lo, w)| (lo + PI, w)).collect(),
        }
    }

    /// The same minimizers seen from `p`.
    pub fn reversed(&self) -> MinimizerSet {
        MinimizerSet {
            q: self.p,
            p: self.q,
            distance: self.distance,
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    length: s.length,
                    dir_q: -s.end_dir,
                    end_dir: -s.dir_q,
                    branch: s.branch.clone(),
                })
                .collect(),
            continuum: self.continuum,
            arcs_q: self.arcs_p.iter().map(|&(lo, w)| (lo + PI, w)).collect(),
            arcs_p: self.arcs_q.iter().map(|&(lo, w)| (lo + PI, w)).collect(),
            second_gap: self.second_gap,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "q": [self.q.u, self.q.v],
            "p": [self.p.u, self.p.v],
            "distance": self.distance,
            "multiplicity": self.multiplicity(),
            "continuum": self.continuum,
            "directions": self.segments.iter().map(|s| [s.dir_q.x, s.dir_q.y]).collect::<Vec<_>>(),
            "second_gap": if self.second_gap.is_finite() { Some(self.second_gap) } else { None },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointKind {
    Regular,
    OrdinaryCut,
    SingularCut,
    BasePoint,
    /// Conjugacy and the minimizing margin disagree within tolerance.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointClass {
    pub kind: PointKind,
    pub multiplicity: usize,
    pub continuum: bool,
    pub distance: f64,
    /// First conjugate distance along the unique minimizer, when found
    /// before `1.0002 × distance`.
    pub conjugate: Option<f64>,
    pub second_gap: f64,
}

impl PointClass {
    pub fn is_cut(&self) -> bool {
        matches!(self.kind, PointKind::OrdinaryCut | PointKind::SingularCut)
    }
}

fn sphere_minimizers(r: f64, sph: &Spheroid, q: &SurfacePoint, p: &SurfacePoint) -> MinimizerSet {
    let xq = sph.embed(q.u, q.v) / r;
    let xp = sph.embed(p.u, p.v) / r;
    let cr = xq.cross(&xp).norm();
    let alpha = cr.atan2(xq.dot(&xp));
    let d = r * alpha;
    if alpha == 0.0 {
        return MinimizerSet::base(*q);
    }
    // within the length tolerance of the antipode every great circle minimizes
    if r * (PI - alpha) < 1e-6 * PI * r {
        let reps = (0..CONTINUUM_COUNT)
            .map(|j| {
                let dir = unit_at(TAU * j as f64 / CONTINUUM_COUNT as f64);
                let t = geodesic::frame_to_ambient(sph, q, &dir);
                Segment {
                    length: d,
                    dir_q: dir,
                    end_dir: geodesic::ambient_to_frame(sph, p, &(-t)),
                    branch: Branch::Sphere { long: false },
                }
            })
            .collect();
        return MinimizerSet {
            q: *q,
            p: *p,
            distance: d,
            segments: reps,
            continuum: true,
            arcs_q: vec![(0.0, TAU)],
            arcs_p: vec![(0.0, TAU)],
            second_gap: f64::INFINITY,
        };
    }
    let seg = sphere_segment(r, sph, q, p, false).unwrap();
    MinimizerSet {
        q: *q,
        p: *p,
        distance: d,
        segments: vec![seg],
        continuum: false,
        arcs_q: Vec::new(),
        arcs_p: Vec::new(),
        second_gap: TAU * r - 2.0 * d,
    }
}

fn sphere_segment(r: f64, sph: &Spheroid, q: &SurfacePoint, p: &SurfacePoint, long: bool) -> Option<Segment> {
    let xq = sph.embed(q.u, q.v) / r;
    let xp = sph.embed(p.u, p.v) / r;
    let alpha = xq.cross(&xp).norm().atan2(xq.dot(&xp));
    let tdir = xp - xq * xq.dot(&xp);
    if tdir.norm() < 1e-300 {
        return None;
    }
    let t = tdir.normalize();
    let end = -xq * alpha.sin() + t * alpha.cos();
    let (t, end, len) = if long {
        (-t, -end, r * (TAU - alpha))
    } else {
        (t, end, r * alpha)
    };
    Some(Segment {
        length: len,
        dir_q: geodesic::ambient_to_frame(sph, q, &t),
        end_dir: geodesic::ambient_to_frame(sph, p, &end),
        branch: Branch::Sphere { long },
    })
}

fn torus_candidates(a: f64, b: f64, q: &SurfacePoint, p: &SurfacePoint, window: f64) -> Vec<Segment> {
    let base = Vector2::new(centered(p.u - q.u, a), centered(p.v - q.v, b));
    let dmin = base.norm();
    let bound = dmin + window;
    let rm = (bound / a).ceil() as i64 + 1;
    let rn = (bound / b).ceil() as i64 + 1;
    let mut out = Vec::new();
    for m in -rm..=rm {
        for n in -rn..=rn {
            let w = base + Vector2::new(m as f64 * a, n as f64 * b);
            let len = w.norm();
            if len > 0.0 && len <= bound * (1.0 + 1e-15) + 1e-300 {
                out.push(Segment {
                    length: len,
                    dir_q: w / len,
                    end_dir: w / len,
                    branch: Branch::Flat { w },
                });
            }
        }
    }
    out.sort_by(|x, y| x.length.total_cmp(&y.length).then(angle_of(&x.dir_q).total_cmp(&angle_of(&y.dir_q))));
    out
}

/// Generic candidate search: all geodesic segments from `q` to `p` with
/// length within `window` of the shortest (subject to search limits),
/// sorted by length.
pub(crate) fn candidates(surface: &SurfaceModel, q: &SurfacePoint, p: &SurfacePoint, window: f64) -> Result<Vec<Segment>> {
    match surface {
        SurfaceModel::RoundSphere { radius } => {
            let sph = surface.spheroid().unwrap();
            Ok([false, true]
                .iter()
                .filter_map(|&l| sphere_segment(*radius, &sph, q, p, l))
                .collect())
        }
        SurfaceModel::FlatTorus { a, b } => Ok(torus_candidates(*a, *b, q, p, window)),
        SurfaceModel::DoubledPolygon(poly) => Ok(polygon::segments(poly, q, p, window, f64::INFINITY, DEFAULT_DEPTH)?
            .into_iter()
            .map(|u| Segment {
                length: u.length,
                dir_q: u.dir,
                end_dir: u.end_dir,
                branch: Branch::Unfold { edges: u.edges },
            })
            .collect()),
        SurfaceModel::Ellipsoid { .. } => {
            let sph = surface.spheroid().unwrap();
            let mut c = spheroid_candidates(&sph, q, p, FAN_SIZE, window)?;
            if let Some(min) = c.first().map(|s| s.length) {
                c.retain(|s| s.length <= min + window);
            }
            Ok(c)
        }
    }
}

const FAN_TOL: f64 = 1e-9;
const REFINE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Seed {
    ray: usize,
    t: f64,
    dist: f64,
}

/// Meridian route length through the nearer pole: an upper bound on the
/// distance.
fn meridian_bound(sph: &Spheroid, q: &SurfacePoint, p: &SurfacePoint) -> f64 {
    let north = sph.meridian_arc(0.0, q.u) + sph.meridian_arc(0.0, p.u);
    let south = sph.meridian_arc(q.u, PI) + sph.meridian_arc(p.u, PI);
    north.min(south)
}

fn fan_seeds(sph: &Spheroid, q: &SurfacePoint, target: &Vector3<f64>, n: usize, l_max: f64) -> Vec<Seed> {
    let tol = Tolerance {
        rtol: FAN_TOL,
        atol: FAN_TOL,
        h_max: 0.1,
    };
    let f = rhs(sph);
    let proj = geodesic::project(sph);
    let mut seeds = Vec::new();
    for ray in 0..n {
        let psi = TAU * ray as f64 / n as f64;
        let y0 = initial_state(sph, q, &unit_at(psi));
        let g = |y: &State| (x_of(y) - target).dot(&v_of(y));
        let _ = ode::integrate(&f, y0, l_max, &tol, &proj, |t0, y0, t1, y1| {
            let (g0, g1) = (g(y0), g(y1));
            if g0 < 0.0 && g1 >= 0.0 {
                let t = t0 + (t1 - t0) * g0 / (g0 - g1);
                let w = (t - t0) / (t1 - t0);
                let x = x_of(y0) * (1.0 - w) + x_of(y1) * w;
                seeds.push(Seed {
                    ray,
                    t,
                    dist: (x - target).norm(),
                });
            }
            ControlFlow::Continue(())
        });
        // a target very close to q starts with g(0) > 0
        if g(&y0) >= 0.0 {
            seeds.push(Seed {
                ray,
                t: 0.0,
                dist: (x_of(&y0) - target).norm(),
            });
        }
    }
    let n_rays = n;
    let near = |ray: usize, t: f64| -> f64 {
        seeds
            .iter()
            .filter(|s| s.ray == ray && (s.t - t).abs() < 0.25)
            .map(|s| s.dist)
            .fold(f64::INFINITY, f64::min)
    };
    seeds
        .iter()
        .filter(|s| {
            let l = near((s.ray + n_rays - 1) % n_rays, s.t);
            let r = near((s.ray + 1) % n_rays, s.t);
            s.dist <= l && s.dist <= r
        })
        .copied()
        .collect()
}

/// Levenberg–Marquardt on (ψ, s) so that the geodesic from `q` with frame
/// direction angle ψ reaches `target` at arc length `s`.
pub(crate) fn refine_shot(
    sph: &Spheroid,
    q: &SurfacePoint,
    p: &SurfacePoint,
    psi0: f64,
    s0: f64,
) -> Option<Segment> {
    let tol = Tolerance {
        rtol: REFINE_TOL,
        atol: REFINE_TOL,
        h_max: 0.05,
    };
    let target = sph.embed(p.u, p.v);
    let [ep_t, ep_p, _] = sph.frame_at(p);
    let eval = |psi: f64, s: f64| -> Option<(State, Vector2<f64>)> {
        // no minimizer is longer than the equator
        if s <= 0.0 || s > TAU * sph.a {
            return None;
        }
        let y0 = initial_state(sph, q, &unit_at(psi));
        let y = geodesic::flow(sph, &y0, s, &tol).ok()?;
        let d = x_of(&y) - target;
        Some((y, Vector2::new(d.dot(&ep_t), d.dot(&ep_p))))
    };
    let (mut psi, mut s) = (psi0, s0.max(1e-9));
    let (mut y, mut r) = eval(psi, s)?;
    let mut lambda = 1e-6;
    // near conjugate configurations the Jacobian degenerates and LM crawls;
    // give up on seeds that stop making progress
    let mut evals = 0;
    let mut slow = 0;
    for _ in 0..40 {
        let chord = (x_of(&y) - target).norm();
        if chord < 1e-13 || evals > 80 || slow >= 6 {
            break;
        }
        let xv = x_of(&y);
        let n = sph.unit_normal(&xv);
        let v = v_of(&y);
        let dpsi = n.cross(&v) * y[6];
        let jac = Matrix2::new(dpsi.dot(&ep_t), v.dot(&ep_t), dpsi.dot(&ep_p), v.dot(&ep_p));
        let jtj = jac.transpose() * jac;
        let g = jac.transpose() * r;
        let mut improved = false;
        for _ in 0..12 {
            let m = jtj + Matrix2::identity() * (lambda * (1.0 + jtj.trace()));
            let Some(inv) = m.try_inverse() else {
                lambda *= 10.0;
                continue;
            };
            let step = -(inv * g);
            evals += 1;
            if let Some((yn, rn)) = eval(psi + step.x, s + step.y) {
                if rn.norm() < r.norm() {
                    slow = if rn.norm() > 0.5 * r.norm() { slow + 1 } else { 0 };
                    psi += step.x;
                    s += step.y;
                    y = yn;
                    r = rn;
                    lambda = (lambda * 0.1).max(1e-12);
                    improved = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let chord = (x_of(&y) - target).norm();
    if chord > 1e-9 {
        return None;
    }
    let v = v_of(&y);
    let end = chart_point(sph, &x_of(&y), Some(p));
    let _ = end;
    let psi = psi.rem_euclid(TAU);
    Some(Segment {
        length: s,
        dir_q: unit_at(psi),
        end_dir: geodesic::ambient_to_frame(sph, p, &v).normalize(),
        branch: Branch::Shot { psi },
    })
}

fn is_pole(p: &SurfacePoint) -> Option<bool> {
    if p.u.abs() < 1e-14 {
        Some(true)
    } else if (p.u - PI).abs() < 1e-14 {
        Some(false)
    } else {
        None
    }
}

/// All refined, deduplicated shooting solutions from `q` to `p`, sorted by
/// length. `n` is the fan size.
pub(crate) fn spheroid_candidates(
    sph: &Spheroid,
    q: &SurfacePoint,
    p: &SurfacePoint,
    n: usize,
    window: f64,
) -> Result<Vec<Segment>> {
    let target = sph.embed(p.u, p.v);
    let bound = meridian_bound(sph, q, p);
    let l_max = bound + window.min(bound) + 0.05;
    let seeds = fan_seeds(sph, q, &target, n, l_max);
    let mut found: Vec<Segment> = seeds
        .iter()
        .filter_map(|s| refine_shot(sph, q, p, TAU * s.ray as f64 / n as f64, s.t))
        .filter(|s| s.length <= l_max + 1e-6)
        .collect();
    found.sort_by(|a, b| angle_of(&a.dir_q).rem_euclid(TAU).total_cmp(&angle_of(&b.dir_q).rem_euclid(TAU)));
    let mut out: Vec<Segment> = Vec::new();
    for s in found {
        if let Some(o) = out.iter_mut().find(|o| {
            ang_diff(angle_of(&o.dir_q), angle_of(&s.dir_q)) < CLUSTER_TOL && (o.length - s.length).abs() < 1e-6
        }) {
            if s.length < o.length {
                *o = s;
            }
        } else {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.length.total_cmp(&b.length));
    if out.is_empty() {
        return Err(Error::BvpFailure("no shooting start converged".into()));
    }
    Ok(out)
}

fn spheroid_minimizers(surface: &SurfaceModel, sph: &Spheroid, q: &SurfacePoint, p: &SurfacePoint, n: usize) -> Result<MinimizerSet> {
    if let (Some(a), Some(b)) = (is_pole(q), is_pole(p)) {
        if a != b {
            // every meridian joins opposite poles
            let d = sph.half_meridian();
            let reps = (0..CONTINUUM_COUNT)
                .map(|j| {
                    let dir = unit_at(TAU * j as f64 / CONTINUUM_COUNT as f64);
                    let t = geodesic::frame_to_ambient(sph, q, &dir);
                    let end = Vector3::new(-t.x, -t.y, 0.0);
                    Segment {
                        length: d,
                        dir_q: dir,
                        end_dir: geodesic::ambient_to_frame(sph, p, &end),
                        branch: Branch::Shot { psi: TAU * j as f64 / CONTINUUM_COUNT as f64 },
                    }
                })
                .collect();
            return Ok(MinimizerSet {
                q: *q,
                p: *p,
                distance: d,
                segments: reps,
                continuum: true,
                arcs_q: vec![(0.0, TAU)],
                arcs_p: vec![(0.0, TAU)],
                second_gap: f64::INFINITY,
            });
        }
    }
    let cands = spheroid_candidates(sph, q, p, n, 0.1 * surface.diameter())?;
    let tol_len = surface.tol_len();
    let d = cands[0].length;
    let (mins, rest): (Vec<Segment>, Vec<Segment>) = cands.into_iter().partition(|s| s.length <= d + tol_len);
    let second_gap = rest.first().map_or(f64::INFINITY, |s| s.length - d);
    let continuum = mins.len() >= CONTINUUM_COUNT;
    let (arcs_q, arcs_p) = if continuum {
        (arcs_from(&mins.iter().map(|s| s.dir_q).collect::<Vec<_>>(), n), arcs_from(&mins.iter().map(|s| s.end_dir).collect::<Vec<_>>(), n))
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(MinimizerSet {
        q: *q,
        p: *p,
        distance: d,
        segments: mins,
        continuum,
        arcs_q,
        arcs_p,
        second_gap,
    })
}

/// Groups directions into arcs, joining neighbours closer than two fan
/// spacings.
fn arcs_from(dirs: &[Vector2<f64>], n: usize) -> Vec<(f64, f64)> {
    let join = 2.0 * TAU / n as f64;
    let mut angles: Vec<f64> = dirs.iter().map(|d| angle_of(d).rem_euclid(TAU)).collect();
    angles.sort_by(f64::total_cmp);
    if angles.is_empty() {
        return Vec::new();
    }
    let mut arcs: Vec<(f64, f64)> = Vec::new();
    let mut start = angles[0];
    let mut last = angles[0];
    for &a in &angles[1..] {
        if a - last > join {
            arcs.push((start, last - start));
            start = a;
        }
        last = a;
    }
    arcs.push((start, last - start));
    if arcs.len() > 1 && angles[0] + TAU - last <= join {
        let (s0, w0) = arcs.remove(0);
        let l = arcs.len() - 1;
        let (s1, _) = arcs[l];
        arcs[l] = (s1, s0 + TAU + w0 - s1);
    }
    if arcs.iter().any(|&(_, w)| w >= TAU - join) {
        return vec![(0.0, TAU)];
    }
    arcs
}

/// Enumerates the minimizing geodesics from `q` to `p`.
pub fn minimizers(surface: &SurfaceModel, q: &SurfacePoint, p: &SurfacePoint) -> Result<MinimizerSet> {
    minimizers_with(surface, q, p, FAN_SIZE)
}

/// As [`minimizers`] with an explicit spheroid fan size.
pub fn minimizers_with(surface: &SurfaceModel, q: &SurfacePoint, p: &SurfacePoint, fan: usize) -> Result<MinimizerSet> {
    let q = surface.canonicalize(q);
    let p = surface.canonicalize(p);
    for x in [&q, &p] {
        if surface.is_cone_point(x) {
            return Err(Error::ConePointQuery { u: x.u, v: x.v });
        }
    }
    if q == p || (surface.chord(&q, &p) == 0.0 && q.sheet == p.sheet) {
        return Ok(MinimizerSet::base(q));
    }
    let tol_len = surface.tol_len();
    match surface {
        SurfaceModel::RoundSphere { radius } => Ok(sphere_minimizers(*radius, &surface.spheroid().unwrap(), &q, &p)),
        SurfaceModel::Ellipsoid { .. } => spheroid_minimizers(surface, &surface.spheroid().unwrap(), &q, &p, fan),
        _ => {
            let window = 0.25 * surface.diameter();
            let cands = candidates(surface, &q, &p, window)?;
            let Some(d) = cands.first().map(|s| s.length) else {
                return Err(Error::BvpFailure("no segment found".into()));
            };
            let (mins, rest): (Vec<Segment>, Vec<Segment>) = cands.into_iter().partition(|s| s.length <= d + tol_len);
            let mut mins_dedup: Vec<Segment> = Vec::new();
            for s in mins {
                if !mins_dedup.iter().any(|o| ang_diff(angle_of(&o.dir_q), angle_of(&s.dir_q)) < 1e-9) {
                    mins_dedup.push(s);
                }
            }
            Ok(MinimizerSet {
                q,
                p,
                distance: d,
                segments: mins_dedup,
                continuum: false,
                arcs_q: Vec::new(),
                arcs_p: Vec::new(),
                second_gap: rest.first().map_or(f64::INFINITY, |s| s.length - d),
            })
        }
    }
}

pub fn distance(surface: &SurfaceModel, q: &SurfacePoint, p: &SurfacePoint) -> Result<f64> {
    Ok(minimizers(surface, q, p)?.distance)
}

/// Relative band around the distance within which a conjugate point counts
/// as coincident with the endpoint.
pub const CONJUGATE_BAND: f64 = 1e-4;

/// Classifies `q` relative to the distance function from `p`.
pub fn classify_point(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint) -> Result<PointClass> {
    let set = minimizers(surface, p, q)?;
    Ok(classify_set(surface, &set))
}

/// Classification of the endpoint of a computed minimizer set (`set.q` is
/// the base of the distance function).
pub fn classify_set(surface: &SurfaceModel, set: &MinimizerSet) -> PointClass {
    let mut pc = PointClass {
        kind: PointKind::Inconclusive,
        multiplicity: set.multiplicity(),
        continuum: set.continuum,
        distance: set.distance,
        conjugate: None,
        second_gap: set.second_gap,
    };
    if set.is_base() {
        pc.kind = PointKind::BasePoint;
        return pc;
    }
    if set.continuum || set.multiplicity() >= 2 {
        pc.kind = PointKind::OrdinaryCut;
        return pc;
    }
    let l = set.distance;
    let seg = &set.segments[0];
    let conj = match surface {
        SurfaceModel::RoundSphere { radius } => Some(PI * radius).filter(|&t| t <= l * (1.0 + 2.0 * CONJUGATE_BAND)),
        SurfaceModel::Ellipsoid { .. } => {
            geodesic::first_conjugate(surface, &set.q, &seg.dir_q, l * (1.0 + 2.0 * CONJUGATE_BAND)).unwrap_or(None)
        }
        _ => None,
    };
    pc.conjugate = conj;
    let margin = set.second_gap > 10.0 * surface.tol_len();
    pc.kind = match conj {
        Some(t) if (t - l).abs() <= CONJUGATE_BAND * l => {
            if margin {
                PointKind::SingularCut
            } else {
                PointKind::Inconclusive
            }
        }
        Some(_) => PointKind::Inconclusive,
        None if margin => PointKind::Regular,
        None => PointKind::Inconclusive,
    };
    pc
}

/// `D⁺_v d_p(q)` for a frame vector `v` at `q`.
pub fn directional_derivative_frame(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint, v: &Vector2<f64>) -> Result<f64> {
    if v.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let set = minimizers(surface, q, p)?;
    if set.is_base() {
        return Ok(v.norm());
    }
    Ok(set.at_q().min_neg_dot(v))
}

/// One-sided directional derivative of `d_p` at `q` in direction `v`.
pub fn directional_derivative(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint, v: &TangentVector) -> Result<f64> {
    let w = surface.to_frame(q, v)?;
    directional_derivative_frame(surface, p, q, &w)
}

/// Gradient of `d_p` at `q` in frame components.
pub fn gradient_dp_frame(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint) -> Result<Vector2<f64>> {
    let set = minimizers(surface, p, q)?;
    let class = classify_set(surface, &set);
    match class.kind {
        PointKind::BasePoint => Err(Error::Undefined),
        PointKind::OrdinaryCut => Err(Error::NotDifferentiable),
        PointKind::Inconclusive => Err(Error::Inconclusive),
        PointKind::Regular | PointKind::SingularCut => Ok(set.segments[0].end_dir),
    }
}

pub fn gradient_dp(surface: &SurfaceModel, p: &SurfacePoint, q: &SurfacePoint) -> Result<TangentVector> {
    let w = gradient_dp_frame(surface, p, q)?;
    surface.from_frame(&surface.canonicalize(q), &w)
}

/// Re-evaluates a segment branch at moved endpoints.
pub(crate) fn continue_segment(surface: &SurfaceModel, q: &SurfacePoint, p: &SurfacePoint, seg: &Segment) -> Result<Segment> {
    match (&seg.branch, surface) {
        (Branch::Sphere { long }, SurfaceModel::RoundSphere { radius }) => {
            sphere_segment(*radius, &surface.spheroid().unwrap(), q, p, *long).ok_or(Error::Undefined)
        }
        (Branch::Flat { w }, SurfaceModel::FlatTorus { a, b }) => {
            let base = Vector2::new(p.u - q.u, p.v - q.v);
            let k = w - base;
            let m = (k.x / a).round();
            let n = (k.y / b).round();
            let w = base + Vector2::new(m * a, n * b);
            let len = w.norm();
            if len == 0.0 {
                return Err(Error::Undefined);
            }
            Ok(Segment {
                length: len,
                dir_q: w / len,
                end_dir: w / len,
                branch: Branch::Flat { w },
            })
        }
        (Branch::Shot { psi }, SurfaceModel::Ellipsoid { .. } | SurfaceModel::RoundSphere { .. }) => {
            refine_shot(&surface.spheroid().unwrap(), q, p, *psi, seg.length)
                .ok_or_else(|| Error::BvpFailure("branch continuation failed".into()))
        }
        (Branch::Unfold { .. }, SurfaceModel::DoubledPolygon(_)) => {
            let cands = candidates(surface, q, p, seg.length + 0.25 * surface.diameter())?;
            cands
                .into_iter()
                .min_by(|x, y| {
                    let sx = (x.dir_q - seg.dir_q).norm() + (x.length - seg.length).abs();
                    let sy = (y.dir_q - seg.dir_q).norm() + (y.length - seg.length).abs();
                    sx.total_cmp(&sy)
                })
                .ok_or(Error::Undefined)
        }
        _ => Err(Error::InvalidArgument("segment branch does not match surface".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn torus_four_diagonals() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let m = minimizers(&t, &SurfacePoint::new(0.0, 0.0), &SurfacePoint::new(0.5, 0.5)).unwrap();
        assert_eq!(m.multiplicity(), 4);
        assert!((m.distance - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn torus_wraparound() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let d = distance(&t, &SurfacePoint::new(0.0, 0.0), &SurfacePoint::new(0.75, 0.0)).unwrap();
        assert!((d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sphere_cases() {
        let s = SurfaceModel::unit_sphere();
        let q = SurfacePoint::new(FRAC_PI_2, 0.0);
        let m = minimizers(&s, &q, &SurfacePoint::new(FRAC_PI_2, 0.3)).unwrap();
        assert_eq!(m.multiplicity(), 1);
        assert!((m.distance - 0.3).abs() < 1e-14);
        let a = minimizers(&s, &q, &SurfacePoint::new(FRAC_PI_2, PI)).unwrap();
        assert!(a.continuum);
        assert!((a.distance - PI).abs() < 1e-14);
    }

    #[test]
    fn classification_examples() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let c = classify_point(&t, &SurfacePoint::new(0.0, 0.0), &SurfacePoint::new(0.5, 0.5)).unwrap();
        assert_eq!(c.kind, PointKind::OrdinaryCut);
        let s = SurfaceModel::unit_sphere();
        let q = SurfacePoint::new(FRAC_PI_2, 0.0);
        let c = classify_point(&s, &q, &SurfacePoint::new(FRAC_PI_2, 0.3)).unwrap();
        assert_eq!(c.kind, PointKind::Regular);
        let c = classify_point(&s, &q, &SurfacePoint::new(FRAC_PI_2, PI)).unwrap();
        assert_eq!(c.kind, PointKind::OrdinaryCut);
    }

    #[test]
    fn torus_derivative_and_gradient() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let p = SurfacePoint::new(0.0, 0.0);
        let d = directional_derivative(&t, &p, &SurfacePoint::new(0.5, 0.5), &TangentVector::new(1.0, 0.0)).unwrap();
        assert!((d + 0.5f64.sqrt()).abs() < 1e-15);
        let g = gradient_dp(&t, &p, &SurfacePoint::new(0.3, 0.0)).unwrap();
        assert!((g.a - 1.0).abs() < 1e-15 && g.b.abs() < 1e-15);
        assert!(matches!(gradient_dp(&t, &p, &SurfacePoint::new(0.5, 0.5)), Err(Error::NotDifferentiable)));
        assert!(matches!(gradient_dp(&t, &p, &p), Err(Error::Undefined)));
    }

    #[test]
    fn ellipsoid_short_pair_matches_equator_arc() {
        let e = SurfaceModel::ellipsoid(0.5).unwrap();
        let q = SurfacePoint::new(FRAC_PI_2, 0.0);
        let p = SurfacePoint::new(FRAC_PI_2, 0.4);
        let m = minimizers(&e, &q, &p).unwrap();
        assert_eq!(m.multiplicity(), 1);
        assert!((m.distance - 0.4).abs() < 1e-9, "{}", m.distance);
    }

    #[test]
    fn ellipsoid_poles_continuum() {
        let e = SurfaceModel::ellipsoid(0.5).unwrap();
        let m = minimizers(&e, &SurfacePoint::new(0.0, 0.0), &SurfacePoint::new(PI, 0.0)).unwrap();
        assert!(m.continuum);
    }

    #[test]
    fn gap_bisector() {
        let set = DirectionSet {
            dirs: vec![Vector2::new(1.0, 0.0)],
            arcs: vec![],
        };
        let (g, b) = set.max_gap();
        assert!((g - TAU).abs() < 1e-15);
        assert!(ang_diff(b, PI) < 1e-12);
        let two = DirectionSet {
            dirs: vec![Vector2::new(1.0, 0.0), Vector2::new(-1.0, 0.0)],
            arcs: vec![],
        };
        assert!((two.max_gap().0 - PI).abs() < 1e-12);
    }
}
