//! Geodesic shooting, closing near-periodic orbits, and Jacobi fields.
//!
//! Spheroid geodesics are integrated in the ambient embedding as the
//! constrained motion `V' = -(VᵀHV/|∇F|²)∇F`, carried together with the
//! scalar normal Jacobi field `J'' = -K J`. Flat surfaces use exact lines.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::ode::{self, Tolerance};
use crate::polygon::{self, Trace};
use crate::surfaces::{centered, cross2, rot90, Spheroid, SurfaceModel, SurfacePoint, TangentVector};

pub(crate) type State = [f64; 8];

#[derive(Debug, Clone, Copy)]
pub struct ShootOptions {
    /// Relative and absolute local error tolerance of the integrator.
    pub tol: f64,
    pub max_step: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_step: 0.05,
        }
    }
}

impl ShootOptions {
    pub(crate) fn tolerance(&self) -> Tolerance {
        Tolerance {
            rtol: self.tol,
            atol: self.tol,
            h_max: self.max_step,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSample {
    pub t: f64,
    pub point: SurfacePoint,
    /// Unit velocity in the orthonormal frame at `point`.
    pub velocity: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Knot {
    pub t: f64,
    pub y: State,
}

#[derive(Debug, Clone, PartialEq)]
enum Path {
    Ambient {
        spheroid: Spheroid,
        knots: Vec<Knot>,
        tol: Tolerance,
    },
    Line {
        origin: Vector2<f64>,
        dir: Vector2<f64>,
    },
    Billiard(Trace),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicArc {
    pub start: SurfacePoint,
    pub start_dir: Vector2<f64>,
    pub length: f64,
    pub samples: Vec<ArcSample>,
    /// Largest accepted step (zero for exact flat arcs).
    pub max_step: f64,
    surface: SurfaceModel,
    path: Path,
}

pub(crate) fn rhs(s: &Spheroid) -> impl Fn(&State) -> State + '_ {
    move |y: &State| {
        let x = Vector3::new(y[0], y[1], y[2]);
        let v = Vector3::new(y[3], y[4], y[5]);
        let a = s.accel(&x, &v);
        let k = s.curvature(&x);
        [v.x, v.y, v.z, a.x, a.y, a.z, y[7], -k * y[6]]
    }
}

pub(crate) fn project(s: &Spheroid) -> impl Fn(&mut State) + '_ {
    move |y: &mut State| {
        let x = s.project(&Vector3::new(y[0], y[1], y[2]));
        let n = s.unit_normal(&x);
        let mut v = Vector3::new(y[3], y[4], y[5]);
        v -= n * v.dot(&n);
        let v = v.normalize();
        y[..3].copy_from_slice(x.as_slice());
        y[3..6].copy_from_slice(v.as_slice());
    }
}

pub(crate) fn x_of(y: &State) -> Vector3<f64> {
    Vector3::new(y[0], y[1], y[2])
}

pub(crate) fn v_of(y: &State) -> Vector3<f64> {
    Vector3::new(y[3], y[4], y[5])
}

/// Frame components of an ambient tangent vector at the chart point of `x`.
pub(crate) fn ambient_to_frame(s: &Spheroid, p: &SurfacePoint, v: &Vector3<f64>) -> Vector2<f64> {
    let [et, ep, _] = s.frame_at(p);
    Vector2::new(v.dot(&et), v.dot(&ep))
}

pub(crate) fn frame_to_ambient(s: &Spheroid, p: &SurfacePoint, w: &Vector2<f64>) -> Vector3<f64> {
    let [et, ep, _] = s.frame_at(p);
    et * w.x + ep * w.y
}

pub(crate) fn initial_state(s: &Spheroid, p: &SurfacePoint, w: &Vector2<f64>) -> State {
    let x = s.embed(p.u, p.v);
    let v = frame_to_ambient(s, p, w);
    [x.x, x.y, x.z, v.x, v.y, v.z, 0.0, 1.0]
}

/// Point of the chart for `x`, keeping the longitude of `hint` at a pole.
pub(crate) fn chart_point(s: &Spheroid, x: &Vector3<f64>, hint: Option<&SurfacePoint>) -> SurfacePoint {
    let mut p = s.point(x);
    if x.x.hypot(x.y) < 1e-300 {
        if let Some(h) = hint {
            p.v = h.v;
        }
    }
    p
}

/// Integrates from `y0` for arc length `s`, returning the end state only.
pub(crate) fn flow(sph: &Spheroid, y0: &State, s: f64, tol: &Tolerance) -> Result<State> {
    ode::advance(&rhs(sph), y0, s, tol, &project(sph))
}

fn unit(w: &Vector2<f64>) -> Result<Vector2<f64>> {
    let n = w.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(w / n)
}

/// Shoots the geodesic from `p` with chart-basis initial velocity `v`.
pub fn shoot(surface: &SurfaceModel, p: &SurfacePoint, v: &TangentVector, length: f64) -> Result<GeodesicArc> {
    let w = surface.to_frame(p, v)?;
    shoot_frame(surface, p, &w, length)
}

pub fn shoot_frame(surface: &SurfaceModel, p: &SurfacePoint, w: &Vector2<f64>, length: f64) -> Result<GeodesicArc> {
    shoot_with(surface, p, w, length, &ShootOptions::default())
}

pub fn shoot_with(
    surface: &SurfaceModel,
    p: &SurfacePoint,
    w: &Vector2<f64>,
    length: f64,
    opts: &ShootOptions,
) -> Result<GeodesicArc> {
    if !(length >= 0.0 && length.is_finite()) {
        return Err(Error::InvalidArgument(format!("arc length {length}")));
    }
    let w = unit(w)?;
    let p = surface.canonicalize(p);
    if surface.is_cone_point(&p) {
        return Err(Error::ConePointQuery { u: p.u, v: p.v });
    }
    let mut arc = GeodesicArc {
        start: p,
        start_dir: w,
        length,
        samples: Vec::new(),
        max_step: 0.0,
        surface: surface.clone(),
        path: Path::Line {
            origin: p.uv(),
            dir: w,
        },
    };
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => {
            let sph = surface.spheroid().unwrap();
            let tol = opts.tolerance();
            let y0 = initial_state(&sph, &p, &w);
            let mut knots = vec![Knot { t: 0.0, y: y0 }];
            let mut max_step: f64 = 0.0;
            ode::integrate(rhs(&sph), y0, length, &tol, project(&sph), |t0, _, t1, y1| {
                max_step = max_step.max(t1 - t0);
                knots.push(Knot { t: t1, y: *y1 });
                std::ops::ControlFlow::Continue(())
            })?;
            arc.max_step = max_step;
            arc.samples = knots
                .iter()
                .map(|k| {
                    let pt = chart_point(&sph, &x_of(&k.y), Some(&p));
                    ArcSample {
                        t: k.t,
                        point: pt,
                        velocity: ambient_to_frame(&sph, &pt, &v_of(&k.y)),
                    }
                })
                .collect();
            arc.samples[0].point = p;
            arc.samples[0].velocity = w;
            arc.path = Path::Ambient {
                spheroid: sph,
                knots,
                tol,
            };
        }
        SurfaceModel::FlatTorus { .. } => {
            let n = 64;
            arc.samples = (0..=n)
                .map(|i| {
                    let t = length * i as f64 / n as f64;
                    let q = p.uv() + w * t;
                    ArcSample {
                        t,
                        point: surface.canonicalize(&SurfacePoint::new(q.x, q.y)),
                        velocity: w,
                    }
                })
                .collect();
        }
        SurfaceModel::DoubledPolygon(poly) => {
            let tr = polygon::trace(poly, &p, &w, length)?;
            let mut samples: Vec<ArcSample> = tr
                .pieces
                .iter()
                .map(|pc| {
                    let (pt, vel) = tr.at(poly, pc.t0);
                    ArcSample {
                        t: pc.t0,
                        point: pt,
                        velocity: vel,
                    }
                })
                .collect();
            samples.push(ArcSample {
                t: length,
                point: tr.end,
                velocity: tr.end_dir,
            });
            arc.samples = samples;
            arc.path = Path::Billiard(tr);
        }
    }
    Ok(arc)
}

impl GeodesicArc {
    pub fn surface(&self) -> &SurfaceModel {
        &self.surface
    }

    /// Point and frame velocity at arc length `s ∈ [0, L]`.
    pub fn at(&self, s: f64) -> (SurfacePoint, Vector2<f64>) {
        let s = s.clamp(0.0, self.length);
        match &self.path {
            Path::Ambient {
                spheroid,
                knots,
                tol,
            } => {
                if s == 0.0 {
                    return (self.start, self.start_dir);
                }
                let y = self.ambient_state(spheroid, knots, tol, s);
                let pt = chart_point(spheroid, &x_of(&y), Some(&self.start));
                (pt, ambient_to_frame(spheroid, &pt, &v_of(&y)))
            }
            Path::Line { origin, dir } => {
                let q = origin + dir * s;
                (self.surface.canonicalize(&SurfacePoint::new(q.x, q.y)), *dir)
            }
            Path::Billiard(tr) => tr.at(self.surface.polygon().unwrap(), s),
        }
    }

    fn ambient_state(&self, sph: &Spheroid, knots: &[Knot], tol: &Tolerance, s: f64) -> State {
        let idx = knots.partition_point(|k| k.t <= s).saturating_sub(1);
        let k = &knots[idx];
        if k.t == s {
            return k.y;
        }
        flow(sph, &k.y, s - k.t, tol).unwrap_or(k.y)
    }

    pub(crate) fn ambient_at(&self, s: f64) -> Option<State> {
        match &self.path {
            Path::Ambient {
                spheroid,
                knots,
                tol,
            } => Some(self.ambient_state(spheroid, knots, tol, s.clamp(0.0, self.length))),
            _ => None,
        }
    }

    pub fn end(&self) -> (SurfacePoint, Vector2<f64>) {
        match &self.path {
            Path::Billiard(tr) => (tr.end, tr.end_dir),
            Path::Ambient { spheroid, knots, .. } => {
                let y = knots.last().unwrap().y;
                let pt = chart_point(spheroid, &x_of(&y), Some(&self.start));
                (pt, ambient_to_frame(spheroid, &pt, &v_of(&y)))
            }
            _ => self.at(self.length),
        }
    }

    /// Unwrapped chart position for flat arcs (lattice lift on the torus).
    pub(crate) fn unwrapped_end(&self) -> Option<Vector2<f64>> {
        match &self.path {
            Path::Line { origin, dir } => Some(origin + dir * self.length),
            _ => None,
        }
    }

    pub fn polyline(&self, n: usize) -> Vec<SurfacePoint> {
        (0..=n)
            .map(|i| self.at(self.length * i as f64 / n as f64).0)
            .collect()
    }

    /// CSV rows `t,u,v,du,dv` with chart-basis velocity components (NaN at
    /// chart-singular points).
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("t,u,v,du,dv\n");
        for s in &self.samples {
            let tv = self
                .surface
                .from_frame(&s.point, &s.velocity)
                .unwrap_or(TangentVector::new(f64::NAN, f64::NAN));
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::export::num(s.t),
                crate::export::num(s.point.u),
                crate::export::num(s.point.v),
                crate::export::num(tv.a),
                crate::export::num(tv.b)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedGeodesic {
    pub arc: GeodesicArc,
}

impl ClosedGeodesic {
    /// Wraps an arc that already closes up within the closure tolerances.
    pub fn new(arc: GeodesicArc) -> Result<Self> {
        let (gap, angle) = closure_defect(&arc)?;
        if gap >= 1e-7 * arc.length || angle >= 1e-6 {
            return Err(Error::SeedNotClosed { gap, angle });
        }
        Ok(Self { arc })
    }

    pub fn length(&self) -> f64 {
        self.arc.length
    }

    pub fn surface(&self) -> &SurfaceModel {
        self.arc.surface()
    }

    /// Point and frame velocity at `t ∈ S¹` (period 2π, proportional to arc length).
    pub fn evaluate(&self, t: f64) -> (SurfacePoint, Vector2<f64>) {
        let frac = (t / TAU).rem_euclid(1.0);
        let s = if frac >= 1.0 { 0.0 } else { frac * self.arc.length };
        self.arc.at(s)
    }

    /// Equator of a sphere or ellipsoid.
    pub fn equator(surface: &SurfaceModel) -> Result<Self> {
        let sph = surface
            .spheroid()
            .ok_or_else(|| Error::InvalidArgument("equator needs a sphere or ellipsoid".into()))?;
        let p = SurfacePoint::new(std::f64::consts::FRAC_PI_2, 0.0);
        let arc = shoot_frame(surface, &p, &Vector2::new(0.0, 1.0), TAU * sph.a)?;
        Self::new(arc)
    }

    /// Meridian through longitude `phi`, starting at the north pole.
    pub fn meridian(surface: &SurfaceModel, phi: f64) -> Result<Self> {
        let sph = surface
            .spheroid()
            .ok_or_else(|| Error::InvalidArgument("meridian needs a sphere or ellipsoid".into()))?;
        let p = SurfacePoint::new(0.0, phi);
        let arc = shoot_frame(surface, &p, &Vector2::new(1.0, 0.0), 2.0 * sph.half_meridian())?;
        Self::new(arc)
    }

    /// Great circle of a round sphere through `p` with frame direction `w`.
    pub fn great_circle(surface: &SurfaceModel, p: &SurfacePoint, w: &Vector2<f64>) -> Result<Self> {
        match surface {
            SurfaceModel::RoundSphere { radius } => Self::new(shoot_frame(surface, p, w, TAU * radius)?),
            _ => Err(Error::InvalidArgument("great circles need a round sphere".into())),
        }
    }

    /// Closed line on a flat torus in lattice direction `(m, n)`.
    pub fn torus_line(surface: &SurfaceModel, p: &SurfacePoint, m: i64, n: i64) -> Result<Self> {
        match *surface {
            SurfaceModel::FlatTorus { a, b } => {
                let w = Vector2::new(m as f64 * a, n as f64 * b);
                let len = w.norm();
                if len == 0.0 {
                    return Err(Error::ZeroVector);
                }
                Self::new(shoot_frame(surface, p, &(w / len), len)?)
            }
            _ => Err(Error::InvalidArgument("torus lines need a flat torus".into())),
        }
    }

    /// Over-under geodesic of a doubled square through the edge midpoints.
    /// `front_first` selects which of the two starts on the front sheet.
    pub fn over_under(surface: &SurfaceModel, front_first: bool) -> Result<Self> {
        let poly = surface
            .polygon()
            .filter(|p| p.len() == 4)
            .ok_or_else(|| Error::InvalidArgument("over-under needs a doubled quadrilateral".into()))?;
        let m0 = poly.edge_midpoint(0);
        let m1 = poly.edge_midpoint(1);
        let m3 = poly.edge_midpoint(3);
        let p = SurfacePoint::new(m0.x, m0.y);
        let mut w = (m1 - m0).normalize();
        if !front_first {
            w = poly.reflect_dir(0, &w);
        }
        let len = 2.0 * ((m1 - m0).norm() + (m0 - m3).norm());
        Self::new(shoot_frame(surface, &p, &w, len)?)
    }

    pub fn to_csv(&self, header: &str) -> String {
        self.arc.to_csv(header)
    }
}

fn signed_angle(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    cross2(a, b).atan2(a.dot(b))
}

/// Start-to-end displacement (2-D, in the start frame) and turning angle.
fn closure_residual(arc: &GeodesicArc) -> Result<[f64; 3]> {
    let surface = arc.surface();
    let (end, end_dir) = arc.end();
    Ok(match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => {
            let sph = surface.spheroid().unwrap();
            let y = arc.ambient_at(arc.length).unwrap();
            let d = x_of(&y) - sph.embed(arc.start.u, arc.start.v);
            let [et, ep, _] = sph.frame_at(&arc.start);
            let v = Vector2::new(v_of(&y).dot(&et), v_of(&y).dot(&ep));
            [d.dot(&et), d.dot(&ep), signed_angle(&arc.start_dir, &v)]
        }
        SurfaceModel::FlatTorus { a, b } => {
            let e = arc.unwrapped_end().unwrap();
            [
                centered(e.x - arc.start.u, *a),
                centered(e.y - arc.start.v, *b),
                signed_angle(&arc.start_dir, &end_dir),
            ]
        }
        SurfaceModel::DoubledPolygon(poly) => {
            let seam = poly.on_edge(&end.uv()).is_some() || poly.on_edge(&arc.start.uv()).is_some();
            if seam || end.sheet == arc.start.sheet {
                let d = end.uv() - arc.start.uv();
                [d.x, d.y, signed_angle(&arc.start_dir, &end_dir)]
            } else {
                let i = (0..poly.len())
                    .min_by(|&i, &j| {
                        let di = (poly.reflect_point(i, &end.uv()) - arc.start.uv()).norm();
                        let dj = (poly.reflect_point(j, &end.uv()) - arc.start.uv()).norm();
                        di.total_cmp(&dj)
                    })
                    .unwrap();
                let d = poly.reflect_point(i, &end.uv()) - arc.start.uv();
                let v = poly.reflect_dir(i, &end_dir);
                [d.x, d.y, signed_angle(&arc.start_dir, &v)]
            }
        }
    })
}

fn closure_defect(arc: &GeodesicArc) -> Result<(f64, f64)> {
    let r = closure_residual(arc)?;
    Ok((r[0].hypot(r[1]), r[2].abs()))
}

/// Start point and direction displaced by `sigma` along the transversal and
/// rotated by `psi`.
fn perturbed_start(
    surface: &SurfaceModel,
    p: &SurfacePoint,
    w: &Vector2<f64>,
    sigma: f64,
    psi: f64,
) -> (SurfacePoint, Vector2<f64>) {
    let rot = |v: &Vector2<f64>| {
        let (s, c) = psi.sin_cos();
        Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    };
    match surface {
        SurfaceModel::RoundSphere { .. } | SurfaceModel::Ellipsoid { .. } => {
            if sigma == 0.0 {
                return (*p, rot(w));
            }
            let sph = surface.spheroid().unwrap();
            let x0 = sph.embed(p.u, p.v);
            let [_, _, n0] = sph.frame_at(p);
            let v0 = frame_to_ambient(&sph, p, w);
            let xs = sph.project(&(x0 + n0.cross(&v0) * sigma));
            let q = chart_point(&sph, &xs, Some(p));
            let n = sph.unit_normal(&xs);
            let t = (v0 - n * v0.dot(&n)).normalize();
            let b = n.cross(&t);
            let (s, c) = psi.sin_cos();
            (q, ambient_to_frame(&sph, &q, &(t * c + b * s)))
        }
        SurfaceModel::FlatTorus { .. } => {
            let q = p.uv() + rot90(w) * sigma;
            (surface.canonicalize(&SurfacePoint::new(q.x, q.y)), rot(w))
        }
        SurfaceModel::DoubledPolygon(_) => (*p, rot(w)),
    }
}

/// Newton iteration on the return map (transversal offset, direction
/// angle, period) starting from a nearly closed arc.
pub fn close_up(surface: &SurfaceModel, seed: &GeodesicArc) -> Result<ClosedGeodesic> {
    let (gap, angle) = closure_defect(seed)?;
    if gap > 0.05 * seed.length || angle > 0.2 {
        return Err(Error::SeedNotClosed { gap, angle });
    }
    let p0 = seed.start;
    let w0 = seed.start_dir;
    let eval = |x: &[f64; 3]| -> Result<(GeodesicArc, DVector<f64>)> {
        let (p, w) = perturbed_start(surface, &p0, &w0, x[0], x[1]);
        let arc = shoot_frame(surface, &p, &w, x[2])?;
        let r = closure_residual(&arc)?;
        Ok((arc, DVector::from_column_slice(&r)))
    };
    let mut x = [0.0, 0.0, seed.length];
    let (mut arc, mut r) = eval(&x)?;
    for _ in 0..50 {
        if r.norm() < 1e-12 * x[2].max(1.0) {
            break;
        }
        let mut jac = DMatrix::zeros(3, 3);
        for j in 0..3 {
            let h = if j == 2 { 1e-7 * x[2] } else { 1e-7 };
            let mut xp = x;
            xp[j] += h;
            let (_, rp) = eval(&xp)?;
            jac.set_column(j, &((rp - &r) / h));
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if smax == 0.0 {
            return Err(Error::DegenerateJacobian);
        }
        let dx = svd
            .solve(&(-&r), 1e-9 * smax)
            .map_err(|_| Error::DegenerateJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            let xn = [x[0] + lambda * dx[0], x[1] + lambda * dx[1], x[2] + lambda * dx[2]];
            if xn[2] > 0.0 {
                if let Ok((an, rn)) = eval(&xn) {
                    if rn.norm() < r.norm() {
                        x = xn;
                        arc = an;
                        r = rn;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    ClosedGeodesic::new(arc).map_err(|_| Error::NoConvergence {
        iterations: 50,
        residual: r.norm(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobiSolution {
    /// Samples `(t, J, J')`.
    pub samples: Vec<(f64, f64, f64)>,
    pub first_zero: Option<f64>,
}

/// Normal Jacobi field with `J(0) = 0`, `J'(0) = 1` along `arc`.
pub fn jacobi(arc: &GeodesicArc) -> Result<JacobiSolution> {
    match &arc.path {
        Path::Ambient {
            spheroid,
            knots,
            tol,
        } => {
            let samples = knots.iter().map(|k| (k.t, k.y[6], k.y[7])).collect();
            let mut first_zero = None;
            for w in knots.windows(2).skip(1) {
                let (a, b) = (&w[0], &w[1]);
                if a.y[6] > 0.0 && b.y[6] <= 0.0 {
                    first_zero = Some(refine_zero(spheroid, a, b, tol)?);
                    break;
                }
            }
            if first_zero.is_none() && knots.len() >= 2 {
                // a zero inside the first step
                let (a, b) = (&knots[0], &knots[1]);
                if b.y[6] <= 0.0 {
                    first_zero = Some(refine_zero(spheroid, a, b, tol)?);
                }
            }
            Ok(JacobiSolution {
                samples,
                first_zero,
            })
        }
        _ => Ok(JacobiSolution {
            samples: arc.samples.iter().map(|s| (s.t, s.t, 1.0)).collect(),
            first_zero: None,
        }),
    }
}

fn refine_zero(sph: &Spheroid, a: &Knot, b: &Knot, tol: &Tolerance) -> Result<f64> {
    let (ja, jb) = (a.y[6], b.y[6]);
    let mut t = if a.t == 0.0 {
        // J ≈ t near the start; use the slope at b instead
        b.t - jb / b.y[7]
    } else {
        a.t + (b.t - a.t) * ja / (ja - jb)
    };
    t = t.clamp(a.t.max(1e-300), b.t);
    for _ in 0..30 {
        let y = flow(sph, &a.y, t - a.t, tol)?;
        if y[7] == 0.0 {
            break;
        }
        let dt = y[6] / y[7];
        t = (t - dt).clamp(a.t, b.t);
        if dt.abs() < 1e-14 {
            break;
        }
    }
    Ok(t)
}

/// First conjugate distance along the geodesic from `p` in direction `w`,
/// searched up to `limit`.
pub fn first_conjugate(surface: &SurfaceModel, p: &SurfacePoint, w: &Vector2<f64>, limit: f64) -> Result<Option<f64>> {
    if surface.spheroid().is_none() {
        return Ok(None);
    }
    Ok(jacobi(&shoot_frame(surface, p, w, limit)?)?.first_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn sphere_equator_half_turn() {
        let s = SurfaceModel::unit_sphere();
        let p = SurfacePoint::new(FRAC_PI_2, 0.0);
        let arc = shoot_frame(&s, &p, &Vector2::new(0.0, 1.0), PI).unwrap();
        let (q, v) = arc.end();
        assert!((q.u - FRAC_PI_2).abs() < 1e-10);
        assert!((q.v - PI).abs() < 1e-10);
        assert!((v - Vector2::new(0.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn torus_straight_line() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let arc = shoot(&t, &SurfacePoint::new(0.0, 0.0), &TangentVector::new(1.0, 0.0), 0.5).unwrap();
        let (q, _) = arc.end();
        assert!((q.u - 0.5).abs() < 1e-15 && q.v.abs() < 1e-15);
    }

    #[test]
    fn sphere_jacobi_zero_at_pi_r() {
        for r in [1.0, 2.0] {
            let s = SurfaceModel::sphere(r).unwrap();
            let arc = shoot_frame(&s, &SurfacePoint::new(1.0, 0.3), &Vector2::new(0.6, 0.8), 4.0 * r).unwrap();
            let z = jacobi(&arc).unwrap().first_zero.unwrap();
            assert!((z - PI * r).abs() < 1e-7, "{z}");
        }
    }

    #[test]
    fn speed_stays_unit() {
        let s = SurfaceModel::ellipsoid(0.5).unwrap();
        let arc = shoot_frame(&s, &SurfacePoint::new(0.7, 0.2), &Vector2::new(0.3, 0.9), 10.0).unwrap();
        for smp in &arc.samples {
            assert!((smp.velocity.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn close_up_sphere_equator() {
        let s = SurfaceModel::unit_sphere();
        let p = SurfacePoint::new(FRAC_PI_2 + 0.01, 0.0);
        let seed = shoot_frame(&s, &p, &Vector2::new(0.02, 1.0), TAU + 0.01).unwrap();
        let g = close_up(&s, &seed).unwrap();
        assert!((g.length() - TAU).abs() < 1e-7);
    }

    #[test]
    fn close_up_torus_horizontal() {
        let t = SurfaceModel::torus(1.0, 1.0).unwrap();
        let seed = shoot_frame(&t, &SurfacePoint::new(0.1, 0.2), &Vector2::new(1.0, 0.01), 1.02).unwrap();
        let g = close_up(&t, &seed).unwrap();
        assert!((g.length() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn evaluate_is_periodic() {
        let s = SurfaceModel::unit_sphere();
        let g = ClosedGeodesic::equator(&s).unwrap();
        let (a, _) = g.evaluate(0.3);
        let (b, _) = g.evaluate(0.3 + TAU);
        assert!(s.chord(&a, &b) < 1e-9);
        let (h, _) = g.evaluate(PI);
        assert!((h.v - PI).abs() < 1e-9);
    }

    #[test]
    fn over_under_length() {
        let sq = SurfaceModel::doubled_square();
        for front in [true, false] {
            let g = ClosedGeodesic::over_under(&sq, front).unwrap();
            assert!((g.length() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        }
    }
}
