//! Model surfaces: metrics, charts, identifications and cone points.
//!
//! Every surface carries an orthogonal chart, so each point also has a
//! canonical orthonormal frame (the normalized chart basis). Most of the
//! crate works with tangent vectors in that frame ("frame vectors",
//! `Vector2<f64>`); [`TangentVector`] holds chart-basis components and is
//! what the per-point public API consumes.

use std::f64::consts::{PI, TAU};
use std::fmt;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// Which copy of a doubled polygon a point lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sheet {
    Front,
    Back,
}

impl Sheet {
    pub fn flip(self) -> Sheet {
        match self {
            Sheet::Front => Sheet::Back,
            Sheet::Back => Sheet::Front,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfacePoint {
    pub u: f64,
    pub v: f64,
    pub sheet: Sheet,
}

impl SurfacePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self {
            u,
            v,
            sheet: Sheet::Front,
        }
    }

    pub fn on_sheet(u: f64, v: f64, sheet: Sheet) -> Self {
        Self { u, v, sheet }
    }

    pub(crate) fn uv(&self) -> Vector2<f64> {
        Vector2::new(self.u, self.v)
    }
}

/// Tangent vector components in the chart basis (∂u, ∂v).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentVector {
    pub a: f64,
    pub b: f64,
}

impl TangentVector {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s)
    }
}

/// Surface of revolution `(x² + y²)/a² + z²/b² = 1` in colatitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Spheroid {
    pub a: f64,
    pub b: f64,
}

impl Spheroid {
    pub fn embed(&self, theta: f64, phi: f64) -> Vector3<f64> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Vector3::new(self.a * st * cp, self.a * st * sp, self.b * ct)
    }

    pub fn chart(&self, x: &Vector3<f64>) -> (f64, f64) {
        let theta = (x.z / self.b).clamp(-1.0, 1.0).acos();
        let phi = wrap_angle(x.y.atan2(x.x));
        (theta, phi)
    }

    pub fn point(&self, x: &Vector3<f64>) -> SurfacePoint {
        let (theta, phi) = self.chart(x);
        SurfacePoint::new(theta, phi)
    }

    /// Metric coefficients `(E, G)` of the diagonal chart metric.
    pub fn metric(&self, theta: f64) -> (f64, f64) {
        let (st, ct) = theta.sin_cos();
        (
            self.a * self.a * ct * ct + self.b * self.b * st * st,
            self.a * self.a * st * st,
        )
    }

    pub fn metric_deriv(&self, theta: f64) -> (f64, f64) {
        let (st, ct) = theta.sin_cos();
        (
            2.0 * st * ct * (self.b * self.b - self.a * self.a),
            2.0 * self.a * self.a * st * ct,
        )
    }

    /// Orthonormal frame `(e_θ, e_φ, n)` with outward normal.
    pub fn frame(&self, theta: f64, phi: f64) -> [Vector3<f64>; 3] {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let (e, _) = self.metric(theta);
        let et = Vector3::new(self.a * ct * cp, self.a * ct * sp, -self.b * st) / e.sqrt();
        let ep = Vector3::new(-sp, cp, 0.0);
        let n = et.cross(&ep);
        [et, ep, n]
    }

    pub fn frame_at(&self, p: &SurfacePoint) -> [Vector3<f64>; 3] {
        self.frame(p.u, p.v)
    }

    pub fn unit_normal(&self, x: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            x.x / (self.a * self.a),
            x.y / (self.a * self.a),
            x.z / (self.b * self.b),
        )
        .normalize()
    }

    /// Radial projection onto the surface.
    pub fn project(&self, x: &Vector3<f64>) -> Vector3<f64> {
        let f = (x.x * x.x + x.y * x.y) / (self.a * self.a) + x.z * x.z / (self.b * self.b);
        x / f.sqrt()
    }

    /// Geodesic acceleration of the constrained motion.
    pub fn accel(&self, x: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        let ia = 1.0 / (self.a * self.a);
        let ib = 1.0 / (self.b * self.b);
        let grad = Vector3::new(x.x * ia, x.y * ia, x.z * ib);
        let vhv = (v.x * v.x + v.y * v.y) * ia + v.z * v.z * ib;
        -grad * (vhv / grad.norm_squared())
    }

    /// Gauss curvature from the diagonal metric, `K = b² / E(θ)²`.
    pub fn curvature_theta(&self, theta: f64) -> f64 {
        let (e, _) = self.metric(theta);
        self.b * self.b / (e * e)
    }

    pub fn curvature(&self, x: &Vector3<f64>) -> f64 {
        let c2 = (x.z / self.b).powi(2).min(1.0);
        let e = self.a * self.a * c2 + self.b * self.b * (1.0 - c2);
        self.b * self.b / (e * e)
    }

    /// Arc length along a meridian between two colatitudes.
    pub fn meridian_arc(&self, theta0: f64, theta1: f64) -> f64 {
        let (lo, hi) = if theta0 <= theta1 {
            (theta0, theta1)
        } else {
            (theta1, theta0)
        };
        gauss_legendre(|t| self.metric(t).0.sqrt(), lo, hi, 64)
    }

    pub fn half_meridian(&self) -> f64 {
        self.meridian_arc(0.0, PI)
    }

    pub fn min_curvature(&self) -> f64 {
        // K = b²/E² with E between min(a², b²) and max(a², b²)
        let emax = (self.a * self.a).max(self.b * self.b);
        self.b * self.b / (emax * emax)
    }
}

/// Strictly convex, counterclockwise polygon used for doubled polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    vertices: Vec<Vector2<f64>>,
    normals: Vec<Vector2<f64>>,
    diameter: f64,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(Error::InvalidSurface(
                "polygon needs at least three vertices".into(),
            ));
        }
        let verts: Vec<Vector2<f64>> = vertices.iter().map(|&(x, y)| Vector2::new(x, y)).collect();
        if verts.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(Error::InvalidSurface("non-finite polygon vertex".into()));
        }
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let c = verts[(i + 2) % n];
            if cross2(&(b - a), &(c - b)) <= 0.0 {
                return Err(Error::InvalidSurface(
                    "polygon must be strictly convex and counterclockwise".into(),
                ));
            }
        }
        let normals = (0..n)
            .map(|i| {
                let d = (verts[(i + 1) % n] - verts[i]).normalize();
                Vector2::new(-d.y, d.x)
            })
            .collect();
        let mut diameter: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                diameter = diameter.max((verts[i] - verts[j]).norm());
            }
        }
        // the winding test above accepts star polygons; reject them by total turning
        let turning: f64 = (0..n)
            .map(|i| {
                let e0 = verts[(i + 1) % n] - verts[i];
                let e1 = verts[(i + 2) % n] - verts[(i + 1) % n];
                cross2(&e0, &e1).atan2(e0.dot(&e1))
            })
            .sum();
        if (turning - TAU).abs() > 1e-9 {
            return Err(Error::InvalidSurface("polygon winds more than once".into()));
        }
        Ok(Self {
            vertices: verts,
            normals,
            diameter,
        })
    }

    /// Regular polygon with `n` sides of the given length, centred at the origin.
    pub fn regular(n: usize, side: f64) -> Result<Self> {
        if n < 3 || side <= 0.0 {
            return Err(Error::InvalidSurface("bad regular polygon".into()));
        }
        let r = side / (2.0 * (PI / n as f64).sin());
        let verts = (0..n)
            .map(|i| {
                let t = -PI / 2.0 - PI / n as f64 + TAU * i as f64 / n as f64;
                (r * t.cos(), r * t.sin())
            })
            .collect();
        Self::new(verts)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Vector2<f64> {
        self.vertices[i % self.vertices.len()]
    }

    pub fn vertices(&self) -> &[Vector2<f64>] {
        &self.vertices
    }

    pub fn edge(&self, i: usize) -> (Vector2<f64>, Vector2<f64>) {
        (self.vertex(i), self.vertex(i + 1))
    }

    pub fn edge_midpoint(&self, i: usize) -> Vector2<f64> {
        let (a, b) = self.edge(i);
        (a + b) / 2.0
    }

    /// Inward unit normal of edge `i`.
    pub fn normal(&self, i: usize) -> Vector2<f64> {
        self.normals[i % self.normals.len()]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn signed_dist(&self, i: usize, p: &Vector2<f64>) -> f64 {
        (p - self.vertex(i)).dot(&self.normal(i))
    }

    pub fn interior_angle(&self, i: usize) -> f64 {
        let n = self.len();
        let prev = self.vertex(i + n - 1) - self.vertex(i);
        let next = self.vertex(i + 1) - self.vertex(i);
        cross2(&next, &prev).atan2(next.dot(&prev))
    }

    pub fn cone_angle(&self, i: usize) -> f64 {
        2.0 * self.interior_angle(i)
    }

    pub fn reflect_point(&self, i: usize, p: &Vector2<f64>) -> Vector2<f64> {
        p - self.normal(i) * (2.0 * self.signed_dist(i, p))
    }

    pub fn reflect_dir(&self, i: usize, d: &Vector2<f64>) -> Vector2<f64> {
        let n = self.normal(i);
        d - n * (2.0 * d.dot(&n))
    }

    pub(crate) fn edge_eps(&self) -> f64 {
        1e-11 * self.diameter
    }

    pub(crate) fn vertex_eps(&self) -> f64 {
        1e-9 * self.diameter
    }

    /// Edge the point lies on (within tolerance), away from vertices.
    pub fn on_edge(&self, p: &Vector2<f64>) -> Option<usize> {
        if self.at_vertex(p).is_some() {
            return None;
        }
        (0..self.len()).find(|&i| {
            let (a, b) = self.edge(i);
            let t = (p - a).dot(&(b - a)) / (b - a).norm_squared();
            self.signed_dist(i, p).abs() <= self.edge_eps() && (0.0..=1.0).contains(&t)
        })
    }

    pub fn at_vertex(&self, p: &Vector2<f64>) -> Option<usize> {
        (0..self.len()).find(|&i| (p - self.vertex(i)).norm() <= self.vertex_eps())
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        (0..self.len()).all(|i| self.signed_dist(i, p) >= -self.edge_eps())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SurfaceModel {
    RoundSphere { radius: f64 },
    /// `x² + y² + (z/c)² = 1`.
    Ellipsoid { c: f64 },
    FlatTorus { a: f64, b: f64 },
    DoubledPolygon(Polygon),
}

impl SurfaceModel {
    pub fn sphere(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSurface(format!("radius {radius} must be positive")));
        }
        Ok(Self::RoundSphere { radius })
    }

    pub fn unit_sphere() -> Self {
        Self::RoundSphere { radius: 1.0 }
    }

    pub fn ellipsoid(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidSurface(format!("c = {c} must be positive")));
        }
        Ok(Self::Ellipsoid { c })
    }

    pub fn torus(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidSurface("torus sides must be positive".into()));
        }
        Ok(Self::FlatTorus { a, b })
    }

    pub fn doubled_polygon(vertices: Vec<(f64, f64)>) -> Result<Self> {
        Ok(Self::DoubledPolygon(Polygon::new(vertices)?))
    }

    /// Doubled unit square `[0,1]²`.
    pub fn doubled_square() -> Self {
        Self::DoubledPolygon(
            Polygon::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap(),
        )
    }

    /// Doubled regular pentagon with unit sides.
    pub fn doubled_pentagon() -> Self {
        Self::DoubledPolygon(Polygon::regular(5, 1.0).unwrap())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::RoundSphere { .. } => "sphere",
            Self::Ellipsoid { .. } => "ellipsoid",
            Self::FlatTorus { .. } => "torus",
            Self::DoubledPolygon(_) => "polygon",
        }
    }

    pub(crate) fn spheroid(&self) -> Option<Spheroid> {
        match *self {
            Self::RoundSphere { radius } => Some(Spheroid {
                a: radius,
                b: radius,
            }),
            Self::Ellipsoid { c } => Some(Spheroid { a: 1.0, b: c }),
            _ => None,
        }
    }

    pub fn polygon(&self) -> Option<&Polygon> {
        match self {
            Self::DoubledPolygon(p) => Some(p),
            _ => None,
        }
    }

    /// Intrinsic diameter, or a comparable length scale where the exact value
    /// is not known in closed form (doubled polygons).
    pub fn diameter(&self) -> f64 {
        match self {
            Self::RoundSphere { radius } => PI * radius,
            Self::Ellipsoid { .. } => self.spheroid().unwrap().half_meridian(),
            Self::FlatTorus { a, b } => 0.5 * (a * a + b * b).sqrt(),
            Self::DoubledPolygon(p) => p.diameter(),
        }
    }

    /// Tie tolerance for minimizer lengths.
    pub fn tol_len(&self) -> f64 {
        1e-6 * self.diameter()
    }

    pub fn is_cone_point(&self, p: &SurfacePoint) -> bool {
        match self {
            Self::DoubledPolygon(poly) => poly.at_vertex(&p.uv()).is_some(),
            _ => false,
        }
    }

    pub fn cone_points(&self) -> Vec<(SurfacePoint, f64)> {
        match self {
            Self::DoubledPolygon(poly) => (0..poly.len())
                .map(|i| {
                    let v = poly.vertex(i);
                    (SurfacePoint::new(v.x, v.y), poly.cone_angle(i))
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn canonicalize(&self, p: &SurfacePoint) -> SurfacePoint {
        match self {
            Self::RoundSphere { .. } | Self::Ellipsoid { .. } => {
                let mut theta = p.u.rem_euclid(TAU);
                let mut phi = p.v;
                if theta > PI {
                    theta = TAU - theta;
                    phi += PI;
                }
                SurfacePoint::new(theta, wrap_angle(phi))
            }
            Self::FlatTorus { a, b } => SurfacePoint::new(wrap(p.u, *a), wrap(p.v, *b)),
            Self::DoubledPolygon(poly) => {
                let mut q = p.uv();
                let mut sheet = p.sheet;
                for _ in 0..64 {
                    let (worst, dist) = (0..poly.len())
                        .map(|i| (i, poly.signed_dist(i, &q)))
                        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                    if dist >= -poly.edge_eps() {
                        break;
                    }
                    q = poly.reflect_point(worst, &q);
                    sheet = sheet.flip();
                }
                if poly.on_edge(&q).is_some() || poly.at_vertex(&q).is_some() {
                    sheet = Sheet::Front;
                }
                SurfacePoint::on_sheet(q.x, q.y, sheet)
            }
        }
    }

    fn check_chart(&self, p: &SurfacePoint) -> Result<()> {
        if !p.u.is_finite() || !p.v.is_finite() {
            return Err(Error::OutOfChart { u: p.u, v: p.v });
        }
        if let Self::DoubledPolygon(poly) = self {
            if poly.at_vertex(&p.uv()).is_some() {
                return Err(Error::ConePointQuery { u: p.u, v: p.v });
            }
            if !poly.contains(&p.uv()) {
                return Err(Error::OutOfChart { u: p.u, v: p.v });
            }
        }
        Ok(())
    }

    fn check_regular_chart(&self, p: &SurfacePoint) -> Result<()> {
        self.check_chart(p)?;
        if self.spheroid().is_some() {
            let s = p.u.sin();
            if s.abs() < 1e-12 {
                return Err(Error::ChartSingular { u: p.u, v: p.v });
            }
        }
        Ok(())
    }

    pub fn metric_at(&self, p: &SurfacePoint) -> Result<Matrix2<f64>> {
        self.check_regular_chart(p)?;
        Ok(match self.spheroid() {
            Some(s) => {
                let (e, g) = s.metric(p.u);
                Matrix2::new(e, 0.0, 0.0, g)
            }
            None => Matrix2::identity(),
        })
    }

    /// Christoffel symbols indexed `[k][i][j]` for Γ^k_{ij}.
    pub fn christoffel_at(&self, p: &SurfacePoint) -> Result<[[[f64; 2]; 2]; 2]> {
        self.check_regular_chart(p)?;
        let mut gamma = [[[0.0; 2]; 2]; 2];
        if let Some(s) = self.spheroid() {
            let (e, g) = s.metric(p.u);
            let (de, dg) = s.metric_deriv(p.u);
            gamma[0][0][0] = de / (2.0 * e);
            gamma[0][1][1] = -dg / (2.0 * e);
            gamma[1][0][1] = dg / (2.0 * g);
            gamma[1][1][0] = dg / (2.0 * g);
        }
        Ok(gamma)
    }

    /// Lower curvature bound for smooth surfaces (`None` with cone points).
    pub fn min_gauss_curvature(&self) -> Option<f64> {
        match self {
            Self::DoubledPolygon(_) => None,
            Self::FlatTorus { .. } => Some(0.0),
            _ => self.spheroid().map(|s| s.min_curvature()),
        }
    }

    pub fn gauss_curvature(&self, p: &SurfacePoint) -> Result<f64> {
        self.check_chart(p)?;
        Ok(match self.spheroid() {
            Some(s) => s.curvature_theta(p.u),
            None => 0.0,
        })
    }

    pub fn inner(&self, p: &SurfacePoint, x: &TangentVector, y: &TangentVector) -> Result<f64> {
        let g = self.metric_at(p)?;
        Ok(g[(0, 0)] * x.a * y.a + g[(0, 1)] * (x.a * y.b + x.b * y.a) + g[(1, 1)] * x.b * y.b)
    }

    pub fn norm(&self, p: &SurfacePoint, x: &TangentVector) -> Result<f64> {
        Ok(self.inner(p, x, x)?.max(0.0).sqrt())
    }

    pub fn angle_between(
        &self,
        p: &SurfacePoint,
        x: &TangentVector,
        y: &TangentVector,
    ) -> Result<f64> {
        let a = self.to_frame(p, x)?;
        let b = self.to_frame(p, y)?;
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(cross2(&a, &b).abs().atan2(a.dot(&b)))
    }

    /// Chart-basis vector to orthonormal frame components.
    pub fn to_frame(&self, p: &SurfacePoint, x: &TangentVector) -> Result<Vector2<f64>> {
        self.check_chart(p)?;
        Ok(match self.spheroid() {
            Some(s) => {
                let (e, g) = s.metric(p.u);
                Vector2::new(e.sqrt() * x.a, g.sqrt() * x.b)
            }
            None => Vector2::new(x.a, x.b),
        })
    }

    pub fn from_frame(&self, p: &SurfacePoint, w: &Vector2<f64>) -> Result<TangentVector> {
        self.check_regular_chart(p)?;
        Ok(match self.spheroid() {
            Some(s) => {
                let (e, g) = s.metric(p.u);
                TangentVector::new(w.x / e.sqrt(), w.y / g.sqrt())
            }
            None => TangentVector::new(w.x, w.y),
        })
    }

    pub(crate) fn embed(&self, p: &SurfacePoint) -> Option<Vector3<f64>> {
        self.spheroid().map(|s| s.embed(p.u, p.v))
    }

    /// Ambient distance for spheroids, chart distance (with identifications)
    /// otherwise. Used for closeness tests, not as the intrinsic metric.
    pub(crate) fn chord(&self, p: &SurfacePoint, q: &SurfacePoint) -> f64 {
        match self {
            Self::RoundSphere { .. } | Self::Ellipsoid { .. } => {
                (self.embed(p).unwrap() - self.embed(q).unwrap()).norm()
            }
            Self::FlatTorus { a, b } => {
                let du = centered(p.u - q.u, *a);
                let dv = centered(p.v - q.v, *b);
                du.hypot(dv)
            }
            Self::DoubledPolygon(poly) => {
                let d = (p.uv() - q.uv()).norm();
                let seam = poly.on_edge(&p.uv()).is_some()
                    || poly.on_edge(&q.uv()).is_some()
                    || poly.at_vertex(&p.uv()).is_some()
                    || poly.at_vertex(&q.uv()).is_some();
                if p.sheet == q.sheet || seam {
                    d
                } else {
                    // through the nearest edge
                    (0..poly.len())
                        .map(|i| (poly.reflect_point(i, &p.uv()) - q.uv()).norm())
                        .fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    pub fn to_config(&self) -> String {
        match self {
            Self::RoundSphere { radius } => format!("kind=sphere\nradius={radius}\n"),
            Self::Ellipsoid { c } => format!("kind=ellipsoid\nc={c}\n"),
            Self::FlatTorus { a, b } => format!("kind=torus\na={a}\nb={b}\n"),
            Self::DoubledPolygon(poly) => {
                let verts: Vec<String> = poly
                    .vertices()
                    .iter()
                    .map(|v| format!("{},{}", v.x, v.y))
                    .collect();
                format!("kind=polygon\nvertices={}\n", verts.join(";"))
            }
        }
    }

    /// Parses `key=value` pairs separated by newlines or whitespace. A bare
    /// leading word is taken as the kind; `square` and `pentagon` name the
    /// unit-side doubled square and regular pentagon.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut kind: Option<String> = None;
        let mut fields = std::collections::BTreeMap::new();
        for token in text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace())
        {
            match token.split_once('=') {
                Some((k, v)) => {
                    let k = k.trim().to_ascii_lowercase();
                    if k == "kind" {
                        kind = Some(v.trim().to_ascii_lowercase());
                    } else {
                        fields.insert(k, v.trim().to_string());
                    }
                }
                None if kind.is_none() => kind = Some(token.to_ascii_lowercase()),
                None => return Err(Error::Parse(format!("unexpected token `{token}`"))),
            }
        }
        let kind = kind.ok_or_else(|| Error::Parse("missing `kind`".into()))?;
        let num = |key: &str, default: Option<f64>| -> Result<f64> {
            match fields.get(key) {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number for `{key}`: {s}"))),
                None => default.ok_or_else(|| Error::Parse(format!("missing `{key}`"))),
            }
        };
        match kind.as_str() {
            "sphere" => Self::sphere(num("radius", Some(1.0))?),
            "ellipsoid" => Self::ellipsoid(num("c", None)?),
            "torus" => Self::torus(num("a", Some(1.0))?, num("b", Some(1.0))?),
            "square" => Ok(Self::doubled_square()),
            "pentagon" => Ok(Self::doubled_pentagon()),
            "polygon" => {
                let spec = fields
                    .get("vertices")
                    .ok_or_else(|| Error::Parse("missing `vertices`".into()))?;
                Self::doubled_polygon(parse_pairs(spec)?)
            }
            other => Err(Error::Parse(format!("unknown surface kind `{other}`"))),
        }
    }
}

impl fmt::Display for SurfaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_config().trim_end().replace('\n', " "))
    }
}

/// Parses `x,y;x,y;...`.
pub fn parse_pairs(spec: &str) -> Result<Vec<(f64, f64)>> {
    spec.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad pair `{pair}`")))?;
            let x = x.trim().parse::<f64>();
            let y = y.trim().parse::<f64>();
            match (x, y) {
                (Ok(x), Ok(y)) => Ok((x, y)),
                _ => Err(Error::Parse(format!("bad pair `{pair}`"))),
            }
        })
        .collect()
}

pub(crate) fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

pub(crate) fn rot90(v: &Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

pub(crate) fn wrap_angle(x: f64) -> f64 {
    wrap(x, TAU)
}

fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    if r >= period {
        0.0
    } else {
        r
    }
}

/// Representative of `x` modulo `period` in `[-period/2, period/2)`.
pub(crate) fn centered(x: f64, period: f64) -> f64 {
    x - period * (x / period).round()
}

/// Composite Gauss–Legendre (5-point) quadrature.
pub(crate) fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        -0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = a + h * (i as f64 + 0.5);
            X.iter()
                .zip(W.iter())
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}
