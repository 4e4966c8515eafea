//! Straight-line geodesics on doubled polygons: billiard tracing and
//! best-first unfolding enumeration.
//!
//! Directions at an edge (seam) point are given in the "front-unfolded"
//! frame: a direction pointing into the polygon travels on the front sheet,
//! one pointing out of it travels on the back sheet after reflection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::surfaces::{cross2, Polygon, Sheet, SurfacePoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Piece {
    pub t0: f64,
    pub origin: Vector2<f64>,
    pub sheet: Sheet,
    pub dir: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Trace {
    pub pieces: Vec<Piece>,
    pub length: f64,
    pub end: SurfacePoint,
    pub end_dir: Vector2<f64>,
    pub crossings: Vec<usize>,
}

/// Sheet and on-sheet direction for leaving `p` along frame vector `w`.
pub(crate) fn depart(poly: &Polygon, p: &SurfacePoint, w: &Vector2<f64>) -> (Sheet, Vector2<f64>) {
    match poly.on_edge(&p.uv()) {
        Some(e) if w.dot(&poly.normal(e)) < -1e-15 => (Sheet::Back, poly.reflect_dir(e, w)),
        Some(_) => (Sheet::Front, *w),
        None => (p.sheet, *w),
    }
}

/// Frame vector of an on-sheet direction at `pos`.
pub(crate) fn frame_dir(poly: &Polygon, pos: &Vector2<f64>, sheet: Sheet, d: &Vector2<f64>) -> Vector2<f64> {
    match (poly.on_edge(pos), sheet) {
        (Some(e), Sheet::Back) => poly.reflect_dir(e, d),
        _ => *d,
    }
}

fn settle(poly: &Polygon, pos: &Vector2<f64>, sheet: Sheet) -> SurfacePoint {
    let mut q = *pos;
    // snap tiny overshoots back onto the closed polygon
    for i in 0..poly.len() {
        let s = poly.signed_dist(i, &q);
        if s < 0.0 && s > -1e3 * f64::EPSILON * poly.diameter() {
            q -= poly.normal(i) * s;
        }
    }
    let sheet = if poly.on_edge(&q).is_some() || poly.at_vertex(&q).is_some() {
        Sheet::Front
    } else {
        sheet
    };
    SurfacePoint::on_sheet(q.x, q.y, sheet)
}

/// Traces the billiard path of length `length` from `p` along unit `w`.
pub(crate) fn trace(poly: &Polygon, p: &SurfacePoint, w: &Vector2<f64>, length: f64) -> Result<Trace> {
    if poly.at_vertex(&p.uv()).is_some() {
        return Err(Error::ConePointQuery { u: p.u, v: p.v });
    }
    let (mut sheet, mut d) = depart(poly, p, w);
    let mut pos = p.uv();
    let mut t = 0.0;
    let mut last = poly.on_edge(&pos);
    let mut pieces = vec![Piece {
        t0: 0.0,
        origin: pos,
        sheet,
        dir: d,
    }];
    let mut crossings = Vec::new();
    loop {
        let remaining = length - t;
        let mut hit: Option<(usize, f64)> = None;
        for i in 0..poly.len() {
            if Some(i) == last {
                continue;
            }
            let dn = d.dot(&poly.normal(i));
            if dn >= -1e-15 {
                continue;
            }
            let s = (poly.signed_dist(i, &pos) / -dn).max(0.0);
            if hit.map_or(true, |(_, best)| s < best) {
                hit = Some((i, s));
            }
        }
        match hit {
            Some((i, s)) if s < remaining => {
                pos += d * s;
                t += s;
                if poly.at_vertex(&pos).is_some() {
                    return Err(Error::ConePointHit { at: t });
                }
                sheet = sheet.flip();
                d = poly.reflect_dir(i, &d);
                last = Some(i);
                crossings.push(i);
                pieces.push(Piece {
                    t0: t,
                    origin: pos,
                    sheet,
                    dir: d,
                });
            }
            _ => {
                pos += d * remaining;
                if poly.at_vertex(&pos).is_some() {
                    return Err(Error::ConePointHit { at: length });
                }
                let end = settle(poly, &pos, sheet);
                let end_dir = frame_dir(poly, &end.uv(), sheet, &d);
                return Ok(Trace {
                    pieces,
                    length,
                    end,
                    end_dir,
                    crossings,
                });
            }
        }
    }
}

impl Trace {
    /// Point and frame velocity at arc length `s`.
    pub fn at(&self, poly: &Polygon, s: f64) -> (SurfacePoint, Vector2<f64>) {
        let s = s.clamp(0.0, self.length);
        let idx = self
            .pieces
            .partition_point(|pc| pc.t0 <= s)
            .saturating_sub(1);
        let pc = &self.pieces[idx];
        let pos = pc.origin + pc.dir * (s - pc.t0);
        let point = settle(poly, &pos, pc.sheet);
        (point, frame_dir(poly, &point.uv(), pc.sheet, &pc.dir))
    }
}

/// Straight segment between two points of a doubled polygon.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Unfolded {
    pub dir: Vector2<f64>,
    pub end_dir: Vector2<f64>,
    pub length: f64,
    pub edges: Vec<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Affine {
    r: Matrix2<f64>,
    t: Vector2<f64>,
}

impl Affine {
    fn identity() -> Self {
        Self {
            r: Matrix2::identity(),
            t: Vector2::zeros(),
        }
    }

    fn apply(&self, x: &Vector2<f64>) -> Vector2<f64> {
        self.r * x + self.t
    }

    /// `self ∘ reflect_i`.
    fn then_reflect(&self, poly: &Polygon, i: usize) -> Self {
        let n = poly.normal(i);
        let refl = Matrix2::identity() - 2.0 * n * n.transpose();
        let off = n * (2.0 * poly.vertex(i).dot(&n));
        Self {
            r: self.r * refl,
            t: self.r * off + self.t,
        }
    }
}

struct Copy {
    lb: f64,
    map: Affine,
    sheet: Sheet,
    entry: Option<usize>,
    lo: f64,
    width: f64,
    edges: Vec<usize>,
}

impl PartialEq for Copy {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Copy {}
impl PartialOrd for Copy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Copy {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on lower bound, ties broken by depth then edge sequence
        other
            .lb
            .total_cmp(&self.lb)
            .then_with(|| other.edges.len().cmp(&self.edges.len()))
            .then_with(|| other.edges.cmp(&self.edges))
    }
}

fn seg_dist(q: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let ab = b - a;
    let t = ((q - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    (a + ab * t - q).norm()
}

fn rel_angle(a: f64, lo: f64) -> f64 {
    let mut r = (a - lo).rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// All straight segments from `q` to `p` of length at most
/// `min(bound, shortest + window)`, sorted by length.
pub(crate) fn segments(
    poly: &Polygon,
    q: &SurfacePoint,
    p: &SurfacePoint,
    window: f64,
    bound: f64,
    max_depth: usize,
) -> Result<Vec<Unfolded>> {
    if poly.at_vertex(&q.uv()).is_some() {
        return Err(Error::ConePointQuery { u: q.u, v: q.v });
    }
    if poly.at_vertex(&p.uv()).is_some() {
        return Err(Error::ConePointQuery { u: p.u, v: p.v });
    }
    let qv = q.uv();
    let pv = p.uv();
    let p_edge = poly.on_edge(&pv);
    let mut heap = BinaryHeap::new();
    match poly.on_edge(&qv) {
        Some(e) => {
            let (a, b) = poly.edge(e);
            let base = (b - a).y.atan2((b - a).x);
            heap.push(Copy {
                lb: 0.0,
                map: Affine::identity(),
                sheet: Sheet::Front,
                entry: Some(e),
                lo: base,
                width: PI,
                edges: vec![],
            });
            heap.push(Copy {
                lb: 0.0,
                map: Affine::identity().then_reflect(poly, e),
                sheet: Sheet::Back,
                entry: Some(e),
                lo: base + PI,
                width: PI,
                edges: vec![],
            });
        }
        None => heap.push(Copy {
            lb: 0.0,
            map: Affine::identity(),
            sheet: q.sheet,
            entry: None,
            lo: 0.0,
            width: TAU,
            edges: vec![],
        }),
    }
    let ang_eps = 1e-12;
    let mut found: Vec<Unfolded> = Vec::new();
    let mut best = f64::INFINITY;
    let mut depth_cut = f64::INFINITY;
    let cutoff = |best: f64| bound.min(best + window);
    while let Some(copy) = heap.pop() {
        if copy.lb > cutoff(best) {
            break;
        }
        let initial = copy.edges.is_empty();
        let reachable = p_edge.is_some() || p.sheet == copy.sheet;
        let on_entry = p_edge.is_some() && p_edge == copy.entry && !initial;
        if reachable && !on_entry {
            let target = copy.map.apply(&pv);
            let w = target - qv;
            let len = w.norm();
            let ang = w.y.atan2(w.x);
            let r = rel_angle(ang, copy.lo);
            let inside = copy.width >= TAU || (r >= -ang_eps && r <= copy.width + ang_eps);
            if len > 0.0 && len <= cutoff(best) + 1e-12 && inside {
                let dir = w / len;
                if let Ok(tr) = trace(poly, q, &dir, len) {
                    let hit = (tr.end.uv() - pv).norm() <= 1e-9 * poly.diameter()
                        && (p_edge.is_some() || tr.end.sheet == p.sheet);
                    if hit {
                        best = best.min(len);
                        found.push(Unfolded {
                            dir,
                            end_dir: tr.end_dir,
                            length: len,
                            edges: tr.crossings,
                        });
                    }
                }
            }
        }
        for i in 0..poly.len() {
            if Some(i) == copy.entry {
                continue;
            }
            let a = copy.map.apply(&poly.vertex(i)) - qv;
            let b = copy.map.apply(&poly.vertex(i + 1)) - qv;
            let span = cross2(&a, &b).atan2(a.dot(&b));
            let (start, w) = if span >= 0.0 {
                (a.y.atan2(a.x), span)
            } else {
                (b.y.atan2(b.x), -span)
            };
            let (lo, width) = if copy.width >= TAU {
                (start, w)
            } else {
                let r = rel_angle(start, copy.lo);
                let lo = r.max(0.0);
                let hi = (r + w).min(copy.width);
                if hi - lo <= 1e-14 {
                    continue;
                }
                (copy.lo + lo, hi - lo)
            };
            let lb = seg_dist(&qv, &(a + qv), &(b + qv));
            if lb > cutoff(best) {
                continue;
            }
            if copy.edges.len() + 1 > max_depth {
                depth_cut = depth_cut.min(lb);
                continue;
            }
            let mut edges = copy.edges.clone();
            edges.push(i);
            heap.push(Copy {
                lb,
                map: copy.map.then_reflect(poly, i),
                sheet: copy.sheet.flip(),
                entry: Some(i),
                lo,
                width,
                edges,
            });
        }
    }
    if depth_cut <= cutoff(best) {
        return Err(Error::DepthBoundExceeded(max_depth));
    }
    found.retain(|s| s.length <= cutoff(best) + 1e-12);
    found.sort_by(|a, b| a.length.total_cmp(&b.length));
    // the same segment can be reached through both copies adjacent to a seam
    let mut out: Vec<Unfolded> = Vec::new();
    for s in found {
        if !out
            .iter()
            .any(|o| (o.dir - s.dir).norm() < 1e-9 && (o.length - s.length).abs() < 1e-9)
        {
            out.push(s);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Polygon {
        Polygon::new(vec![(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]).unwrap()
    }

    #[test]
    fn over_under_diamond_closes() {
        let sq = square();
        let p = SurfacePoint::new(0.5, 0.0);
        let w = Vector2::new(1.0, 1.0).normalize();
        let tr = trace(&sq, &p, &w, 2.0 * 2f64.sqrt()).unwrap();
        assert_eq!(tr.crossings, vec![1, 2, 3]);
        assert!((tr.end.uv() - p.uv()).norm() < 1e-12);
        assert!((tr.end_dir - w).norm() < 1e-12);
        let (mid, _) = tr.at(&sq, 2f64.sqrt() / 2.0 + 0.1);
        assert_eq!(mid.sheet, Sheet::Back);
    }

    #[test]
    fn corner_hit_is_an_error() {
        let sq = square();
        let p = SurfacePoint::new(0.5, 0.5);
        let w = Vector2::new(1.0, 1.0).normalize();
        assert!(matches!(trace(&sq, &p, &w, 1.0), Err(Error::ConePointHit { .. })));
    }

    #[test]
    fn adjacent_midpoints_have_two_segments() {
        let sq = square();
        let q = SurfacePoint::new(0.5, 0.0);
        let p = SurfacePoint::new(1.0, 0.5);
        let segs = segments(&sq, &q, &p, 1e-9, f64::INFINITY, 12).unwrap();
        assert_eq!(segs.len(), 2);
        for s in &segs {
            assert!((s.length - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn opposite_sheets_go_through_nearest_edge() {
        let sq = square();
        let q = SurfacePoint::on_sheet(0.5, 0.2, Sheet::Front);
        let p = SurfacePoint::on_sheet(0.5, 0.2, Sheet::Back);
        let segs = segments(&sq, &q, &p, 1e-9, f64::INFINITY, 12).unwrap();
        assert_eq!(segs.len(), 1);
        assert!((segs[0].length - 0.4).abs() < 1e-12);
        assert_eq!(segs[0].edges, vec![0]);
    }
}
