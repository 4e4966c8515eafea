//! Experiments on the oblate ellipsoid family `x² + y² + z²/c² = 1`: the
//! equator cut distance, the strict 1/3 threshold `c₀`, persistence of
//! balanced classes and the blow-up of the minimal k.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::ops::ControlFlow;

use nalgebra::Vector2;
use serde::Serialize;

use crate::classify::{is_k_geodesic, minimal_k_with, KOptions, MinimalK, Verdict};
use crate::energy::{build_class, ClassOutcome, TuplePoint, COLLAPSE_DIST};
use crate::error::{Error, Result};
use crate::export::{num, Svg};
use crate::geodesic::{self, first_conjugate, initial_state, rhs, ClosedGeodesic, State};
use crate::ode::{self, Tolerance};
use crate::surfaces::{Spheroid, SurfaceModel, SurfacePoint};

const SHOOT_TOL: Tolerance = Tolerance {
    rtol: 1e-12,
    atol: 1e-12,
    h_max: 0.05,
};

/// First return of the geodesic leaving the equator point `(π/2, 0)` at
/// angle `alpha` above the equator: (longitude, length).
fn first_return(sph: &Spheroid, alpha: f64) -> Result<Option<(f64, f64)>> {
    let p = SurfacePoint::new(FRAC_PI_2, 0.0);
    let y0 = initial_state(sph, &p, &Vector2::new(-alpha.sin(), alpha.cos()));
    let mut bracket: Option<(f64, State)> = None;
    ode::integrate(
        rhs(sph),
        y0,
        TAU,
        &SHOOT_TOL,
        geodesic::project(sph),
        |t0, a, _t1, b| {
            if t0 > 0.0 && a[2] > 0.0 && b[2] <= 0.0 {
                bracket = Some((t0, *a));
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        },
    )?;
    let Some((t0, y)) = bracket else { return Ok(None) };
    // Newton on z(s) = 0 with dz/ds = v_z
    let mut ds = 0.0;
    let mut cur = y;
    for _ in 0..20 {
        let step = -cur[2] / cur[5];
        ds += step;
        cur = geodesic::flow(sph, &y, ds, &SHOOT_TOL)?;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let lambda = cur[1].atan2(cur[0]).rem_euclid(TAU);
    Ok(Some((lambda, t0 + ds)))
}

/// Arc length along the equator of `c` at which the equatorial arc stops
/// minimizing.
///
/// Symmetric shooting: every geodesic leaving the equator at angle `α`
/// meets it again at longitude `λ(α)` after length `ℓ(α)`; the equator is
/// not minimizing past `λ(α)` whenever `ℓ(α) ≤ λ(α)`. The infimum over `α`
/// is taken on a geometric grid with golden refinement, together with the
/// limit `α → 0`, which is the first conjugate point along the equator.
pub fn equator_cut_distance(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("c = {c} must lie in (0, 1)")));
    }
    let surface = SurfaceModel::ellipsoid(c)?;
    let sph = surface.spheroid().unwrap();
    let p = SurfacePoint::new(FRAC_PI_2, 0.0);
    let conj = first_conjugate(&surface, &p, &Vector2::new(0.0, 1.0), PI + 0.1)?.unwrap_or(PI);
    let mut best = conj.min(PI);
    let n = 40;
    let (lo, hi) = (1e-5f64.ln(), FRAC_PI_2.ln());
    let alphas: Vec<f64> = (0..n).map(|j| (lo + (hi - lo) * j as f64 / (n - 1) as f64).exp()).collect();
    let mut vals = Vec::with_capacity(n);
    for &a in &alphas {
        let v = match first_return(&sph, a)? {
            Some((lam, len)) if len <= lam + 1e-12 && lam <= PI + 1e-12 => lam,
            _ => f64::INFINITY,
        };
        vals.push(v);
    }
    for j in 1..n - 1 {
        if vals[j].is_finite() && vals[j] <= vals[j - 1] && vals[j] <= vals[j + 1] {
            // interior minimum: golden refinement in log α
            let (mut a, mut b) = (alphas[j - 1].ln(), alphas[j + 1].ln());
            let f = |x: f64| -> Result<f64> {
                Ok(match first_return(&sph, x.exp())? {
                    Some((lam, len)) if len <= lam + 1e-12 => lam,
                    _ => f64::INFINITY,
                })
            };
            let r = (5f64.sqrt() - 1.0) / 2.0;
            for _ in 0..30 {
                let c1 = b - r * (b - a);
                let d1 = a + r * (b - a);
                if f(c1)? < f(d1)? {
                    b = d1;
                } else {
                    a = c1;
                }
            }
            best = best.min(f(0.5 * (a + b))?).min(vals[j]);
        }
    }
    best = vals.iter().copied().fold(best, f64::min);
    Ok(best)
}

/// Bisection for `cutdist(c) = 2π/3` to a bracket width below `1e-5`.
pub fn find_c0(bracket: (f64, f64)) -> Result<f64> {
    find_threshold(bracket, 3)
}

/// Parameter at which the equator becomes a strict 1/k-geodesic.
pub fn find_threshold(bracket: (f64, f64), k: usize) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    let target = TAU / k as f64;
    if !(lo < hi) || equator_cut_distance(lo)? >= target || equator_cut_distance(hi)? <= target {
        return Err(Error::BadBracket { lo, hi });
    }
    while hi - lo >= 1e-5 {
        let mid = 0.5 * (lo + hi);
        if equator_cut_distance(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub c: f64,
    pub cutdist: f64,
    pub equator_length: f64,
    pub verdict: Option<Verdict>,
    pub minimal_k: Option<MinimalK>,
    pub class_found: Option<bool>,
    pub smooth_class: Option<bool>,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str = "c,cutdist,equator_length,verdict,minimal_k,class_found,smooth_class";

    pub fn csv_row(&self) -> String {
        let opt = |b: Option<bool>| b.map_or("na".to_string(), |b| b.to_string());
        format!(
            "{},{},{},{},{},{},{}",
            num(self.c),
            num(self.cutdist),
            num(self.equator_length),
            self.verdict.map_or("na".to_string(), |v| format!("{v:?}")),
            match &self.minimal_k {
                Some(MinimalK::Found(k)) => k.to_string(),
                Some(MinimalK::NotFound(k)) => format!("NotFound({k})"),
                None => "na".into(),
            },
            opt(self.class_found),
            opt(self.smooth_class)
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub k: usize,
    pub k_max: usize,
    pub verdicts: bool,
    pub minimal_k: bool,
    pub classes: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            k: 3,
            k_max: 64,
            verdicts: true,
            minimal_k: false,
            classes: false,
        }
    }
}

/// One record per parameter value, ordered as given.
pub fn sweep_table(cs: &[f64], opts: &SweepOptions) -> Result<Vec<SweepRecord>> {
    use rayon::prelude::*;
    cs.par_iter()
        .map(|&c| {
            let surface = SurfaceModel::ellipsoid(c)?;
            let cutdist = equator_cut_distance(c)?;
            let eq = ClosedGeodesic::equator(&surface)?;
            let verdict = if opts.verdicts {
                Some(is_k_geodesic(&surface, &eq, opts.k)?.verdict)
            } else {
                None
            };
            let minimal_k = if opts.minimal_k {
                Some(minimal_k_with(&surface, &eq, opts.k_max, &KOptions::default())?)
            } else {
                None
            };
            let (class_found, smooth_class) = if opts.classes {
                match build_class(&surface, &eq, opts.k)? {
                    ClassOutcome::Class(cl) => (Some(true), Some(cl.smooth())),
                    ClassOutcome::NotRotating { .. } => (Some(false), Some(false)),
                }
            } else {
                (None, None)
            };
            Ok(SweepRecord {
                c,
                cutdist,
                equator_length: eq.length(),
                verdict,
                minimal_k,
                class_found,
                smooth_class,
            })
        })
        .collect()
}

pub fn sweep_csv(records: &[SweepRecord], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str(SweepRecord::CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// Plot of the cut distance against `c` with the `2π/k` line and `c₀`.
pub fn sweep_svg(records: &[SweepRecord], k: usize, c0: Option<f64>, header: &str) -> String {
    let (cmin, cmax) = records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.c), b.max(r.c)));
    let (cmin, cmax) = if cmin < cmax { (cmin, cmax) } else { (0.0, 1.0) };
    let mut svg = Svg::new(cmin, cmax, 0.0, PI);
    svg.comment(header);
    svg.frame();
    svg.hline(TAU / k as f64, "#c00");
    if let Some(c0) = c0 {
        svg.vline(c0, "#080");
        svg.text(c0, 0.1, &format!("c0={}", num(c0)));
    }
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.c, r.cutdist)).collect();
    svg.polyline(&pts, "#1f5fbf", 2.0);
    for &(x, y) in &pts {
        svg.circle(x, y, 3.0, "#1f5fbf");
    }
    svg.text(cmin, PI, "equator cut distance vs c");
    svg.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LimitClass {
    Smooth,
    NonSmooth,
    /// The tuples collapse to a point.
    Trivial,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceRecord {
    pub c: f64,
    pub class_found: bool,
    pub smooth: bool,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceReport {
    pub records: Vec<PersistenceRecord>,
    pub limit_c: f64,
    pub limit: LimitClass,
    /// The sequence does not vary.
    pub no_variation: bool,
    /// Smooth classes along the sequence and a balanced non-smooth class at
    /// the limit.
    pub confirmed: bool,
}

fn equator_class(c: f64, k: usize) -> Result<(LimitClass, f64)> {
    let surface = SurfaceModel::ellipsoid(c)?;
    let eq = ClosedGeodesic::equator(&surface)?;
    Ok(match build_class(&surface, &eq, k)? {
        ClassOutcome::Class(cl) => {
            let x = TuplePoint::on_geodesic(&surface, &eq, k, 0.0)?;
            let e = crate::energy::uniform_energy(&surface, &x)?;
            (if cl.smooth() { LimitClass::Smooth } else { LimitClass::NonSmooth }, e)
        }
        ClassOutcome::NotRotating { .. } => (LimitClass::Missing, f64::NAN),
    })
}

/// Follows the equator class along `c_seq → c0`.
pub fn persistence_experiment(c_seq: &[f64], c0: f64, k: usize) -> Result<PersistenceReport> {
    let no_variation = c_seq.windows(2).all(|w| w[0] == w[1]);
    if c_seq.is_empty() || no_variation {
        return Ok(PersistenceReport {
            records: Vec::new(),
            limit_c: c0,
            limit: LimitClass::Missing,
            no_variation: true,
            confirmed: false,
        });
    }
    if c_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("c sequence must be strictly decreasing".into()));
    }
    let mut records = Vec::with_capacity(c_seq.len());
    for &c in c_seq {
        let (cl, energy) = equator_class(c, k)?;
        records.push(PersistenceRecord {
            c,
            class_found: cl != LimitClass::Missing,
            smooth: cl == LimitClass::Smooth,
            energy,
        });
    }
    let (limit, _) = equator_class(c0, k)?;
    let confirmed = records.iter().all(|r| r.c <= c0 || (r.class_found && r.smooth)) && limit == LimitClass::NonSmooth;
    Ok(PersistenceReport {
        records,
        limit_c: c0,
        limit,
        no_variation: false,
        confirmed,
    })
}

/// Degenerate family: round spheres of shrinking radius. The antipodal
/// 2-tuples shrink with the radius; once their spacing drops below the
/// collapse distance the limit is the trivial class.
pub fn shrinking_sphere_limit(radii: &[f64]) -> Result<PersistenceReport> {
    let mut records = Vec::new();
    let mut limit = LimitClass::Missing;
    for &r in radii {
        let s = SurfaceModel::sphere(r)?;
        let x = TuplePoint::new(&s, vec![SurfacePoint::new(FRAC_PI_2, 0.0), SurfacePoint::new(FRAC_PI_2, PI)])?;
        let d = x.distances(&s)?[0];
        let e = crate::energy::uniform_energy(&s, &x)?;
        let collapsed = d < COLLAPSE_DIST;
        records.push(PersistenceRecord {
            c: r,
            class_found: !collapsed,
            smooth: false,
            energy: e,
        });
        limit = if collapsed { LimitClass::Trivial } else { LimitClass::NonSmooth };
    }
    Ok(PersistenceReport {
        limit_c: radii.last().copied().unwrap_or(0.0),
        no_variation: radii.windows(2).all(|w| w[0] == w[1]),
        confirmed: limit == LimitClass::Trivial,
        records,
        limit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupRow {
    pub c: f64,
    pub minimal_k: MinimalK,
}

/// Minimal k of the equator along a decreasing sequence of `c`.
pub fn blowup_experiment(c_seq: &[f64], k_max: usize) -> Result<Vec<BlowupRow>> {
    if c_seq.windows(2).any(|w| w[1] >= w[0]) || c_seq.iter().any(|&c| c <= 0.0) {
        return Err(Error::InvalidArgument("c sequence must be positive and strictly decreasing".into()));
    }
    c_seq
        .iter()
        .map(|&c| {
            let surface = SurfaceModel::ellipsoid(c)?;
            let eq = ClosedGeodesic::equator(&surface)?;
            Ok(BlowupRow {
                c,
                minimal_k: minimal_k_with(&surface, &eq, k_max, &KOptions::default())?,
            })
        })
        .collect()
}

/// Non-increasing in `c` (for a decreasing sequence: non-decreasing),
/// counting `NotFound` as larger than any found value.
pub fn blowup_monotone(rows: &[BlowupRow]) -> bool {
    let key = |m: &MinimalK| match m {
        MinimalK::Found(k) => *k,
        MinimalK::NotFound(k) => k + 1,
    };
    rows.windows(2).all(|w| key(&w[1].minimal_k) >= key(&w[0].minimal_k))
}

pub fn blowup_csv(rows: &[BlowupRow], header: &str) -> String {
    let mut s = String::from(header);
    s.push_str("c,minimal_k\n");
    for r in rows {
        let k = match r.minimal_k {
            MinimalK::Found(k) => k.to_string(),
            MinimalK::NotFound(k) => format!("NotFound({k})"),
        };
        s.push_str(&format!("{},{}\n", num(r.c), k));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Jacobi equation along the equator of the spheroid `(1, 1, c)`: the
    /// curvature there is `1/c²`, so the first conjugate point sits at `πc`.
    #[test]
    fn cut_distance_is_first_conjugate_point() {
        for c in [0.3, 0.5, 0.8, 0.95] {
            let d = equator_cut_distance(c).unwrap();
            assert!((d - PI * c).abs() < 1e-7, "c={c} d={d}");
        }
    }

    #[test]
    fn symmetric_return_reaches_other_side() {
        let sph = SurfaceModel::ellipsoid(0.5).unwrap().spheroid().unwrap();
        // the meridian direction returns at the opposite longitude after half a meridian
        let (lam, len) = first_return(&sph, FRAC_PI_2).unwrap().unwrap();
        assert!((lam - PI).abs() < 1e-9);
        assert!((len - 2.0 * sph.meridian_arc(0.0, FRAC_PI_2)).abs() < 1e-9);
    }

    #[test]
    fn bad_bracket() {
        assert!(matches!(find_c0((0.8, 0.9)), Err(Error::BadBracket { .. })));
    }

    #[test]
    fn threshold_matches_jacobi_prediction() {
        let c0 = find_c0((0.2, 0.99)).unwrap();
        assert!((c0 - 2.0 / 3.0).abs() < 1e-5, "{c0}");
    }

    #[test]
    fn degenerate_sequences() {
        let r = persistence_experiment(&[0.8, 0.8], 0.7, 3).unwrap();
        assert!(r.no_variation);
        let r = shrinking_sphere_limit(&[1.0, 1e-3, 1e-8]).unwrap();
        assert_eq!(r.limit, LimitClass::Trivial);
    }
}
