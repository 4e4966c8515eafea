//! Dormand–Prince 5(4) stepper with embedded error control.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
}

#[cfg(test)]
impl Tolerance {
    pub fn new(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            h_max: 0.05,
        }
    }
}

/// One Dormand–Prince step; returns the 5th-order solution and the scaled
/// error norm.
pub(crate) fn step<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    y: &[f64; N],
    h: f64,
    tol: &Tolerance,
) -> ([f64; N], f64) {
    let mut k = [[0.0; N]; 7];
    k[0] = f(y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(&ys);
    }
    let mut out = *y;
    let mut err: f64 = 0.0;
    for i in 0..N {
        let mut acc = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            acc += B[s] * k[s][i];
            e += E[s] * k[s][i];
        }
        out[i] += h * acc;
        let scale = tol.atol + tol.rtol * y[i].abs().max(out[i].abs());
        err = err.max((h * e).abs() / scale);
    }
    (out, err)
}

/// Integrates an autonomous system over `[0, t_end]`. `project` is applied
/// after every accepted step; `observe(t0, y0, t1, y1)` sees each accepted
/// step and may stop the integration early.
pub(crate) fn integrate<const N: usize>(
    f: impl Fn(&[f64; N]) -> [f64; N],
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerance,
    project: impl Fn(&mut [f64; N]),
    mut observe: impl FnMut(f64, &[f64; N], f64, &[f64; N]) -> ControlFlow<()>,
) -> Result<(f64, [f64; N])> {
    let mut t = 0.0;
    let mut y = y0;
    if t_end <= 0.0 {
        return Ok((0.0, y));
    }
    let mut h = (0.01_f64).min(t_end).min(tol.h_max);
    let mut rejects = 0usize;
    while t < t_end {
        let last = t + h >= t_end * (1.0 - 1e-15);
        let hh = if last { t_end - t } else { h };
        let (mut y1, err) = step(&f, &y, hh, tol);
        if !err.is_finite() || y1.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegratorFailure("non-finite state".into()));
        }
        if err <= 1.0 {
            project(&mut y1);
            let t1 = if last { t_end } else { t + hh };
            let flow = observe(t, &y, t1, &y1);
            t = t1;
            y = y1;
            if flow.is_break() {
                return Ok((t, y));
            }
            rejects = 0;
        } else {
            rejects += 1;
            if rejects > 60 {
                return Err(Error::IntegratorFailure("step size underflow".into()));
            }
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (hh * fac).min(tol.h_max);
        if h < 1e-14 {
            return Err(Error::IntegratorFailure("step size underflow".into()));
        }
    }
    Ok((t, y))
}

/// Advances by `h` using as many sub-steps as the tolerance requires.
pub(crate) fn advance<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    y: &[f64; N],
    h: f64,
    tol: &Tolerance,
    project: &impl Fn(&mut [f64; N]),
) -> Result<[f64; N]> {
    if h == 0.0 {
        return Ok(*y);
    }
    let (_, y1) = integrate(f, *y, h, tol, project, |_, _, _, _| ControlFlow::Continue(()))?;
    Ok(y1)
}
