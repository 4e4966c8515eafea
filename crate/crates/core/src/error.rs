use thiserror::Error;

use crate::energy::ConeDegenerate;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("query at cone point ({u}, {v})")]
    ConePointQuery { u: f64, v: f64 },
    #[error("point ({u}, {v}) cannot be placed in the chart domain")]
    OutOfChart { u: f64, v: f64 },
    /// Chart basis degenerates (poles of the colatitude/longitude chart).
    #[error("chart basis is singular at ({u}, {v})")]
    ChartSingular { u: f64, v: f64 },
    #[error("zero tangent vector")]
    ZeroVector,
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("geodesic hits a cone point at arc length {at}")]
    ConePointHit { at: f64 },
    #[error("integrator failure: {0}")]
    IntegratorFailure(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("degenerate jacobian")]
    DegenerateJacobian,
    #[error("seed arc is not nearly closed (gap {gap:e}, angle {angle:e})")]
    SeedNotClosed { gap: f64, angle: f64 },
    #[error("unfolding depth bound {0} exceeded")]
    DepthBoundExceeded(usize),
    #[error("boundary value problem failed: {0}")]
    BvpFailure(String),
    #[error("distance not differentiable: ordinary cut point")]
    NotDifferentiable,
    #[error("gradient undefined at the base point")]
    Undefined,
    #[error("point classification inconclusive")]
    Inconclusive,
    #[error("pair ({0}, {next}) is an ordinary cut pair", next = .0 + 1)]
    OrdinaryPair(usize),
    #[error("tuple vertex is a cone point")]
    ConePointVertex(ConeDegenerate),
    #[error("{0} minimizer combinations exceed the enumeration bound")]
    EnumerationBound(usize),
    #[error("curvature hypothesis unmet: l = {length}, pi/sqrt(H) = {bound}")]
    HypothesisUnmet { length: f64, bound: f64 },
    #[error("bad bracket [{lo}, {hi}]")]
    BadBracket { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
}
