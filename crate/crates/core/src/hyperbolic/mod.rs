//! Poincaré-ball primitives with analytic derivatives.
//!
//! Points live strictly inside the unit ball; every constructor and every
//! operation that can leave it re-projects onto the ball of radius
//! [`MAX_NORM`]. Derivative routines return a `*Differential` carrying the
//! value, the Jacobians and a `clamped` flag. When a clamp was active the
//! affected Jacobian entries are zero (sub-gradient convention) and
//! [`BinaryDifferential::strict`] turns the flag into an error.

mod ball;
mod phi;
mod rho;

pub use ball::{
    ball_distance, ball_distance_grad, exp_differential, exp_map, log_differential, log_map,
    mobius_add, mobius_add_raw, mobius_differential,
};
pub use phi::{
    chart, chart_differential, phi, phi_differential, spherical_to_cartesian, PhiParams,
};
pub use rho::{rho, rho_differential, RhoConfig};

use nalgebra::DMatrix;
use thiserror::Error;

/// Distance kept between points and the unit sphere.
pub const BALL_EPS: f64 = 1e-6;
/// Largest admissible Euclidean norm of a [`BallPoint`].
pub const MAX_NORM: f64 = 1.0 - BALL_EPS;
/// Margin keeping `arccos`/`artanh` arguments inside their open domains.
pub const DOMAIN_MARGIN: f64 = 1e-12;
/// Below this Euclidean norm a tangent vector counts as zero.
pub const ZERO_NORM: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperbolicError {
    #[error("{0}: evaluation point is not differentiable (a clamp is active)")]
    NonDifferentiable(&'static str),
    #[error("diagram point ({birth}, {death}) is not a valid finite point")]
    InvalidPoint { birth: f64, death: f64 },
    #[error("auxiliary transformation means must be distinct; {0} repeats")]
    DuplicateMean(usize),
    #[error("auxiliary transformation needs at least one mean")]
    NoMeans,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// A point strictly inside the unit ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint(Vec<f64>);

impl BallPoint {
    /// Wraps `coords`, projecting onto the ball of radius [`MAX_NORM`] when
    /// they lie outside it. Coordinates must be finite.
    pub fn new(coords: Vec<f64>) -> Self {
        Self::clamped(coords).0
    }

    /// Like [`BallPoint::new`], also reporting whether projection happened.
    pub fn clamped(mut coords: Vec<f64>) -> (Self, bool) {
        debug_assert!(
            coords.iter().all(|c| c.is_finite()),
            "non-finite ball point"
        );
        let n = norm_sq(&coords).sqrt();
        let clamped = n > MAX_NORM;
        if clamped {
            let s = MAX_NORM / n;
            coords.iter_mut().for_each(|c| *c *= s);
        }
        (Self(coords), clamped)
    }

    pub fn origin(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    /// `λ_x = 2 / (1 - ‖x‖²)`.
    pub fn conformal_factor(&self) -> f64 {
        2.0 / (1.0 - norm_sq(&self.0))
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }
}

/// A vector in the tangent space at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: BallPoint,
    components: Vec<f64>,
}

impl TangentVector {
    pub fn new(base: BallPoint, components: Vec<f64>) -> Self {
        assert_eq!(base.dim(), components.len(), "dimension mismatch");
        debug_assert!(components.iter().all(|c| c.is_finite()));
        Self { base, components }
    }

    pub fn zero(base: BallPoint) -> Self {
        let m = base.dim();
        Self::new(base, vec![0.0; m])
    }

    pub fn base(&self) -> &BallPoint {
        &self.base
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn into_components(self) -> Vec<f64> {
        self.components
    }

    pub fn euclidean_norm(&self) -> f64 {
        norm_sq(&self.components).sqrt()
    }

    /// Norm induced by the metric at the base point, `λ_x ‖v‖`.
    pub fn metric_norm(&self) -> f64 {
        self.base.conformal_factor() * self.euclidean_norm()
    }
}

/// Value and Jacobians of a two-argument map.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDifferential {
    pub value: Vec<f64>,
    /// Jacobian with respect to the first argument.
    pub d_lhs: DMatrix<f64>,
    /// Jacobian with respect to the second argument.
    pub d_rhs: DMatrix<f64>,
    pub clamped: bool,
}

impl BinaryDifferential {
    pub fn strict(self, op: &'static str) -> Result<Self, HyperbolicError> {
        if self.clamped {
            Err(HyperbolicError::NonDifferentiable(op))
        } else {
            Ok(self)
        }
    }
}

/// Value and Jacobian of a one-argument map.
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryDifferential {
    pub value: Vec<f64>,
    pub d_input: DMatrix<f64>,
    pub clamped: bool,
}

impl UnaryDifferential {
    pub fn strict(self, op: &'static str) -> Result<Self, HyperbolicError> {
        if self.clamped {
            Err(HyperbolicError::NonDifferentiable(op))
        } else {
            Ok(self)
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use nalgebra::DMatrix;

    /// Central finite-difference Jacobian of `f` at `x`.
    pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
        let rows = f(x).len();
        let mut j = DMatrix::zeros(rows, x.len());
        let mut xp = x.to_vec();
        for k in 0..x.len() {
            xp[k] = x[k] + h;
            let fp = f(&xp);
            xp[k] = x[k] - h;
            let fm = f(&xp);
            xp[k] = x[k];
            for r in 0..rows {
                j[(r, k)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    /// Max entrywise relative error with an absolute floor.
    pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-5))
            .fold(0.0, f64::max)
    }
}
