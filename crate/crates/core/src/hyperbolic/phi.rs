use std::f64::consts::FRAC_2_PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BallPoint, BinaryDifferential, UnaryDifferential, DOMAIN_MARGIN, MAX_NORM};

/// Offset keeping the tail radii of the parametrisation away from zero.
pub const TAIL_EPS: f64 = 1e-7;

/// Learnable parameters `θ ∈ R^m` of the ball parametrisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub theta: Vec<f64>,
}

impl PhiParams {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    /// Draws every entry uniformly from `[-0.05, 0.05]`.
    pub fn init(m: usize, rng: &mut impl Rng) -> Self {
        Self::new((0..m).map(|_| rng.gen_range(-0.05..=0.05)).collect())
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

fn clamp_open(c: f64) -> (f64, bool) {
    let lim = 1.0 - DOMAIN_MARGIN;
    if c > lim {
        (lim, true)
    } else if c < -lim {
        (-lim, true)
    } else {
        (c, false)
    }
}

/// Unit vector with hyperspherical angles `angles` (length `m - 1`) and its
/// Jacobian (`m × (m-1)`).
fn unit_sphere(angles: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = angles.len() + 1;
    let sin: Vec<f64> = angles.iter().map(|a| a.sin()).collect();
    let cos: Vec<f64> = angles.iter().map(|a| a.cos()).collect();
    let mut u = vec![0.0; m];
    let mut du = DMatrix::zeros(m, m - 1);
    for j in 0..m {
        // u_j = sin a_0 ... sin a_{j-1} · cos a_j   (no cosine for the last)
        let has_cos = j < m - 1;
        let prod_sin = |skip: Option<usize>| -> f64 {
            (0..j)
                .map(|i| if Some(i) == skip { cos[i] } else { sin[i] })
                .product()
        };
        let tail = if has_cos { cos[j] } else { 1.0 };
        u[j] = prod_sin(None) * tail;
        for k in 0..j {
            du[(j, k)] = prod_sin(Some(k)) * tail;
        }
        if has_cos {
            du[(j, j)] = -prod_sin(None) * sin[j];
        }
    }
    (u, du)
}

/// Cartesian coordinates of the point with the given radius and
/// hyperspherical angles (`m - 1` of them).
pub fn spherical_to_cartesian(radius: f64, angles: &[f64]) -> Vec<f64> {
    unit_sphere(angles)
        .0
        .into_iter()
        .map(|u| radius * u)
        .collect()
}

/// Ball parametrisation `Φ(x; θ)`: hyperspherical coordinates with radius
/// `(2/π)|atan(θ_0 r_0)|` and angles `θ_k + arccos(x_{k-1} / r_{k-1})`, where
/// `r_k = sqrt(Σ_{j≥k} x_j² + ε)`.
pub fn phi(x: &[f64], params: &PhiParams) -> BallPoint {
    BallPoint::new(phi_differential(x, &params.theta).value)
}

/// `Φ` with Jacobians with respect to `x` (`d_lhs`) and `θ` (`d_rhs`).
///
/// The flag is raised when `θ_0 r_0 = 0` (the absolute value has no
/// derivative), when an `arccos` argument was clamped, or when the radius hit
/// [`MAX_NORM`]; the affected partials are zero.
pub fn phi_differential(x: &[f64], theta: &[f64]) -> BinaryDifferential {
    let m = x.len();
    assert!(m >= 1, "empty input");
    assert_eq!(m, theta.len(), "dimension mismatch");
    let mut r = vec![0.0; m];
    let mut acc = TAIL_EPS;
    for k in (0..m).rev() {
        acc += x[k] * x[k];
        r[k] = acc.sqrt();
    }

    let z = theta[0] * r[0];
    let mut clamped = z == 0.0;
    let mut radius = FRAC_2_PI * z.atan().abs();
    let mut dr_dz = if z == 0.0 {
        0.0
    } else {
        FRAC_2_PI * z.signum() / (1.0 + z * z)
    };
    if radius > MAX_NORM {
        radius = MAX_NORM;
        dr_dz = 0.0;
        clamped = true;
    }

    let mut angles = vec![0.0; m.saturating_sub(1)];
    // row k-1: ∂ angle_k / ∂x
    let mut dang_dx = DMatrix::zeros(m - 1, m);
    for k in 1..m {
        let rr = r[k - 1];
        let c = x[k - 1] / rr;
        let (cc, active) = clamp_open(c);
        angles[k - 1] = theta[k] + cc.acos();
        if active {
            clamped = true;
            continue;
        }
        let dacos = -1.0 / (1.0 - c * c).sqrt();
        let r3 = rr * rr * rr;
        for j in (k - 1)..m {
            let dc = if j == k - 1 {
                1.0 / rr - x[j] * x[j] / r3
            } else {
                -x[k - 1] * x[j] / r3
            };
            dang_dx[(k - 1, j)] = dacos * dc;
        }
    }

    let (u, du) = unit_sphere(&angles);
    let value: Vec<f64> = u.iter().map(|c| radius * c).collect();

    let mut d_theta = DMatrix::zeros(m, m);
    let mut d_x = DMatrix::zeros(m, m);
    let dr_dtheta0 = dr_dz * r[0];
    for i in 0..m {
        d_theta[(i, 0)] = u[i] * dr_dtheta0;
        for k in 1..m {
            d_theta[(i, k)] = radius * du[(i, k - 1)];
        }
        for j in 0..m {
            d_x[(i, j)] = u[i] * dr_dz * theta[0] * x[j] / r[0];
        }
    }
    if m > 1 {
        d_x += (&du * &dang_dx) * radius;
    }
    BinaryDifferential {
        value,
        d_lhs: d_x,
        d_rhs: d_theta,
        clamped,
    }
}

/// Hyperspherical chart of the ball: `(‖y‖, a_1, ..., a_{m-1})` with
/// `a_k = arccos(y_{k-1} / ‖y_{k-1..}‖)` for `k < m-1` and
/// `a_{m-1} = atan2(y_{m-1}, y_{m-2})`. Angles past a vanishing tail are 0.
pub fn chart(y: &BallPoint) -> Vec<f64> {
    chart_differential(y.coords()).value
}

/// Chart with its Jacobian. The flag is raised at coordinate singularities
/// (zero radius, vanishing tails, clamped `arccos` arguments).
pub fn chart_differential(y: &[f64]) -> UnaryDifferential {
    let m = y.len();
    let mut value = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, m);
    let mut clamped = false;
    if m == 0 {
        return UnaryDifferential {
            value,
            d_input: jac,
            clamped,
        };
    }
    let mut tail = vec![0.0; m + 1];
    for k in (0..m).rev() {
        tail[k] = tail[k + 1] + y[k] * y[k];
    }
    let radius = tail[0].sqrt();
    value[0] = radius;
    if radius > 0.0 {
        for j in 0..m {
            jac[(0, j)] = y[j] / radius;
        }
    } else {
        clamped = true;
    }
    for k in 1..m {
        if k == m - 1 {
            let (a, b) = (y[m - 2], y[m - 1]);
            let s = a * a + b * b;
            if s == 0.0 {
                clamped = true;
                continue;
            }
            value[k] = b.atan2(a);
            jac[(k, m - 2)] = -b / s;
            jac[(k, m - 1)] = a / s;
            continue;
        }
        let t = tail[k - 1].sqrt();
        if t == 0.0 {
            clamped = true;
            continue;
        }
        let c = y[k - 1] / t;
        let (cc, active) = clamp_open(c);
        value[k] = cc.acos();
        if active {
            clamped = true;
            continue;
        }
        let dacos = -1.0 / (1.0 - c * c).sqrt();
        let t3 = t * t * t;
        for j in (k - 1)..m {
            let dc = if j == k - 1 {
                1.0 / t - y[j] * y[j] / t3
            } else {
                -y[k - 1] * y[j] / t3
            };
            jac[(k, j)] = dacos * dc;
        }
    }
    UnaryDifferential {
        value,
        d_input: jac,
        clamped,
    }
}
