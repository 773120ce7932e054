use nalgebra::{DMatrix, DVector};

use super::{
    dot, norm_sq, BallPoint, BinaryDifferential, HyperbolicError, TangentVector, DOMAIN_MARGIN,
    ZERO_NORM,
};

/// Möbius addition without the final projection.
pub fn mobius_add_raw(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len(), "dimension mismatch");
    let xy = dot(x, y);
    let xx = norm_sq(x);
    let yy = norm_sq(y);
    let a = 1.0 + 2.0 * xy + yy;
    let b = 1.0 - xx;
    let den = 1.0 + 2.0 * xy + xx * yy;
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (a * xi + b * yi) / den)
        .collect()
}

/// `x ⊕ y`, re-projected inside the ball.
pub fn mobius_add(x: &BallPoint, y: &BallPoint) -> BallPoint {
    BallPoint::new(mobius_add_raw(x.coords(), y.coords()))
}

/// Möbius addition and its Jacobians with respect to `x` and `y`.
pub fn mobius_differential(x: &[f64], y: &[f64]) -> BinaryDifferential {
    let m = x.len();
    let xy = dot(x, y);
    let xx = norm_sq(x);
    let yy = norm_sq(y);
    let a = 1.0 + 2.0 * xy + yy;
    let b = 1.0 - xx;
    let den = 1.0 + 2.0 * xy + xx * yy;
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let raw = (&xv * a + &yv * b) / den;

    // d(num)/dx = a I + x (2y)ᵀ + y (-2x)ᵀ ;  d(den)/dx = 2y + 2‖y‖² x
    let dnum_dx =
        DMatrix::identity(m, m) * a + &xv * (&yv * 2.0).transpose() - &yv * (&xv * 2.0).transpose();
    let dden_dx = &yv * 2.0 + &xv * (2.0 * yy);
    let d_lhs = (dnum_dx - &raw * dden_dx.transpose()) / den;

    // d(num)/dy = x (2x + 2y)ᵀ + b I ;  d(den)/dy = 2x + 2‖x‖² y
    let dnum_dy = &xv * ((&xv + &yv) * 2.0).transpose() + DMatrix::identity(m, m) * b;
    let dden_dy = &xv * 2.0 + &yv * (2.0 * xx);
    let d_rhs = (dnum_dy - &raw * dden_dy.transpose()) / den;

    let (value, clamped) = BallPoint::clamped(raw.as_slice().to_vec());
    let (d_lhs, d_rhs) = if clamped {
        (DMatrix::zeros(m, m), DMatrix::zeros(m, m))
    } else {
        (d_lhs, d_rhs)
    };
    BinaryDifferential {
        value: value.into_coords(),
        d_lhs,
        d_rhs,
        clamped,
    }
}

/// Geodesic distance `arcosh(1 + 2‖x−y‖² / ((1−‖x‖²)(1−‖y‖²)))`, evaluated as
/// `2·asinh(√q)` with `q` the quotient above, which is exact for nearby
/// points.
pub fn ball_distance(x: &BallPoint, y: &BallPoint) -> f64 {
    let (q, ..) = distance_quotient(x.coords(), y.coords());
    2.0 * q.sqrt().asinh()
}

fn distance_quotient(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let ax = 1.0 - norm_sq(x);
    let ay = 1.0 - norm_sq(y);
    (diff / (ax * ay), diff, ax, ay)
}

/// Distance and its gradients with respect to `x` and `y`. Not differentiable
/// at `x == y`.
pub fn ball_distance_grad(
    x: &BallPoint,
    y: &BallPoint,
) -> Result<(f64, Vec<f64>, Vec<f64>), HyperbolicError> {
    let (xs, ys) = (x.coords(), y.coords());
    let (q, diff, ax, ay) = distance_quotient(xs, ys);
    if q <= 0.0 {
        return Err(HyperbolicError::NonDifferentiable("ball_distance"));
    }
    let dd_dq = 1.0 / (q.sqrt() * (1.0 + q).sqrt());
    let gx = xs
        .iter()
        .zip(ys)
        .map(|(a, b)| dd_dq * (2.0 * (a - b) / (ax * ay) + diff * 2.0 * a / (ax * ax * ay)))
        .collect();
    let gy = xs
        .iter()
        .zip(ys)
        .map(|(a, b)| dd_dq * (2.0 * (b - a) / (ax * ay) + diff * 2.0 * b / (ax * ay * ay)))
        .collect();
    Ok((2.0 * q.sqrt().asinh(), gx, gy))
}

/// Exponential map `exp_x(v) = x ⊕ (tanh(λ_x‖v‖/2) v/‖v‖)`.
pub fn exp_map(v: &TangentVector) -> BallPoint {
    let value = exp_differential(v.base().coords(), v.components()).value;
    BallPoint::new(value)
}

/// Logarithmic map `log_x(y) = (2/λ_x) artanh(‖−x⊕y‖) (−x⊕y)/‖−x⊕y‖`.
pub fn log_map(x: &BallPoint, y: &BallPoint) -> TangentVector {
    let value = log_differential(x.coords(), y.coords()).value;
    TangentVector::new(x.clone(), value)
}

/// Exponential map with Jacobians with respect to the base point (`d_lhs`)
/// and the tangent vector (`d_rhs`).
pub fn exp_differential(x: &[f64], v: &[f64]) -> BinaryDifferential {
    let m = x.len();
    assert_eq!(m, v.len(), "dimension mismatch");
    let n = norm_sq(v).sqrt();
    let lambda = 2.0 / (1.0 - norm_sq(x));
    if n < ZERO_NORM {
        return BinaryDifferential {
            value: x.to_vec(),
            d_lhs: DMatrix::identity(m, m),
            d_rhs: DMatrix::identity(m, m),
            clamped: false,
        };
    }
    let s = lambda / 2.0;
    let t = (s * n).tanh();
    let sech2 = 1.0 - t * t;
    let vv = DVector::from_column_slice(v);
    let xv = DVector::from_column_slice(x);
    let g = &vv * (t / n);

    let g_v = DMatrix::identity(m, m) * (t / n)
        + &vv * vv.transpose() * ((s * sech2 * n - t) / (n * n * n));
    // dλ/dx = λ² x
    let g_x = (&vv / n) * (&xv * (lambda * lambda)).transpose() * (sech2 * n / 2.0);

    let mob = mobius_differential(x, g.as_slice());
    let d_rhs = &mob.d_rhs * g_v;
    let d_lhs = &mob.d_lhs + &mob.d_rhs * g_x;
    BinaryDifferential {
        value: mob.value,
        d_lhs: if mob.clamped {
            DMatrix::zeros(m, m)
        } else {
            d_lhs
        },
        d_rhs: if mob.clamped {
            DMatrix::zeros(m, m)
        } else {
            d_rhs
        },
        clamped: mob.clamped,
    }
}

/// Logarithmic map with Jacobians with respect to the base point (`d_lhs`)
/// and the target point (`d_rhs`).
pub fn log_differential(x: &[f64], y: &[f64]) -> BinaryDifferential {
    let m = x.len();
    assert_eq!(m, y.len(), "dimension mismatch");
    let neg_x: Vec<f64> = x.iter().map(|c| -c).collect();
    let mob = mobius_differential(&neg_x, y);
    let w = DVector::from_column_slice(&mobius_add_raw(&neg_x, y));
    let c = 1.0 - norm_sq(x);
    let xv = DVector::from_column_slice(x);
    let n = w.norm();

    let (h, dh, clamped) = if n < ZERO_NORM {
        (DVector::zeros(m), DMatrix::identity(m, m), false)
    } else if n >= 1.0 - DOMAIN_MARGIN {
        let a = (1.0 - DOMAIN_MARGIN).atanh();
        (&w * (a / n), DMatrix::zeros(m, m), true)
    } else {
        let a = n.atanh();
        let dh = DMatrix::identity(m, m) * (a / n)
            + &w * w.transpose() * ((n / (1.0 - n * n) - a) / (n * n * n));
        (&w * (a / n), dh, false)
    };
    let value = &h * c;
    let d_rhs = &dh * &mob.d_rhs * c;
    // ∂w/∂x = −(∂⊕/∂lhs) at (−x, y); ∂c/∂x = −2x
    let d_lhs = &h * (&xv * -2.0).transpose() - &dh * &mob.d_lhs * c;
    BinaryDifferential {
        value: value.as_slice().to_vec(),
        d_lhs,
        d_rhs,
        clamped: clamped || mob.clamped,
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{fd_jacobian, rel_err};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut impl Rng, m: usize, max_norm: f64) -> Vec<f64> {
        let v: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm_sq(&v).sqrt().max(1e-12);
        let r = rng.gen_range(0.0..max_norm);
        v.iter().map(|c| c / n * r).collect()
    }

    fn bp(c: &[f64]) -> BallPoint {
        BallPoint::new(c.to_vec())
    }

    #[test]
    fn mobius_identity_and_inverse() {
        let x = bp(&[0.3, -0.2, 0.5]);
        let o = BallPoint::origin(3);
        assert_eq!(mobius_add(&x, &o), x);
        let z = mobius_add(&x.neg(), &x);
        assert!(z.coords().iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn mobius_collinear_case() {
        let z = mobius_add(&bp(&[0.3, 0.0]), &bp(&[0.4, 0.0]));
        assert!((z.coords()[0] - 0.625).abs() < 1e-15);
        assert_eq!(z.coords()[1], 0.0);
    }

    #[test]
    fn distance_examples() {
        let x = bp(&[0.1, 0.7]);
        assert_eq!(ball_distance(&x, &x), 0.0);
        let d = ball_distance(&BallPoint::origin(2), &bp(&[0.5, 0.0]));
        assert!((d - 3f64.ln()).abs() < 1e-12);
        let y = bp(&[-0.4, 0.2]);
        assert_eq!(ball_distance(&x, &y), ball_distance(&y, &x));
        // arcosh form
        let lhs = ball_distance(&x, &y);
        let xs = x.coords();
        let ys = y.coords();
        let diff: f64 = xs.iter().zip(ys).map(|(a, b)| (a - b) * (a - b)).sum();
        let arg = 1.0 + 2.0 * diff / ((1.0 - norm_sq(xs)) * (1.0 - norm_sq(ys)));
        assert!((lhs - arg.acosh()).abs() < 1e-12);
    }

    #[test]
    fn distance_blows_up_at_the_boundary() {
        for eps in [1e-2, 1e-3, 1e-5] {
            let d = ball_distance(&BallPoint::origin(2), &bp(&[1.0 - eps, 0.0]));
            assert!(d >= (2.0 / eps).ln() - 1.0);
        }
    }

    #[test]
    fn exp_log_at_origin() {
        let o = BallPoint::origin(3);
        for a in [0.1, 0.5, 1.3] {
            let e = exp_map(&TangentVector::new(o.clone(), vec![a, 0.0, 0.0]));
            assert!((e.coords()[0] - a.tanh()).abs() < 1e-15);
            let l = log_map(&o, &bp(&[a.tanh(), 0.0, 0.0]));
            assert!((l.components()[0] - a).abs() < 1e-12);
        }
        let x = bp(&[0.2, 0.1, -0.3]);
        assert_eq!(exp_map(&TangentVector::zero(x.clone())), x);
        assert!(log_map(&x, &x).components().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn exp_derivative_at_origin_is_sech_squared() {
        let d = exp_differential(&[0.0, 0.0], &[0.0, 0.0]);
        assert_eq!(d.d_rhs[(0, 0)], 1.0);
        let d = exp_differential(&[0.0, 0.0], &[1e-3, 0.0]);
        let t = (1e-3f64).tanh();
        assert!((d.d_rhs[(0, 0)] - (1.0 - t * t)).abs() < 1e-9);
    }

    #[test]
    fn exp_preserves_metric_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = bp(&random_point(&mut rng, 4, 0.8));
            let v = random_point(&mut rng, 4, 0.5);
            let tv = TangentVector::new(x.clone(), v);
            let y = exp_map(&tv);
            if y.norm() > 0.99 {
                continue;
            }
            let d = ball_distance(&x, &y);
            assert!(
                (d - tv.metric_norm()).abs() < 1e-8 * (1.0 + d),
                "{d} vs {}",
                tv.metric_norm()
            );
        }
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = rng.gen_range(2..5);
            let x = random_point(&mut rng, m, 0.7);
            let y = random_point(&mut rng, m, 0.7);
            let v = random_point(&mut rng, m, 1.5);

            let d = mobius_differential(&x, &y);
            let fx = fd_jacobian(|p| mobius_add_raw(p, &y), &x, 1e-5);
            let fy = fd_jacobian(|p| mobius_add_raw(&x, p), &y, 1e-5);
            assert!(rel_err(&d.d_lhs, &fx) < 1e-6);
            assert!(rel_err(&d.d_rhs, &fy) < 1e-6);

            let d = exp_differential(&x, &v);
            if !d.clamped {
                let fx = fd_jacobian(|p| exp_differential(p, &v).value, &x, 1e-5);
                let fv = fd_jacobian(|p| exp_differential(&x, p).value, &v, 1e-5);
                assert!(rel_err(&d.d_lhs, &fx) < 1e-4, "exp dx");
                assert!(rel_err(&d.d_rhs, &fv) < 1e-4, "exp dv");
            }

            let d = log_differential(&x, &y);
            let fx = fd_jacobian(|p| log_differential(p, &y).value, &x, 1e-5);
            let fy = fd_jacobian(|p| log_differential(&x, p).value, &y, 1e-5);
            assert!(rel_err(&d.d_lhs, &fx) < 1e-4, "log dx");
            assert!(rel_err(&d.d_rhs, &fy) < 1e-4, "log dy");

            let (xb, yb) = (bp(&x), bp(&y));
            let (_, gx, gy) = ball_distance_grad(&xb, &yb).unwrap();
            let fx = fd_jacobian(|p| vec![ball_distance(&bp(p), &yb)], &x, 1e-5);
            let fy = fd_jacobian(|p| vec![ball_distance(&xb, &bp(p))], &y, 1e-5);
            assert!(rel_err(&DMatrix::from_row_slice(1, m, &gx), &fx) < 1e-4);
            assert!(rel_err(&DMatrix::from_row_slice(1, m, &gy), &fy) < 1e-4);
        }
    }

    #[test]
    fn distance_gradient_undefined_on_the_diagonal() {
        let x = bp(&[0.1, 0.2]);
        assert!(ball_distance_grad(&x, &x).is_err());
    }

    #[test]
    fn clamped_exp_reports_non_differentiable() {
        let d = exp_differential(&[0.0, 0.0], &[40.0, 0.0]);
        assert!(d.clamped);
        assert!(d.strict("exp").is_err());
    }
}
