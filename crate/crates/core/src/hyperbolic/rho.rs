use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{HyperbolicError, UnaryDifferential};

/// Means `(μ_1, μ_2)` of the Gaussian features of the auxiliary
/// transformation: birth against log-persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoConfig {
    means: Vec<(f64, f64)>,
}

impl RhoConfig {
    pub fn new(means: Vec<(f64, f64)>) -> Result<Self, HyperbolicError> {
        if means.is_empty() {
            return Err(HyperbolicError::NoMeans);
        }
        for (i, a) in means.iter().enumerate() {
            if means[..i].contains(a) {
                return Err(HyperbolicError::DuplicateMean(i));
            }
        }
        Ok(Self { means })
    }

    /// `m` means evenly spaced on the diagonal of
    /// `[b_lo, b_hi] × [l_lo, l_hi]` (birth × log-persistence). A single mean
    /// sits at the centre.
    pub fn diagonal_lattice(
        m: usize,
        (b_lo, b_hi): (f64, f64),
        (l_lo, l_hi): (f64, f64),
    ) -> Result<Self, HyperbolicError> {
        let means = (0..m)
            .map(|k| {
                let t = if m == 1 {
                    0.5
                } else {
                    k as f64 / (m - 1) as f64
                };
                (b_lo + t * (b_hi - b_lo), l_lo + t * (l_hi - l_lo))
            })
            .collect();
        Self::new(means)
    }

    pub fn means(&self) -> &[(f64, f64)] {
        &self.means
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }
}

fn check(birth: f64, death: f64) -> Result<(), HyperbolicError> {
    if !birth.is_finite() || !death.is_finite() || death < birth {
        return Err(HyperbolicError::InvalidPoint { birth, death });
    }
    Ok(())
}

/// `ρ_i(b, d) = exp(-(b - μ_i1)² - (ln(d - b) - μ_i2)²)`; zero on the
/// diagonal.
pub fn rho(birth: f64, death: f64, cfg: &RhoConfig) -> Result<Vec<f64>, HyperbolicError> {
    Ok(rho_differential(birth, death, cfg)?.value)
}

/// `ρ` with its `m × 2` Jacobian with respect to `(birth, death)`.
pub fn rho_differential(
    birth: f64,
    death: f64,
    cfg: &RhoConfig,
) -> Result<UnaryDifferential, HyperbolicError> {
    check(birth, death)?;
    let m = cfg.dim();
    let mut value = vec![0.0; m];
    let mut jac = DMatrix::zeros(m, 2);
    let p = death - birth;
    if p == 0.0 {
        return Ok(UnaryDifferential {
            value,
            d_input: jac,
            clamped: false,
        });
    }
    let lp = p.ln();
    for (i, &(m1, m2)) in cfg.means.iter().enumerate() {
        let db = birth - m1;
        let dl = lp - m2;
        let r = (-db * db - dl * dl).exp();
        value[i] = r;
        let dl_dp = 2.0 * dl / p;
        jac[(i, 0)] = r * (-2.0 * db + dl_dp);
        jac[(i, 1)] = -r * dl_dp;
    }
    Ok(UnaryDifferential {
        value,
        d_input: jac,
        clamped: false,
    })
}
