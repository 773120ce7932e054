//! Wasserstein and bottleneck distances between persistence diagrams, and
//! the stability audit of learned representations.
//!
//! The ground metric is Euclidean. A finite point `(b, d)` may be matched to
//! the diagonal at cost `(d - b)/√2`. Essential points never meet the
//! diagonal: by default they are matched among themselves by sorted birth.

mod assignment;
mod stability;

pub use assignment::{bottleneck_assignment, hungarian};
pub use stability::{perturb, stability_audit, StabilityReport, StabilityRow};

use thiserror::Error;

use crate::persistence::{DiagramPoint, PersistenceDiagram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(
        "dimension {dim}: {left} vs {right} essential points and no finite surrogate configured"
    )]
    IncomparableEssentials {
        dim: usize,
        left: usize,
        right: usize,
    },
    #[error("order p must be >= 1, got {0}")]
    InvalidOrder(f64),
}

/// How essential points enter the distance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EssentialMode {
    /// Essential points are matched to essential points by sorted birth;
    /// differing counts are an error.
    #[default]
    ByBirth,
    /// Infinite deaths become the given value and the points are treated as
    /// ordinary finite points.
    Substitute(f64),
}

/// Euclidean distance between two diagram points.
pub fn ground_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Distance from `(b, d)` to its orthogonal projection on the diagonal.
pub fn diagonal_distance(p: (f64, f64)) -> f64 {
    (p.1 - p.0).abs() / std::f64::consts::SQRT_2
}

/// Augmented cost matrix for finite points: rows are `a` then one diagonal
/// slot per point of `b`, columns are `b` then one diagonal slot per point
/// of `a`. Every point of `a` may use any of the `a`-diagonal slots.
pub fn augmented_costs(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let (n, k) = (a.len(), b.len());
    let mut c = vec![vec![0.0; n + k]; n + k];
    for (i, &pa) in a.iter().enumerate() {
        for (j, &pb) in b.iter().enumerate() {
            c[i][j] = ground_distance(pa, pb);
        }
        let dd = diagonal_distance(pa);
        for l in 0..n {
            c[i][k + l] = dd;
        }
    }
    for (j, &pb) in b.iter().enumerate() {
        let dd = diagonal_distance(pb);
        for row in c.iter_mut().skip(n) {
            row[j] = dd;
        }
    }
    c
}

fn split(d: &PersistenceDiagram, dim: usize, mode: EssentialMode) -> (Vec<(f64, f64)>, Vec<f64>) {
    let mut finite = Vec::new();
    let mut births = Vec::new();
    for p in d.in_dim(dim) {
        let DiagramPoint {
            birth,
            death,
            multiplicity,
            ..
        } = *p;
        for _ in 0..multiplicity {
            match (p.is_essential(), mode) {
                (false, _) => finite.push((birth, death)),
                (true, EssentialMode::Substitute(m)) => finite.push((birth, m)),
                (true, EssentialMode::ByBirth) => births.push(birth),
            }
        }
    }
    births.sort_by(f64::total_cmp);
    (finite, births)
}

/// Wasserstein-`p` distance between the `dim` parts of two diagrams;
/// `p = f64::INFINITY` gives the bottleneck distance.
pub fn wasserstein(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    dim: usize,
    mode: EssentialMode,
) -> Result<f64, MetricsError> {
    if p.is_nan() || p < 1.0 {
        return Err(MetricsError::InvalidOrder(p));
    }
    let (mut fa, ea) = split(d1, dim, mode);
    let (mut fb, eb) = split(d2, dim, mode);
    // fixed argument order makes the result exactly symmetric
    let key = |v: &[(f64, f64)]| v.iter().flat_map(|&(b, d)| [b, d]).collect::<Vec<f64>>();
    let ka = key(&fa);
    let kb = key(&fb);
    let swap = ka.len() > kb.len()
        || (ka.len() == kb.len()
            && ka
                .iter()
                .zip(&kb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                == Some(std::cmp::Ordering::Greater));
    if swap {
        std::mem::swap(&mut fa, &mut fb);
    }
    if ea.len() != eb.len() {
        return Err(MetricsError::IncomparableEssentials {
            dim,
            left: ea.len(),
            right: eb.len(),
        });
    }
    let ess = ea.iter().zip(&eb).map(|(x, y)| (x - y).abs());
    let costs = augmented_costs(&fa, &fb);
    if p.is_infinite() {
        let finite = bottleneck_assignment(&costs);
        return Ok(ess.fold(finite, f64::max));
    }
    let powered: Vec<Vec<f64>> = costs
        .iter()
        .map(|r| r.iter().map(|c| c.powf(p)).collect())
        .collect();
    let (_, assignment) = hungarian(&powered);
    let mut terms: Vec<f64> = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| powered[i][j])
        .chain(ess.map(|c| c.powf(p)))
        .collect();
    terms.sort_by(f64::total_cmp);
    let total: f64 = terms.iter().sum();
    Ok(total.powf(1.0 / p))
}

/// Bottleneck distance, the `p = ∞` case of [`wasserstein`].
pub fn bottleneck(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    dim: usize,
    mode: EssentialMode,
) -> Result<f64, MetricsError> {
    wasserstein(d1, d2, f64::INFINITY, dim, mode)
}
