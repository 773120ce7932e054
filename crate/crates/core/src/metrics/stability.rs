use serde::Serialize;

use super::{wasserstein, EssentialMode};
use crate::hyperbolic::{ball_distance, BallPoint};
use crate::persistence::{DiagramPoint, PersistenceDiagram, HOMOLOGY_DIMS};
use crate::representation::{represent, ReprError, ReprParams, Variant};

/// Pairs with a smaller Wasserstein distance are left out of the ratio.
pub const MIN_DISTANCE: f64 = 1e-9;

/// One (pair, homology dimension) line of the audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityRow {
    pub pair_id: usize,
    pub dim: usize,
    pub wasserstein: f64,
    /// Largest distance between corresponding slot outputs of this dimension.
    pub d_ball: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Per pair: `(w₁ summed over dimensions, d_ball max over slots)`.
    pub pairs: Vec<(f64, f64)>,
    /// Largest `d_ball / w₁` over pairs with `w₁ > MIN_DISTANCE`.
    pub max_ratio: Option<f64>,
}

fn slot_distance(variant: Variant, a: &[f64], b: &[f64]) -> f64 {
    match variant {
        Variant::Poinc => ball_distance(&BallPoint::new(a.to_vec()), &BallPoint::new(b.to_vec())),
        Variant::Hybrid | Variant::Eucl => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    }
}

/// Compares the representation of `base` with that of every diagram in
/// `perturbed`, all under the same parameters. Slot distances are
/// hyperbolic for the poinc variant and Euclidean otherwise; Wasserstein
/// distances treat essential points with the representation's own
/// max-scale substitution.
pub fn stability_audit(
    base: &PersistenceDiagram,
    perturbed: &[PersistenceDiagram],
    params: &ReprParams,
) -> Result<StabilityReport, ReprError> {
    let r0 = represent(base, params)?;
    let mode = EssentialMode::Substitute(params.max_scale);
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    let mut max_ratio: Option<f64> = None;
    for (pair_id, e) in perturbed.iter().enumerate() {
        let r1 = represent(e, params)?;
        let mut w_total = 0.0;
        let mut d_total: f64 = 0.0;
        for dim in 0..HOMOLOGY_DIMS {
            let w = wasserstein(base, e, 1.0, dim, mode)
                .expect("substituted essentials are always comparable");
            let d = (0..params.slot_count())
                .filter(|s| s % HOMOLOGY_DIMS == dim)
                .map(|s| slot_distance(params.variant, &r0.slots[s], &r1.slots[s]))
                .fold(0.0, f64::max);
            rows.push(StabilityRow {
                pair_id,
                dim,
                wasserstein: w,
                d_ball: d,
                ratio: (w > MIN_DISTANCE).then(|| d / w),
            });
            w_total += w;
            d_total = d_total.max(d);
        }
        pairs.push((w_total, d_total));
        if w_total > MIN_DISTANCE {
            let r = d_total / w_total;
            max_ratio = Some(max_ratio.map_or(r, |m| m.max(r)));
        }
    }
    Ok(StabilityReport {
        rows,
        pairs,
        max_ratio,
    })
}

/// Moves every (expanded) point of `d` by `delta · directions[i]`, cycling
/// through `directions`. Essential deaths stay infinite; points pushed onto
/// or below the diagonal disappear.
pub fn perturb(
    d: &PersistenceDiagram,
    directions: &[(f64, f64)],
    delta: f64,
) -> PersistenceDiagram {
    assert!(!directions.is_empty(), "need at least one direction");
    let pts = d
        .canonical()
        .expanded()
        .into_iter()
        .zip(directions.iter().cycle())
        .map(|(p, &(db, dd))| DiagramPoint {
            birth: p.birth + delta * db,
            death: if p.is_essential() {
                p.death
            } else {
                p.death + delta * dd
            },
            ..p
        })
        .collect();
    PersistenceDiagram::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::{PhiParams, RhoConfig};
    use crate::representation::EssentialPolicy;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(variant: Variant, m: usize, seed: u64) -> ReprParams {
        let rho = RhoConfig::diagonal_lattice(m, (0.0, 2.0), (-1.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = (0..2)
            .map(|_| PhiParams::new((0..m).map(|_| rng.gen_range(0.2..1.0)).collect()))
            .collect();
        ReprParams::new(variant, 1, EssentialPolicy::MaxScale, rho, 4.0, theta).unwrap()
    }

    fn base() -> PersistenceDiagram {
        PersistenceDiagram::new(vec![
            DiagramPoint::new(0, 0.0, 1.0),
            DiagramPoint::new(0, 0.2, 2.5),
            DiagramPoint::essential(0, 0.0),
            DiagramPoint::new(1, 1.0, 1.8),
        ])
    }

    #[test]
    fn identical_pair_has_no_ratio() {
        let p = params(Variant::Poinc, 3, 0);
        let r = stability_audit(&base(), &[base()], &p).unwrap();
        assert_eq!(r.max_ratio, None);
        assert_eq!(r.pairs, vec![(0.0, 0.0)]);
    }

    #[test]
    fn distance_scales_linearly_for_small_perturbations() {
        let p = params(Variant::Poinc, 3, 1);
        let dirs = [(0.3, -0.7), (-0.5, 0.2), (0.9, 0.4), (0.1, 0.1)];
        let d = |delta: f64| {
            stability_audit(&base(), &[perturb(&base(), &dirs, delta)], &p)
                .unwrap()
                .pairs[0]
                .1
        };
        let (a, b) = (d(1e-3), d(5e-4));
        assert!(a > 0.0);
        assert!((a / b - 2.0).abs() < 1e-2);
    }

    #[test]
    fn rotation_by_theta_preserves_ball_distance() {
        // in two dimensions θ_1 only rotates the image; exp/log at the origin
        // and the hyperbolic metric commute with rotations
        let mut p = params(Variant::Poinc, 2, 2);
        let e = perturb(&base(), &[(0.2, 0.1)], 1e-2);
        let before = stability_audit(&base(), &[e.clone()], &p).unwrap();
        for t in &mut p.theta {
            t.theta[1] += 0.7;
        }
        let after = stability_audit(&base(), &[e], &p).unwrap();
        for (x, y) in before.rows.iter().zip(&after.rows) {
            assert!((x.d_ball - y.d_ball).abs() < 1e-12);
        }
    }

    #[test]
    fn perturb_keeps_essentials() {
        let e = perturb(&base(), &[(1.0, 1.0)], 0.1);
        assert_eq!(e.essential_count(0), 1);
        assert_eq!(e.count(0), 3);
    }
}
