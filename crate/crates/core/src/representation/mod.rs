//! Learnable diagram representations and the histogram baseline.
//!
//! A representation has `K` projection bases per homology dimension. Each
//! (base, dimension) pair is a *slot* with its own `θ`; the slot embeds every
//! off-diagonal point with the shared auxiliary map `ρ`, pushes it through
//! the variant's point map and sums. Slot outputs are concatenated in
//! slot order `base * HOMOLOGY_DIMS + dim`. Under the separate-base policy
//! the first `K` bases see only finite points and the next `K` only the
//! essential ones.

mod histogram;

pub use histogram::baseline_histogram;

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyperbolic::{
    chart_differential, exp_differential, log_differential, phi_differential, rho_differential,
    HyperbolicError, PhiParams, RhoConfig,
};
use crate::persistence::{DiagramPoint, PersistenceDiagram, HOMOLOGY_DIMS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error("invalid representation parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Hyperbolic(#[from] HyperbolicError),
    #[error("upstream gradient has length {got}, expected {expected}")]
    UpstreamLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Tangent-space sum at the origin, mapped back by `exp_0`.
    Poinc,
    /// Plain sum of the ball-parametrised points.
    Hybrid,
    /// Plain sum of `ρ(x) + θ`.
    Eucl,
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poinc" | "p-poinc" => Ok(Self::Poinc),
            "hybrid" | "p-hybrid" => Ok(Self::Hybrid),
            "eucl" | "p-eucl" => Ok(Self::Eucl),
            _ => Err(format!(
                "unknown variant {s:?} (expected poinc, hybrid or eucl)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EssentialPolicy {
    /// Essential deaths become the dataset's maximal filtration value.
    #[default]
    MaxScale,
    /// Essential points (with substituted deaths) get their own bases.
    SeparateBase,
}

impl FromStr for EssentialPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max-scale" => Ok(Self::MaxScale),
            "separate-base" => Ok(Self::SeparateBase),
            _ => Err(format!(
                "unknown essential policy {s:?} (expected max-scale or separate-base)"
            )),
        }
    }
}

/// Parameters of one representation layer. The base point is the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprParams {
    pub variant: Variant,
    pub m: usize,
    pub bases: usize,
    pub essential_policy: EssentialPolicy,
    pub rho: RhoConfig,
    /// Death assigned to essential points.
    pub max_scale: f64,
    /// One entry per slot.
    pub theta: Vec<PhiParams>,
}

impl ReprParams {
    /// Builds parameters with `θ` drawn uniformly from `[-0.05, 0.05]`.
    pub fn init(
        variant: Variant,
        bases: usize,
        essential_policy: EssentialPolicy,
        rho: RhoConfig,
        max_scale: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, ReprError> {
        let m = rho.dim();
        let slots = slot_count(bases, essential_policy);
        let theta = (0..slots).map(|_| PhiParams::init(m, rng)).collect();
        Self::new(variant, bases, essential_policy, rho, max_scale, theta)
    }

    pub fn new(
        variant: Variant,
        bases: usize,
        essential_policy: EssentialPolicy,
        rho: RhoConfig,
        max_scale: f64,
        theta: Vec<PhiParams>,
    ) -> Result<Self, ReprError> {
        let m = rho.dim();
        if m < 2 {
            return Err(ReprError::InvalidParams(format!("m = {m}, need m >= 2")));
        }
        if bases == 0 {
            return Err(ReprError::InvalidParams(
                "need at least one projection base".into(),
            ));
        }
        if !max_scale.is_finite() {
            return Err(ReprError::InvalidParams(format!(
                "max_scale {max_scale} is not finite"
            )));
        }
        let slots = slot_count(bases, essential_policy);
        if theta.len() != slots || theta.iter().any(|t| t.dim() != m) {
            return Err(ReprError::InvalidParams(format!(
                "expected {slots} parameter blocks of length {m}"
            )));
        }
        Ok(Self {
            variant,
            m,
            bases,
            essential_policy,
            rho,
            max_scale,
            theta,
        })
    }

    pub fn slot_count(&self) -> usize {
        self.theta.len()
    }

    /// Length of the concatenated feature vector.
    pub fn feature_len(&self) -> usize {
        self.slot_count() * self.m
    }

    pub fn param_count(&self) -> usize {
        self.feature_len()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.theta
            .iter()
            .flat_map(|t| t.theta.iter().copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter length mismatch");
        for (t, chunk) in self.theta.iter_mut().zip(flat.chunks(self.m)) {
            t.theta.copy_from_slice(chunk);
        }
    }
}

fn slot_count(bases: usize, policy: EssentialPolicy) -> usize {
    let groups = match policy {
        EssentialPolicy::MaxScale => 1,
        EssentialPolicy::SeparateBase => 2,
    };
    bases * groups * HOMOLOGY_DIMS
}

/// Diagram split by the essential policy.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutedDiagram {
    /// Points seen by the regular bases.
    pub regular: PersistenceDiagram,
    /// Points seen by the essential bases (always empty for max-scale).
    pub essential: PersistenceDiagram,
}

/// Replaces infinite deaths by `max_scale` and routes points according to
/// `policy`. Points that land on the diagonal are dropped.
pub fn essential_substitute(
    d: &PersistenceDiagram,
    policy: EssentialPolicy,
    max_scale: f64,
) -> RoutedDiagram {
    let sub = |p: &DiagramPoint| DiagramPoint {
        death: max_scale,
        ..*p
    };
    match policy {
        EssentialPolicy::MaxScale => RoutedDiagram {
            regular: PersistenceDiagram::new(
                d.points()
                    .iter()
                    .map(|p| if p.is_essential() { sub(p) } else { *p })
                    .collect(),
            ),
            essential: PersistenceDiagram::empty(),
        },
        EssentialPolicy::SeparateBase => {
            let (ess, fin): (Vec<_>, Vec<_>) = d
                .points()
                .iter()
                .copied()
                .partition(DiagramPoint::is_essential);
            RoutedDiagram {
                regular: PersistenceDiagram::new(fin),
                essential: PersistenceDiagram::new(ess.iter().map(sub).collect()),
            }
        }
    }
}

/// Mean grid for `ρ`: `m` means on the diagonal of the observed
/// (birth, log-persistence) box of `diagrams` after max-scale substitution.
/// Degenerate axes are widened by 0.5 on each side.
pub fn rho_grid(
    diagrams: &[PersistenceDiagram],
    m: usize,
    max_scale: f64,
) -> Result<RhoConfig, ReprError> {
    let (mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut l_lo, mut l_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in diagrams {
        for p in d.points() {
            let death = if p.is_essential() { max_scale } else { p.death };
            if death <= p.birth {
                continue;
            }
            let lp = (death - p.birth).ln();
            b_lo = b_lo.min(p.birth);
            b_hi = b_hi.max(p.birth);
            l_lo = l_lo.min(lp);
            l_hi = l_hi.max(lp);
        }
    }
    if !b_lo.is_finite() {
        (b_lo, b_hi, l_lo, l_hi) = (0.0, 0.0, 0.0, 0.0);
    }
    let widen = |lo: f64, hi: f64| {
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    Ok(RhoConfig::diagonal_lattice(
        m,
        widen(b_lo, b_hi),
        widen(l_lo, l_hi),
    )?)
}

/// Representation of one diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprOutput {
    /// Per-slot sum before the chart (ball point for poinc).
    pub slots: Vec<Vec<f64>>,
    /// Chart-projected slots, concatenated.
    pub features: Vec<f64>,
    /// Whether a clamp was active anywhere in the evaluation.
    pub clamped: bool,
}

/// Representation with per-slot Jacobians of the features with respect to
/// that slot's `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprJacobian {
    pub output: ReprOutput,
    pub slot_jacobians: Vec<DMatrix<f64>>,
}

impl ReprJacobian {
    /// Vector-Jacobian product: gradient with respect to the flattened `θ`.
    /// Clamped partials contribute zero.
    pub fn vjp(&self, upstream: &[f64]) -> Result<Vec<f64>, ReprError> {
        let m = self.output.slots.first().map_or(0, Vec::len);
        let expected = self.output.features.len();
        if upstream.len() != expected {
            return Err(ReprError::UpstreamLength {
                expected,
                got: upstream.len(),
            });
        }
        let mut out = vec![0.0; expected];
        for (s, j) in self.slot_jacobians.iter().enumerate() {
            let up = &upstream[s * m..(s + 1) * m];
            for c in 0..m {
                out[s * m + c] = (0..m).map(|r| up[r] * j[(r, c)]).sum();
            }
        }
        Ok(out)
    }
}

/// Neumaier-compensated running sum of vectors.
struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    fn new(m: usize) -> Self {
        Self {
            sum: vec![0.0; m],
            comp: vec![0.0; m],
        }
    }

    fn add_scaled(&mut self, k: f64, v: &[f64]) {
        for ((s, c), x) in self.sum.iter_mut().zip(&mut self.comp).zip(v) {
            let x = k * x;
            let t = *s + x;
            if s.abs() >= x.abs() {
                *c += (*s - t) + x;
            } else {
                *c += (x - t) + *s;
            }
            *s = t;
        }
    }

    fn finish(self) -> Vec<f64> {
        self.sum
            .iter()
            .zip(&self.comp)
            .map(|(s, c)| s + c)
            .collect()
    }
}

struct SlotEval {
    raw: Vec<f64>,
    features: Vec<f64>,
    jac: DMatrix<f64>,
    clamped: bool,
}

fn sorted_points(d: &PersistenceDiagram, dim: usize) -> Vec<&DiagramPoint> {
    let mut pts: Vec<&DiagramPoint> = d
        .in_dim(dim)
        .filter(|p| p.death > p.birth && p.multiplicity > 0)
        .collect();
    pts.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.death.total_cmp(&b.death))
            .then(a.multiplicity.cmp(&b.multiplicity))
    });
    pts
}

fn eval_slot(
    points: &[&DiagramPoint],
    theta: &[f64],
    p: &ReprParams,
    want_jac: bool,
) -> Result<SlotEval, ReprError> {
    let m = p.m;
    let mut clamped = false;
    let mut acc = CompensatedSum::new(m);
    let mut jac = DMatrix::zeros(m, m);
    let mut total_mult = 0.0;
    let origin = vec![0.0; m];
    for pt in points {
        let k = pt.multiplicity as f64;
        total_mult += k;
        let x = rho_differential(pt.birth, pt.death, &p.rho)?.value;
        match p.variant {
            Variant::Eucl => {
                let y: Vec<f64> = x.iter().zip(theta).map(|(a, b)| a + b).collect();
                acc.add_scaled(k, &y);
            }
            Variant::Hybrid => {
                let ph = phi_differential(&x, theta);
                clamped |= ph.clamped;
                acc.add_scaled(k, &ph.value);
                if want_jac {
                    jac += ph.d_rhs * k;
                }
            }
            Variant::Poinc => {
                let ph = phi_differential(&x, theta);
                let lg = log_differential(&origin, &ph.value);
                clamped |= ph.clamped || lg.clamped;
                acc.add_scaled(k, &lg.value);
                if want_jac {
                    jac += (lg.d_rhs * ph.d_rhs) * k;
                }
            }
        }
    }
    let sum = acc.finish();
    let (raw, features) = match p.variant {
        Variant::Eucl => {
            if want_jac {
                jac = DMatrix::identity(m, m) * total_mult;
            }
            (sum.clone(), sum)
        }
        Variant::Hybrid => (sum.clone(), sum),
        Variant::Poinc => {
            if points.is_empty() {
                (origin.clone(), origin)
            } else {
                let ex = exp_differential(&origin, &sum);
                let ch = chart_differential(&ex.value);
                clamped |= ex.clamped || ch.clamped;
                if want_jac {
                    jac = ch.d_input * ex.d_rhs * jac;
                }
                (ex.value, ch.value)
            }
        }
    };
    Ok(SlotEval {
        raw,
        features,
        jac,
        clamped,
    })
}

fn evaluate(
    d: &PersistenceDiagram,
    p: &ReprParams,
    want_jac: bool,
) -> Result<ReprJacobian, ReprError> {
    let routed = essential_substitute(d, p.essential_policy, p.max_scale);
    fn per_dim(g: &PersistenceDiagram) -> Vec<Vec<&DiagramPoint>> {
        (0..HOMOLOGY_DIMS)
            .map(|dim| sorted_points(g, dim))
            .collect()
    }
    let regular = per_dim(&routed.regular);
    let essential = per_dim(&routed.essential);

    let mut slots = Vec::with_capacity(p.slot_count());
    let mut features = Vec::with_capacity(p.feature_len());
    let mut jacs = Vec::with_capacity(p.slot_count());
    let mut clamped = false;
    for s in 0..p.slot_count() {
        let base = s / HOMOLOGY_DIMS;
        let dim = s % HOMOLOGY_DIMS;
        let pts = if base < p.bases {
            &regular[dim]
        } else {
            &essential[dim]
        };
        let ev = eval_slot(pts, &p.theta[s].theta, p, want_jac)?;
        clamped |= ev.clamped;
        slots.push(ev.raw);
        features.extend_from_slice(&ev.features);
        jacs.push(ev.jac);
    }
    Ok(ReprJacobian {
        output: ReprOutput {
            slots,
            features,
            clamped,
        },
        slot_jacobians: jacs,
    })
}

/// One diagram point as seen by one slot: the point after essential
/// substitution, `ρ` of it and its image under that slot's `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointImage {
    pub slot: usize,
    pub point: DiagramPoint,
    pub rho: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Every (point, slot) pair that contributes to the representation of `d`,
/// in evaluation order. For plotting.
pub fn point_images(d: &PersistenceDiagram, p: &ReprParams) -> Result<Vec<PointImage>, ReprError> {
    let routed = essential_substitute(d, p.essential_policy, p.max_scale);
    let mut out = Vec::new();
    for s in 0..p.slot_count() {
        let group = if s / HOMOLOGY_DIMS < p.bases {
            &routed.regular
        } else {
            &routed.essential
        };
        for pt in sorted_points(group, s % HOMOLOGY_DIMS) {
            let rho = rho_differential(pt.birth, pt.death, &p.rho)?.value;
            let phi = phi_differential(&rho, &p.theta[s].theta).value;
            out.push(PointImage {
                slot: s,
                point: *pt,
                rho,
                phi,
            });
        }
    }
    Ok(out)
}

/// Forward representation of `d`.
pub fn represent(d: &PersistenceDiagram, p: &ReprParams) -> Result<ReprOutput, ReprError> {
    Ok(evaluate(d, p, false)?.output)
}

/// Forward representation together with per-slot Jacobians. Clamped
/// evaluations are allowed and contribute zero partials.
pub fn represent_jacobian(
    d: &PersistenceDiagram,
    p: &ReprParams,
) -> Result<ReprJacobian, ReprError> {
    evaluate(d, p, true)
}

/// Gradient of `upstreamᵀ · features` with respect to the flattened `θ`.
/// Fails when the evaluation point is not differentiable.
pub fn represent_grad(
    d: &PersistenceDiagram,
    p: &ReprParams,
    upstream: &[f64],
) -> Result<Vec<f64>, ReprError> {
    let j = evaluate(d, p, true)?;
    if j.output.clamped {
        return Err(HyperbolicError::NonDifferentiable("represent").into());
    }
    j.vjp(upstream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::{chart, exp_map, log_map, phi, rho, BallPoint, TangentVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(variant: Variant, bases: usize, policy: EssentialPolicy, seed: u64) -> ReprParams {
        let rho = RhoConfig::diagonal_lattice(3, (0.0, 2.0), (-1.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ReprParams::init(variant, bases, policy, rho, 3.0, &mut rng).unwrap();
        // keep θ_0 well away from zero so nothing is clamped
        for t in &mut p.theta {
            t.theta[0] = 0.3 + t.theta[0];
        }
        p
    }

    fn sample_diagram() -> PersistenceDiagram {
        PersistenceDiagram::new(vec![
            DiagramPoint::new(0, 0.0, 1.0).with_multiplicity(2),
            DiagramPoint::new(0, 0.5, 1.7),
            DiagramPoint::essential(0, 0.0),
            DiagramPoint::new(1, 1.0, 2.0),
            DiagramPoint::new(1, 1.2, 1.3),
        ])
    }

    #[test]
    fn empty_diagram_gives_origin() {
        for v in [Variant::Poinc, Variant::Hybrid, Variant::Eucl] {
            let p = params(v, 2, EssentialPolicy::MaxScale, 1);
            let out = represent(&PersistenceDiagram::empty(), &p).unwrap();
            assert_eq!(out.features, vec![0.0; p.feature_len()]);
            let g = represent_grad(
                &PersistenceDiagram::empty(),
                &p,
                &vec![1.0; p.feature_len()],
            );
            assert_eq!(g.unwrap(), vec![0.0; p.param_count()]);
        }
    }

    #[test]
    fn point_images_sum_to_hybrid_slots() {
        for policy in [EssentialPolicy::MaxScale, EssentialPolicy::SeparateBase] {
            let p = params(Variant::Hybrid, 2, policy, 4);
            let d = sample_diagram();
            let out = represent(&d, &p).unwrap();
            let mut sums = vec![vec![0.0; p.m]; p.slot_count()];
            for img in point_images(&d, &p).unwrap() {
                assert_eq!(img.point.dim, img.slot % HOMOLOGY_DIMS);
                assert!(!img.point.is_essential());
                for (s, y) in sums[img.slot].iter_mut().zip(&img.phi) {
                    *s += img.point.multiplicity as f64 * y;
                }
            }
            for (a, b) in sums.iter().flatten().zip(out.slots.iter().flatten()) {
                assert!((a - b).abs() < 1e-12, "{policy:?}");
            }
        }
    }

    #[test]
    fn single_point_is_phi_of_rho() {
        let p = params(Variant::Poinc, 1, EssentialPolicy::MaxScale, 2);
        let d = PersistenceDiagram::new(vec![DiagramPoint::new(0, 0.3, 1.1)]);
        let out = represent(&d, &p).unwrap();
        let y = phi(&rho(0.3, 1.1, &p.rho).unwrap(), &p.theta[0]);
        for (a, b) in out.slots[0].iter().zip(y.coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        let c = chart(&y);
        for (a, b) in out.features[..3].iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
        // H1 slot is empty
        assert_eq!(out.slots[1], vec![0.0; 3]);
    }

    #[test]
    fn doubled_point_extends_the_geodesic() {
        let p = params(Variant::Poinc, 1, EssentialPolicy::MaxScale, 3);
        let d = PersistenceDiagram::new(vec![DiagramPoint::new(0, 0.3, 1.1).with_multiplicity(2)]);
        let out = represent(&d, &p).unwrap();
        let o = BallPoint::origin(3);
        let y = phi(&rho(0.3, 1.1, &p.rho).unwrap(), &p.theta[0]);
        let v: Vec<f64> = log_map(&o, &y)
            .components()
            .iter()
            .map(|c| 2.0 * c)
            .collect();
        let expected = exp_map(&TangentVector::new(o, v));
        for (a, b) in out.slots[0].iter().zip(expected.coords()) {
            assert!((a - b).abs() < 1e-14);
        }
        // same direction, larger hyperbolic radius
        let r1 = y.norm();
        let r2 = expected.norm();
        assert!((r2.atanh() - 2.0 * r1.atanh()).abs() < 1e-12);
    }

    #[test]
    fn eucl_with_zero_theta_is_sum_of_rho() {
        let mut p = params(Variant::Eucl, 1, EssentialPolicy::MaxScale, 4);
        p.set_params_flat(&vec![0.0; p.param_count()]);
        let d = sample_diagram();
        let out = represent(&d, &p).unwrap();
        let mut expected = vec![0.0; 3];
        for q in d.in_dim(0) {
            let death = if q.is_essential() { 3.0 } else { q.death };
            for (e, r) in expected
                .iter_mut()
                .zip(rho(q.birth, death, &p.rho).unwrap())
            {
                *e += q.multiplicity as f64 * r;
            }
        }
        for (a, b) in out.features[..3].iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn eucl_gradient_is_multiplicity_times_upstream() {
        let p = params(Variant::Eucl, 1, EssentialPolicy::MaxScale, 5);
        let d = PersistenceDiagram::new(vec![DiagramPoint::new(1, 0.2, 0.9)]);
        let up = vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6];
        let g = represent_grad(&d, &p, &up).unwrap();
        assert_eq!(&g[..3], &[0.0; 3]);
        assert_eq!(&g[3..], &up[3..]);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let d = sample_diagram();
        for (seed, v) in [Variant::Poinc, Variant::Hybrid, Variant::Eucl]
            .into_iter()
            .enumerate()
        {
            for policy in [EssentialPolicy::MaxScale, EssentialPolicy::SeparateBase] {
                let p = params(v, 2, policy, 10 + seed as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
                let up: Vec<f64> = (0..p.feature_len())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                let g = represent_grad(&d, &p, &up).unwrap();
                let base = p.params_flat();
                let h = 1e-6;
                for i in 0..base.len() {
                    let f = |delta: f64| {
                        let mut q = p.clone();
                        let mut t = base.clone();
                        t[i] += delta;
                        q.set_params_flat(&t);
                        let out = represent(&d, &q).unwrap();
                        out.features
                            .iter()
                            .zip(&up)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                    };
                    let fd = (f(h) - f(-h)) / (2.0 * h);
                    let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-5);
                    assert!(err < 1e-4, "{v:?} {policy:?} param {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn separate_base_routes_essentials() {
        let p = params(Variant::Hybrid, 1, EssentialPolicy::SeparateBase, 6);
        assert_eq!(p.slot_count(), 4);
        let d = PersistenceDiagram::new(vec![DiagramPoint::essential(0, 0.5)]);
        let out = represent(&d, &p).unwrap();
        assert_eq!(out.slots[0], vec![0.0; 3]);
        assert!(out.slots[2].iter().any(|c| *c != 0.0));
        let r = essential_substitute(&d, EssentialPolicy::SeparateBase, 3.0);
        assert!(r.regular.is_empty());
        assert_eq!(r.essential.points()[0].death, 3.0);
    }

    #[test]
    fn substitution_examples() {
        let d = PersistenceDiagram::new(vec![DiagramPoint::new(0, 0.0, 1.0)]);
        let r = essential_substitute(&d, EssentialPolicy::MaxScale, 5.0);
        assert_eq!(r.regular, d);
        let d = PersistenceDiagram::new(vec![
            DiagramPoint::essential(0, 50.0),
            DiagramPoint::essential(0, 10.0),
        ]);
        let r = essential_substitute(&d, EssentialPolicy::MaxScale, 90.0);
        assert!(r.regular.points().iter().all(|p| p.death == 90.0));
    }

    #[test]
    fn essential_norm_grows_with_theta0() {
        let mut p = params(Variant::Poinc, 1, EssentialPolicy::SeparateBase, 7);
        let d = PersistenceDiagram::new(vec![DiagramPoint::essential(0, 0.5)]);
        let mut last = 0.0;
        for k in 0..40 {
            p.theta[2].theta[0] = 0.1 * 1.3f64.powi(k);
            let n = represent(&d, &p).unwrap().features[2 * 3];
            assert!(n >= last);
            last = n;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn rho_grid_covers_observed_points() {
        let d = sample_diagram();
        let cfg = rho_grid(&[d], 4, 3.0).unwrap();
        let (b0, l0) = cfg.means()[0];
        let (b3, l3) = cfg.means()[3];
        assert_eq!((b0, b3), (0.0, 1.2));
        assert!((l0 - 0.1f64.ln()).abs() < 1e-12 && (l3 - 3f64.ln()).abs() < 1e-12);
        assert!(rho_grid(&[], 3, 1.0).is_ok());
    }

    fn arb_diagram() -> impl Strategy<Value = Vec<DiagramPoint>> {
        proptest::collection::vec(
            (0usize..2, 0.0f64..2.0, 0.01f64..2.0, 1usize..3, 0u8..6),
            0..12,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(dim, b, p, k, e)| {
                    let death = if e == 0 { f64::INFINITY } else { b + p };
                    DiagramPoint::new(dim, b, death).with_multiplicity(k)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn permutation_invariant(pts in arb_diagram(), seed in 0u64..1000) {
            let p = params(Variant::Poinc, 2, EssentialPolicy::MaxScale, seed);
            let a = represent(&PersistenceDiagram::new(pts.clone()), &p).unwrap();
            let mut rev = pts;
            rev.reverse();
            let b = represent(&PersistenceDiagram::new(rev), &p).unwrap();
            prop_assert_eq!(a.features, b.features);
        }

        #[test]
        fn multiplicity_matches_copies(pts in arb_diagram()) {
            let p = params(Variant::Poinc, 1, EssentialPolicy::MaxScale, 9);
            let d = PersistenceDiagram::new(pts.clone());
            let copies = PersistenceDiagram::new(pts.iter().flat_map(|q| {
                std::iter::repeat(q.with_multiplicity(1)).take(q.multiplicity)
            }).collect());
            let a = represent(&d, &p).unwrap();
            let b = represent(&copies, &p).unwrap();
            for (x, y) in a.features.iter().zip(&b.features) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn diagonal_points_change_nothing(pts in arb_diagram(), c in 0.0f64..3.0) {
            let p = params(Variant::Poinc, 1, EssentialPolicy::MaxScale, 11);
            let d = PersistenceDiagram::new(pts.clone());
            let mut with = d.clone();
            with.push(DiagramPoint::new(0, c, c));
            with.push(DiagramPoint::new(1, c, c));
            prop_assert_eq!(represent(&d, &p).unwrap(), represent(&with, &p).unwrap());
        }
    }
}
