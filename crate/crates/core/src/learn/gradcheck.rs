use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::Serialize;

use super::{BnMode, LearnError, Model, Sample, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckOptions {
    /// Central-difference step.
    pub step: f64,
    /// Parameters checked per group; groups that are smaller are checked
    /// completely.
    pub per_group: usize,
    /// Floor of the relative-error denominator.
    pub floor: f64,
    /// Test hook: adds 1 to the analytic gradient at this flat index.
    pub corrupt_index: Option<usize>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            per_group: 64,
            floor: 1e-6,
            corrupt_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCheck {
    pub group: String,
    pub checked: usize,
    pub max_rel_error: f64,
    /// Flat parameter index of the worst entry.
    pub worst_index: usize,
}

/// Compares the analytic gradient of the mean cross-entropy over `batch`
/// (batch norm frozen, no dropout) with central differences, group by
/// group.
pub fn gradcheck(
    model: &Model,
    batch: &[Sample],
    opts: &GradcheckOptions,
    rng: &mut impl Rng,
) -> Result<Vec<GroupCheck>, LearnError> {
    let refs: Vec<&Sample> = batch.iter().collect();
    let mut g = model
        .batch_gradient(&mut Tape::new(), &refs, BnMode::Frozen, None)?
        .grads;
    if let Some(i) = opts.corrupt_index {
        g[i] += 1.0;
    }
    let base = model.params_flat();
    let mut probe = model.clone();
    let mut params = base.clone();
    let mut out = Vec::new();
    for (name, range) in model.param_groups() {
        let len = range.len();
        let mut idx: Vec<usize> = if len <= opts.per_group {
            range.clone().collect()
        } else {
            sample_indices(rng, len, opts.per_group)
                .into_iter()
                .map(|k| range.start + k)
                .collect()
        };
        if let Some(c) = opts.corrupt_index {
            if range.contains(&c) && !idx.contains(&c) {
                idx.push(c);
            }
        }
        idx.sort_unstable();
        let mut worst = (0.0, range.start);
        for &i in &idx {
            params[i] = base[i] + opts.step;
            probe.set_params_flat(&params);
            let fp = probe.eval_loss(batch)?;
            params[i] = base[i] - opts.step;
            probe.set_params_flat(&params);
            let fm = probe.eval_loss(batch)?;
            params[i] = base[i];
            let fd = (fp - fm) / (2.0 * opts.step);
            let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(opts.floor);
            if err > worst.0 || !err.is_finite() {
                worst = (err, i);
            }
        }
        out.push(GroupCheck {
            group: name,
            checked: idx.len(),
            max_rel_error: worst.0,
            worst_index: worst.1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::model::tests::{sample, small_model};
    use crate::representation::Variant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn passes_and_catches_corruption() {
        let m = small_model(Variant::Poinc, 5);
        let batch: Vec<Sample> = (0..3).map(|i| sample(50 + i, i as usize)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let opts = GradcheckOptions {
            per_group: 16,
            ..GradcheckOptions::default()
        };
        let rep = gradcheck(&m, &batch, &opts, &mut rng).unwrap();
        assert!(rep.iter().all(|g| g.max_rel_error < 1e-3), "{rep:?}");
        assert!(rep.iter().any(|g| g.group == "theta0"));

        let theta = rep.iter().find(|g| g.group == "theta0").unwrap();
        let bad = GradcheckOptions {
            corrupt_index: Some(m.head.len() + 1),
            ..opts
        };
        let rep = gradcheck(&m, &batch, &bad, &mut rng).unwrap();
        let t = rep.iter().find(|g| g.group == "theta0").unwrap();
        assert!(t.max_rel_error > 1e-3);
        assert_eq!(t.worst_index, m.head.len() + 1);
        assert!(theta.checked > 0);
    }

    #[test]
    fn eucl_theta_gradient_is_exact_identity_pullback() {
        let m = small_model(Variant::Eucl, 6);
        let batch: Vec<Sample> = (0..2).map(|i| sample(60 + i, i as usize)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rep = gradcheck(&m, &batch, &GradcheckOptions::default(), &mut rng).unwrap();
        let t = rep.iter().find(|g| g.group == "theta0").unwrap();
        assert!(t.max_rel_error < 1e-6);
    }
}
