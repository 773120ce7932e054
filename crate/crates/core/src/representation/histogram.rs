use crate::persistence::{PersistenceDiagram, HOMOLOGY_DIMS};

fn bin_of(v: f64, bins: usize, max_scale: f64) -> usize {
    if max_scale <= 0.0 {
        return 0;
    }
    let k = (v / (max_scale / bins as f64)).floor();
    if k < 0.0 {
        0
    } else {
        (k as usize).min(bins - 1)
    }
}

/// Histogram features: per homology dimension, the persistence histogram of
/// finite points over `[0, max_scale]`, followed (when `include_essential`)
/// by the birth histogram of essential points over the same range. Counts
/// include multiplicity; values at `max_scale` fall in the last bin.
pub fn baseline_histogram(
    d: &PersistenceDiagram,
    bins: usize,
    include_essential: bool,
    max_scale: f64,
) -> Vec<f64> {
    assert!(bins >= 1, "need at least one bin");
    let per_dim = if include_essential { 2 * bins } else { bins };
    let mut out = vec![0.0; HOMOLOGY_DIMS * per_dim];
    for p in d.points() {
        if p.dim >= HOMOLOGY_DIMS {
            continue;
        }
        let offset = p.dim * per_dim;
        let k = p.multiplicity as f64;
        if p.is_essential() {
            if include_essential {
                out[offset + bins + bin_of(p.birth, bins, max_scale)] += k;
            }
        } else {
            out[offset + bin_of(p.persistence(), bins, max_scale)] += k;
        }
    }
    out
}
