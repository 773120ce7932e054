use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, RawObject};
use crate::filtration::{Edge, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Class 0: random trees. Class 1: a 4- to 6-cycle with pendant trees.
    /// Unit weights, 6 to 12 vertices.
    CyclesVsTrees,
    /// Class `c` is a forest with `c + 1` trees. The total number of edges
    /// (4 to 10) and their weights (uniform on `[0.5, 1.5]`) share one
    /// distribution across classes, so under a shortest-path Rips filtration
    /// the classes differ only in the number of essential H0 classes.
    ComponentsCount,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cycles-vs-trees" => Ok(Self::CyclesVsTrees),
            "components-count" => Ok(Self::ComponentsCount),
            _ => Err(format!(
                "unknown generator {s:?}; expected cycles-vs-trees or components-count"
            )),
        }
    }
}

/// Random recursive tree on `vertices` (offset by `first`), appended to `edges`.
fn grow_tree(
    rng: &mut ChaCha8Rng,
    first: usize,
    vertices: usize,
    weight: &mut impl FnMut(&mut ChaCha8Rng) -> f64,
    edges: &mut Vec<Edge>,
) {
    for i in 1..vertices {
        let parent = rng.gen_range(0..i);
        let w = weight(rng);
        edges.push(Edge {
            u: first + parent,
            v: first + i,
            weight: w,
        });
    }
}

fn cycles_vs_trees(rng: &mut ChaCha8Rng, class: usize) -> Graph {
    let n = rng.gen_range(6..=12);
    let mut edges = Vec::new();
    let mut unit = |_: &mut ChaCha8Rng| 1.0;
    if class == 0 {
        grow_tree(rng, 0, n, &mut unit, &mut edges);
    } else {
        let c = rng.gen_range(4..=6);
        for i in 0..c {
            edges.push(Edge {
                u: i,
                v: (i + 1) % c,
                weight: 1.0,
            });
        }
        for v in c..n {
            edges.push(Edge {
                u: rng.gen_range(0..v),
                v,
                weight: 1.0,
            });
        }
    }
    Graph::new(n, edges).expect("generated graph is valid")
}

fn components_count(rng: &mut ChaCha8Rng, class: usize) -> Graph {
    let parts = class + 1;
    let total = rng.gen_range(4..=10);
    // Uniform composition of `total` edges into `parts` trees.
    let mut sizes = vec![0usize; parts];
    for _ in 0..total {
        sizes[rng.gen_range(0..parts)] += 1;
    }
    let mut edges = Vec::new();
    let mut first = 0;
    let mut weight = |r: &mut ChaCha8Rng| r.gen_range(0.5..1.5);
    for e in sizes {
        grow_tree(rng, first, e + 1, &mut weight, &mut edges);
        first += e + 1;
    }
    Graph::new(first, edges).expect("generated graph is valid")
}

/// Balanced two-class synthetic graph dataset, deterministic in `seed`.
/// Samples alternate between classes.
pub fn synth_graphs(kind: SynthKind, n_per_class: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids = Vec::new();
    let mut objects = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_per_class {
        for class in 0..2 {
            let g = match kind {
                SynthKind::CyclesVsTrees => cycles_vs_trees(&mut rng, class),
                SynthKind::ComponentsCount => components_count(&mut rng, class),
            };
            ids.push(format!("synth-{}", 2 * i + class));
            objects.push(RawObject::Graph(g));
            labels.push(class);
        }
    }
    Dataset {
        ids,
        objects,
        labels,
        class_names: vec!["0".into(), "1".into()],
        channels: Vec::new(),
        stats: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::{shortest_path_metric, vietoris_rips};
    use crate::persistence::{diagram_from_betti, reduce, BettiTable, PersistenceDiagram};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn rips(g: &Graph) -> PersistenceDiagram {
        let fc = vietoris_rips(&shortest_path_metric(g), 2, f64::INFINITY).unwrap();
        let d = reduce(&fc).unwrap();
        assert_eq!(
            d.canonical(),
            diagram_from_betti(&BettiTable::compute(&fc))
                .unwrap()
                .canonical()
        );
        d
    }

    fn graph(ds: &Dataset, i: usize) -> &Graph {
        match &ds.objects[i] {
            RawObject::Graph(g) => g,
            RawObject::Image(_) => unreachable!(),
        }
    }

    #[test]
    fn deterministic_in_seed() {
        for kind in [SynthKind::CyclesVsTrees, SynthKind::ComponentsCount] {
            assert_eq!(synth_graphs(kind, 5, 3), synth_graphs(kind, 5, 3));
            assert_ne!(synth_graphs(kind, 5, 3), synth_graphs(kind, 5, 4));
        }
    }

    #[test]
    fn trees_have_no_loops_and_cycles_have_one() {
        let ds = synth_graphs(SynthKind::CyclesVsTrees, 40, 11);
        for i in 0..ds.len() {
            let d = rips(graph(&ds, i));
            let h1: Vec<_> = d.in_dim(1).collect();
            assert_eq!(d.essential_count(0), 1);
            if ds.labels[i] == 0 {
                assert!(h1.is_empty(), "tree {i}: {h1:?}");
            } else {
                assert_eq!(h1.len(), 1, "unicyclic {i}: {h1:?}");
                assert_eq!(h1[0].multiplicity, 1);
                assert!(h1[0].death.is_finite());
            }
        }
    }

    #[test]
    fn components_count_has_class_plus_one_essentials() {
        let ds = synth_graphs(SynthKind::ComponentsCount, 30, 5);
        for i in 0..ds.len() {
            let d = rips(graph(&ds, i));
            assert_eq!(d.essential_count(0), ds.labels[i] + 1);
            assert_eq!(d.count(1), 0);
        }
    }

    /// p-value of the chi-square homogeneity test on a 2-row count table.
    fn chi2_homogeneity(table: &[Vec<f64>; 2]) -> f64 {
        let total: f64 = table.iter().flatten().sum();
        let mut stat = 0.0;
        let mut nonempty = 0;
        for j in 0..table[0].len() {
            let col = table[0][j] + table[1][j];
            if col == 0.0 {
                continue;
            }
            nonempty += 1;
            for row in table {
                let expected = row.iter().sum::<f64>() * col / total;
                stat += (row[j] - expected).powi(2) / expected;
            }
        }
        1.0 - ChiSquared::new((nonempty - 1) as f64).unwrap().cdf(stat)
    }

    /// Pooled finite-H0 persistence histograms and per-sample finite point
    /// counts of the two classes.
    #[test]
    fn components_count_finite_mass_is_class_independent() {
        let ds = synth_graphs(SynthKind::ComponentsCount, 200, 17);
        let edges = [0.5, 0.7, 0.9, 1.1, 1.3, 1.5];
        let bins = edges.len() - 1;
        let mut pers = [vec![0.0; bins], vec![0.0; bins]];
        let mut counts = [vec![0.0; 11], vec![0.0; 11]];
        for i in 0..ds.len() {
            let d = rips(graph(&ds, i));
            let c = ds.labels[i];
            let mut n = 0;
            for p in d.in_dim(0).filter(|p| !p.is_essential()) {
                let k = edges.partition_point(|&e| e <= p.persistence()) - 1;
                pers[c][k.min(bins - 1)] += p.multiplicity as f64;
                n += p.multiplicity;
            }
            counts[c][n] += 1.0;
        }
        let p = chi2_homogeneity(&pers);
        assert!(p > 0.01, "persistence histogram p = {p}");
        let p = chi2_homogeneity(&counts);
        assert!(p > 0.01, "point count p = {p}");
    }
}
