use std::path::PathBuf;

use poincare_persistence::data::{
    load_graph_dataset, load_pgm_dataset, precompute_diagrams, DataError, FiltrationSpec, RawObject,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

#[test]
fn toy_graph_fixture_parses_to_two_graphs() {
    let ds = load_graph_dataset(&fixture("toy_graphs")).unwrap();
    assert_eq!(ds.len(), 2);
    assert_eq!(ds.ids, vec!["cycle4", "path4"]);
    assert_eq!(ds.labels, vec![1, 0]);
    for obj in &ds.objects {
        let RawObject::Graph(g) = obj else { panic!() };
        assert_eq!(g.n_vertices(), 4);
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
    }
}

#[test]
fn toy_graph_fixture_rips_diagrams() {
    let mut ds = load_graph_dataset(&fixture("toy_graphs")).unwrap();
    let rips = FiltrationSpec::Rips {
        max_dim: 2,
        max_scale: None,
    };
    precompute_diagrams(&mut ds, &[rips, FiltrationSpec::Degree], None).unwrap();
    let cycle = &ds.channels[0].diagrams[0];
    let h1: Vec<_> = cycle.in_dim(1).map(|p| (p.birth, p.death)).collect();
    assert_eq!(h1, vec![(1.0, 2.0)]);
    assert_eq!(ds.channels[0].diagrams[1].count(1), 0);
    // The degree filtration keeps the 4-cycle's loop forever.
    assert_eq!(ds.channels[1].diagrams[0].essential_count(1), 1);
}

#[test]
fn missing_label_file_is_an_explicit_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_graph_dataset(dir.path()),
        Err(DataError::MissingFile(p)) if p.ends_with("labels.txt")
    ));
}

#[test]
fn image_fixture_cubical_and_height() {
    let mut ds = load_pgm_dataset(&fixture("images")).unwrap();
    assert_eq!(ds.ids, vec!["ring", "bar"]);
    let specs = [
        FiltrationSpec::Cubical,
        FiltrationSpec::Height {
            directions: 8,
            threshold: 0.5,
        },
    ];
    precompute_diagrams(&mut ds, &specs, None).unwrap();
    assert_eq!(ds.channels.len(), 9);
    // Under every height direction the ring's loop closes before the
    // background (value 1) enters.
    for c in &ds.channels[1..] {
        let ring_loops: Vec<_> = c.diagrams[0].in_dim(1).collect();
        assert_eq!(ring_loops.len(), 1, "{}", c.name);
        assert_eq!(ring_loops[0].death, 1.0);
        assert_eq!(c.diagrams[1].count(1), 0, "{}", c.name);
    }
}
