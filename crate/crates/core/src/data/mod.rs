//! Dataset ingestion, synthetic generators and the diagram cache.
//!
//! # On-disk layouts
//!
//! **Graph directory** ([`load_graph_dataset`]):
//!
//! ```text
//! <dir>/labels.txt      one "<name> <label>" per line; blank lines and '#' comments ignored
//! <dir>/<name>.edges    first line "<n_vertices> <n_edges>", then n_edges lines "u v [w]"
//! ```
//!
//! Vertex ids are zero-based. A missing weight means weight 1.
//!
//! **TU directory** ([`load_tu_dataset`]): `<DS>_A.txt` with one `i, j` pair
//! per line (one-based global vertex ids), `<DS>_graph_indicator.txt` with
//! one graph id per vertex and `<DS>_graph_labels.txt` with one label per
//! graph. Edges are unweighted.
//!
//! **IDX images** ([`load_idx`]): the big-endian MNIST format, magic `0x803`
//! for images and `0x801` for labels.
//!
//! **PGM directory** ([`load_pgm_dataset`]): `labels.txt` as above and one
//! `<name>.pgm` (P2 or P5) per sample.
//!
//! Labels are mapped to `0..C` in sorted order (numerically when every label
//! parses as an integer).

mod cache;
mod images;
mod synth;

pub use cache::{
    dataset_fingerprint, precompute_diagrams, CacheIndex, CacheStatus, DiagramStats,
    FiltrationSpec, CACHE_FORMAT,
};
pub use images::{
    load_idx, load_idx_images, load_pgm_dataset, parse_pgm, read_idx_images, read_idx_labels,
};
pub use synth::{synth_graphs, SynthKind};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtration::{Edge, FiltrationError, Graph, GreyImage};
use crate::learn::Sample;
use crate::persistence::{PersistenceDiagram, PersistenceError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("dataset is empty")]
    Empty,
    #[error("sample {index} ({id}): {source}")]
    Sample {
        index: usize,
        id: String,
        source: PersistenceError,
    },
    #[error("sample {index} ({id}) is a {found}, filtration {filtration} needs a {expected}")]
    WrongKind {
        index: usize,
        id: String,
        filtration: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("diagrams have not been computed")]
    NoDiagrams,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cache: {0}")]
    Cache(String),
}

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> DataError {
    DataError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawObject {
    Graph(Graph),
    Image(GreyImage),
}

impl RawObject {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Graph(_) => "graph",
            Self::Image(_) => "image",
        }
    }
}

/// Diagrams of every sample under one filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub diagrams: Vec<PersistenceDiagram>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub objects: Vec<RawObject>,
    pub labels: Vec<usize>,
    /// Original label of each class index.
    pub class_names: Vec<String>,
    /// Filled by [`precompute_diagrams`], in filtration order.
    pub channels: Vec<Channel>,
    pub stats: Option<DiagramStats>,
}

impl Dataset {
    /// Builds a dataset from raw labels, remapping them to `0..C`.
    pub fn from_raw_labels(
        ids: Vec<String>,
        objects: Vec<RawObject>,
        raw_labels: Vec<String>,
    ) -> Self {
        let (labels, class_names) = contiguous_labels(&raw_labels);
        Self {
            ids,
            objects,
            labels,
            class_names,
            channels: Vec::new(),
            stats: None,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    /// Sample count per class index.
    pub fn label_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.classes()];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }

    pub fn channel_names(&self) -> Vec<&str> {
        self.channels.iter().map(|c| c.name.as_str()).collect()
    }

    /// Training samples using the given channels (all channels when `None`).
    pub fn samples(&self, channels: Option<&[String]>) -> Result<Vec<Sample>, DataError> {
        if self.channels.is_empty() {
            return Err(DataError::NoDiagrams);
        }
        let picked: Vec<&Channel> = match channels {
            None => self.channels.iter().collect(),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.channels
                        .iter()
                        .find(|c| &c.name == n)
                        .ok_or_else(|| DataError::UnknownChannel(n.clone()))
                })
                .collect::<Result<_, _>>()?,
        };
        Ok((0..self.len())
            .map(|i| Sample {
                diagrams: picked.iter().map(|c| c.diagrams[i].clone()).collect(),
                label: self.labels[i],
            })
            .collect())
    }

    /// Keeps the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            objects: indices.iter().map(|&i| self.objects[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            class_names: self.class_names.clone(),
            channels: self
                .channels
                .iter()
                .map(|c| Channel {
                    name: c.name.clone(),
                    diagrams: indices.iter().map(|&i| c.diagrams[i].clone()).collect(),
                })
                .collect(),
            stats: self.stats.clone(),
        }
    }
}

/// Sorted distinct labels and the index of each input label among them.
pub fn contiguous_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<i64>> = raw.iter().map(|s| s.parse().ok()).collect();
    let mut names: Vec<String> = match &numeric {
        Some(nums) => {
            let mut v = nums.clone();
            v.sort_unstable();
            v.dedup();
            v.into_iter().map(|n| n.to_string()).collect()
        }
        None => {
            let mut v = raw.to_vec();
            v.sort();
            v.dedup();
            v
        }
    };
    let key = |s: &str| match &numeric {
        Some(_) => s.parse::<i64>().unwrap().to_string(),
        None => s.to_string(),
    };
    let index: BTreeMap<String, usize> = names.iter().cloned().zip(0..).collect();
    let labels = raw.iter().map(|s| index[&key(s)]).collect();
    names.shrink_to_fit();
    (labels, names)
}

/// Parses `labels.txt`: `(name, label)` pairs in file order.
pub fn read_label_file(path: &Path) -> Result<Vec<(String, String)>, DataError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match (it.next(), it.next(), it.next()) {
            (Some(name), Some(label), None) => out.push((name.to_string(), label.to_string())),
            _ => {
                return Err(DataError::Parse {
                    path: path.to_path_buf(),
                    line: k + 1,
                    reason: format!("expected \"<name> <label>\", got {line:?}"),
                })
            }
        }
    }
    Ok(out)
}

/// Parses one `.edges` file.
pub fn parse_edge_file(path: &Path, text: &str) -> Result<Graph, DataError> {
    let perr = |line: usize, reason: String| DataError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines
        .next()
        .ok_or_else(|| perr(1, "missing \"<n_vertices> <n_edges>\" header".into()))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    let (n, m) = match h.as_slice() {
        [a, b] => match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(n), Ok(m)) => (n, m),
            _ => return Err(perr(hline, format!("bad header {header:?}"))),
        },
        _ => return Err(perr(hline, format!("bad header {header:?}"))),
    };
    let mut edges = Vec::with_capacity(m);
    for (line, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if !(2..=3).contains(&f.len()) {
            return Err(perr(line, format!("expected \"u v [w]\", got {l:?}")));
        }
        let u: usize = f[0]
            .parse()
            .map_err(|_| perr(line, format!("bad vertex id {:?}", f[0])))?;
        let v: usize = f[1]
            .parse()
            .map_err(|_| perr(line, format!("bad vertex id {:?}", f[1])))?;
        let weight = match f.get(2) {
            Some(w) => w
                .parse::<f64>()
                .map_err(|_| perr(line, format!("bad weight {w:?}")))?,
            None => 1.0,
        };
        Graph::new(n, vec![Edge { u, v, weight }]).map_err(|e| perr(line, e.to_string()))?;
        edges.push(Edge { u, v, weight });
    }
    if edges.len() != m {
        return Err(DataError::Format {
            path: path.to_path_buf(),
            reason: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    Graph::new(n, edges).map_err(|e: FiltrationError| DataError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Loads a graph directory (see the module docs for the layout).
pub fn load_graph_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let entries = read_label_file(&dir.join("labels.txt"))?;
    if entries.is_empty() {
        return Err(DataError::Empty);
    }
    let mut ids = Vec::new();
    let mut objects = Vec::new();
    let mut raw = Vec::new();
    for (name, label) in entries {
        let path = dir.join(format!("{name}.edges"));
        let g = parse_edge_file(&path, &read_text(&path)?)?;
        ids.push(name);
        objects.push(RawObject::Graph(g));
        raw.push(label);
    }
    Ok(Dataset::from_raw_labels(ids, objects, raw))
}

fn read_int_lines(path: &Path) -> Result<Vec<(usize, Vec<i64>)>, DataError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DataError::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                reason: e.to_string(),
            })?;
        out.push((k + 1, vals));
    }
    Ok(out)
}

/// Loads a TU-format dataset named `name` from `dir`.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<Dataset, DataError> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let ind_path = file("graph_indicator");
    let indicator = read_int_lines(&ind_path)?;
    let labels_path = file("graph_labels");
    let glabels = read_int_lines(&labels_path)?;
    let a_path = file("A");
    let adjacency = read_int_lines(&a_path)?;

    let n_graphs = glabels.len();
    if n_graphs == 0 {
        return Err(DataError::Empty);
    }
    // Global vertex -> (graph, local id).
    let mut local = Vec::with_capacity(indicator.len());
    let mut sizes = vec![0usize; n_graphs];
    for (line, vals) in &indicator {
        let g = match vals.as_slice() {
            [g] if *g >= 1 && (*g as usize) <= n_graphs => *g as usize - 1,
            _ => {
                return Err(DataError::Parse {
                    path: ind_path.clone(),
                    line: *line,
                    reason: format!("graph id must lie in 1..={n_graphs}"),
                })
            }
        };
        local.push((g, sizes[g]));
        sizes[g] += 1;
    }
    let mut edges: Vec<Vec<Edge>> = vec![Vec::new(); n_graphs];
    for (line, vals) in &adjacency {
        let perr = |reason: String| DataError::Parse {
            path: a_path.clone(),
            line: *line,
            reason,
        };
        let (i, j) = match vals.as_slice() {
            [i, j] => (*i, *j),
            _ => return Err(perr("expected \"i, j\"".into())),
        };
        let lookup = |v: i64| {
            if v >= 1 && (v as usize) <= local.len() {
                Ok(local[v as usize - 1])
            } else {
                Err(perr(format!("vertex {v} out of range 1..={}", local.len())))
            }
        };
        let ((gi, u), (gj, v)) = (lookup(i)?, lookup(j)?);
        if gi != gj {
            return Err(perr(format!("edge joins graphs {} and {}", gi + 1, gj + 1)));
        }
        if u == v {
            return Err(perr(format!("self-loop on vertex {i}")));
        }
        edges[gi].push(Edge { u, v, weight: 1.0 });
    }
    let mut objects = Vec::with_capacity(n_graphs);
    for (g, e) in edges.into_iter().enumerate() {
        let graph = Graph::new(sizes[g], e).map_err(|e| DataError::Format {
            path: a_path.clone(),
            reason: format!("graph {}: {e}", g + 1),
        })?;
        objects.push(RawObject::Graph(graph));
    }
    let mut raw = Vec::with_capacity(n_graphs);
    for (line, vals) in &glabels {
        match vals.as_slice() {
            [l] => raw.push(l.to_string()),
            _ => {
                return Err(DataError::Parse {
                    path: labels_path.clone(),
                    line: *line,
                    reason: "expected one label".into(),
                })
            }
        }
    }
    let ids = (1..=n_graphs).map(|g| format!("{name}-{g}")).collect();
    Ok(Dataset::from_raw_labels(ids, objects, raw))
}

/// Where a dataset comes from; the `dataset` table of a run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DatasetSource {
    GraphDir {
        path: PathBuf,
    },
    Tu {
        path: PathBuf,
        name: String,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        #[serde(default)]
        limit: Option<usize>,
    },
    PgmDir {
        path: PathBuf,
    },
    Synth {
        generator: SynthKind,
        n_per_class: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl DatasetSource {
    /// Loads the dataset. Relative paths are resolved against `base`.
    pub fn load(&self, base: &Path) -> Result<Dataset, DataError> {
        let abs = |p: &Path| {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        match self {
            Self::GraphDir { path } => load_graph_dataset(&abs(path)),
            Self::Tu { path, name } => load_tu_dataset(&abs(path), name),
            Self::Idx {
                images,
                labels,
                limit,
            } => load_idx(&abs(images), &abs(labels), limit.unwrap_or(usize::MAX)),
            Self::PgmDir { path } => load_pgm_dataset(&abs(path)),
            Self::Synth {
                generator,
                n_per_class,
                seed,
            } => Ok(synth_graphs(*generator, *n_per_class, *seed)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) {
        fs::write(dir.join(name), text).unwrap();
    }

    #[test]
    fn graph_directory_round_trip() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "labels.txt", "# toy\na -1\nb 1\nc 1\n");
        write(d.path(), "a.edges", "3 2\n0 1\n1 2 2.5\n");
        write(d.path(), "b.edges", "2 1\n0 1\n");
        write(d.path(), "c.edges", "1 0\n");
        let ds = load_graph_dataset(d.path()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.labels, vec![0, 1, 1]);
        assert_eq!(ds.class_names, vec!["-1", "1"]);
        assert_eq!(ds.label_histogram(), vec![1, 2]);
        let RawObject::Graph(g) = &ds.objects[0] else {
            panic!()
        };
        assert_eq!(g.edges()[0].weight, 1.0);
        assert_eq!(g.edges()[1].weight, 2.5);
    }

    #[test]
    fn graph_directory_errors() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_graph_dataset(d.path()),
            Err(DataError::MissingFile(_))
        ));
        write(d.path(), "labels.txt", "a 0\n");
        write(d.path(), "a.edges", "3 2\n0 1\n1 x\n");
        match load_graph_dataset(d.path()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        write(d.path(), "a.edges", "3 2\n0 1\n1 7\n");
        assert!(matches!(
            load_graph_dataset(d.path()),
            Err(DataError::Parse { line: 3, .. })
        ));
        write(d.path(), "a.edges", "3 3\n0 1\n");
        assert!(matches!(
            load_graph_dataset(d.path()),
            Err(DataError::Format { .. })
        ));
        write(d.path(), "labels.txt", "a 0 extra\n");
        assert!(matches!(
            load_graph_dataset(d.path()),
            Err(DataError::Parse { line: 1, .. })
        ));
        write(d.path(), "labels.txt", "\n");
        assert_eq!(load_graph_dataset(d.path()), Err(DataError::Empty));
    }

    #[test]
    fn tu_format() {
        let d = tempfile::tempdir().unwrap();
        write(d.path(), "T_A.txt", "1, 2\n2, 1\n2, 3\n4, 5\n");
        write(d.path(), "T_graph_indicator.txt", "1\n1\n1\n2\n2\n");
        write(d.path(), "T_graph_labels.txt", "3\n7\n");
        let ds = load_tu_dataset(d.path(), "T").unwrap();
        assert_eq!(ds.labels, vec![0, 1]);
        let RawObject::Graph(g) = &ds.objects[1] else {
            panic!()
        };
        assert_eq!(g.n_vertices(), 2);
        assert_eq!(g.edges().len(), 1);
        let RawObject::Graph(g) = &ds.objects[0] else {
            panic!()
        };
        assert_eq!(g.edges().len(), 2);

        write(d.path(), "T_A.txt", "1, 4\n");
        assert!(matches!(
            load_tu_dataset(d.path(), "T"),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn labels_are_contiguous() {
        let raw: Vec<String> = ["10", "2", "10", "-3"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (l, names) = contiguous_labels(&raw);
        assert_eq!(l, vec![2, 1, 2, 0]);
        assert_eq!(names, vec!["-3", "2", "10"]);
        let raw: Vec<String> = ["b", "a"].iter().map(|s| s.to_string()).collect();
        assert_eq!(contiguous_labels(&raw).0, vec![1, 0]);
    }
}
