use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{Cell, CellKind, FilteredComplex, FiltrationError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph without self-loops. Parallel edges collapse to
/// the lightest one.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n_vertices: usize, edges: Vec<Edge>) -> Result<Self, FiltrationError> {
        let mut unique: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for e in edges {
            for id in [e.u, e.v] {
                if id >= n_vertices {
                    return Err(FiltrationError::VertexOutOfRange { id, n: n_vertices });
                }
            }
            if e.u == e.v {
                return Err(FiltrationError::SelfLoop(e.u));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(FiltrationError::InvalidWeight {
                    u: e.u,
                    v: e.v,
                    w: e.weight,
                });
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            unique
                .entry(key)
                .and_modify(|w| *w = w.min(e.weight))
                .or_insert(e.weight);
        }
        let edges = unique
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect();
        Ok(Self { n_vertices, edges })
    }

    /// Unit-weight graph from vertex pairs.
    pub fn unweighted(
        n_vertices: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, FiltrationError> {
        Self::new(
            n_vertices,
            pairs
                .into_iter()
                .map(|(u, v)| Edge { u, v, weight: 1.0 })
                .collect(),
        )
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_vertices];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for e in &self.edges {
            adj[e.u].push((e.v, e.weight));
            adj[e.v].push((e.u, e.weight));
        }
        adj
    }
}

/// Dense symmetric distance matrix; `f64::INFINITY` marks disconnected pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.len();
        let data = rows.into_iter().flatten().collect::<Vec<_>>();
        assert_eq!(data.len(), n * n, "distance matrix must be square");
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Largest finite off-diagonal entry (0 when there is none).
    pub fn diameter(&self) -> f64 {
        self.data
            .iter()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

/// All-pairs shortest-path distances (Dijkstra from every vertex).
pub fn shortest_path_metric(g: &Graph) -> DistanceMatrix {
    let n = g.n_vertices();
    let adj = g.adjacency();
    let mut data = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    for s in 0..n {
        let row = &mut data[s * n..(s + 1) * n];
        row[s] = 0.0;
        heap.push(Frontier(0.0, s));
        while let Some(Frontier(d, u)) = heap.pop() {
            if d > row[u] {
                continue;
            }
            for &(v, w) in &adj[u] {
                let nd = d + w;
                if nd < row[v] {
                    row[v] = nd;
                    heap.push(Frontier(nd, v));
                }
            }
        }
    }
    // Dijkstra sums edges in path order, so force exact symmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let d = data[i * n + j].min(data[j * n + i]);
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix { n, data }
}

/// Vietoris–Rips complex of a finite metric up to dimension `max_dim`,
/// keeping only cells whose value is at most `max_scale`.
///
/// Vertices enter at 0, edges at their length and triangles at their longest
/// edge. Infinite distances never produce an edge.
pub fn vietoris_rips(
    d: &DistanceMatrix,
    max_dim: usize,
    max_scale: f64,
) -> Result<FilteredComplex, FiltrationError> {
    if max_dim > 2 {
        return Err(FiltrationError::MaxDim(max_dim));
    }
    let n = d.len();
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(FiltrationError::NonzeroDiagonal(i));
        }
        for j in (i + 1)..n {
            let (a, b) = (d.get(i, j), d.get(j, i));
            if a != b && !((a - b).abs() <= 1e-12) {
                return Err(FiltrationError::NotSymmetric { i, j });
            }
        }
    }

    let mut cells: Vec<Cell> = (0..n).map(|_| Cell::vertex(0.0)).collect();
    if max_dim == 0 {
        return FilteredComplex::new(CellKind::Simplex, cells);
    }
    let mut edge_id = vec![usize::MAX; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = d.get(i, j);
            if w.is_finite() && w <= max_scale {
                edge_id[i * n + j] = cells.len();
                edge_id[j * n + i] = cells.len();
                cells.push(Cell::new(1, vec![i, j], w));
            }
        }
    }
    if max_dim == 2 {
        for i in 0..n {
            for j in (i + 1)..n {
                let ij = edge_id[i * n + j];
                if ij == usize::MAX {
                    continue;
                }
                for k in (j + 1)..n {
                    let (ik, jk) = (edge_id[i * n + k], edge_id[j * n + k]);
                    if ik == usize::MAX || jk == usize::MAX {
                        continue;
                    }
                    let value = cells[ij].value.max(cells[ik].value).max(cells[jk].value);
                    cells.push(Cell::new(2, vec![ij, ik, jk], value));
                }
            }
        }
    }
    FilteredComplex::new(CellKind::Simplex, cells)
}

/// Sublevel filtration of vertex degree: vertices at their degree, edges at
/// the larger endpoint degree.
pub fn degree_filtration(g: &Graph) -> FilteredComplex {
    let deg = g.degrees();
    let mut cells: Vec<Cell> = deg.iter().map(|&d| Cell::vertex(d as f64)).collect();
    for e in g.edges() {
        let value = deg[e.u].max(deg[e.v]) as f64;
        cells.push(Cell::new(1, vec![e.u, e.v], value));
    }
    FilteredComplex::new(CellKind::Simplex, cells)
        .expect("degree filtration is a valid sublevel filtration")
}
