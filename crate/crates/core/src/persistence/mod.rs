//! Persistence diagrams and their computation over Z/2.
//!
//! [`reduce`] is the production path (standard column reduction with
//! clearing). [`persistent_betti`] and [`multiplicity_ie`] compute the same
//! diagrams through ranks of inclusion-induced maps and inclusion–exclusion;
//! they are slow and exist to cross-check the reduction on small complexes.
//!
//! The diagonal is kept implicit: pairs with `birth == death` are never stored.

mod betti;
mod io;
mod reduce;

pub use betti::{diagram_from_betti, multiplicity_ie, persistent_betti, BettiTable};
pub use io::{read_jsonl, write_jsonl, DiagramHeader, PointRecord};
pub use reduce::reduce;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filtration::FiltrationError;

/// Homology dimensions reported by [`reduce`]: components and loops.
pub const HOMOLOGY_DIMS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PersistenceError {
    #[error(transparent)]
    Filtration(#[from] FiltrationError),
    #[error("filtration index ({i}, {j}) out of range for {d} distinct values")]
    IndexOutOfRange { i: usize, j: usize, d: usize },
    #[error("inconsistent Betti table: negative multiplicity {value} at dim {dim}, ({i}, {j})")]
    NegativeMultiplicity {
        dim: usize,
        i: usize,
        j: usize,
        value: i64,
    },
    #[error("invalid diagram record on line {line}: {reason}")]
    Record { line: usize, reason: String },
    #[error("i/o: {0}")]
    Io(String),
}

/// A point of a persistence diagram. `death == f64::INFINITY` marks an
/// essential class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagramPoint {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub multiplicity: usize,
}

impl DiagramPoint {
    pub fn new(dim: usize, birth: f64, death: f64) -> Self {
        Self {
            dim,
            birth,
            death,
            multiplicity: 1,
        }
    }

    pub fn essential(dim: usize, birth: f64) -> Self {
        Self::new(dim, birth, f64::INFINITY)
    }

    pub fn with_multiplicity(mut self, multiplicity: usize) -> Self {
        self.multiplicity = multiplicity;
        self
    }

    pub fn is_essential(&self) -> bool {
        self.death == f64::INFINITY
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of off-diagonal points, across homology dimensions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    /// Builds a diagram, dropping zero-multiplicity points and points on the
    /// diagonal.
    pub fn new(points: Vec<DiagramPoint>) -> Self {
        let points = points
            .into_iter()
            .filter(|p| p.multiplicity > 0 && p.death > p.birth)
            .collect();
        Self { points }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn in_dim(&self, dim: usize) -> impl Iterator<Item = &DiagramPoint> + '_ {
        self.points.iter().filter(move |p| p.dim == dim)
    }

    /// Total number of points in `dim`, counting multiplicity.
    pub fn count(&self, dim: usize) -> usize {
        self.in_dim(dim).map(|p| p.multiplicity).sum()
    }

    pub fn essential_count(&self, dim: usize) -> usize {
        self.in_dim(dim)
            .filter(|p| p.is_essential())
            .map(|p| p.multiplicity)
            .sum()
    }

    /// Largest finite birth or death value.
    pub fn max_finite_value(&self) -> Option<f64> {
        self.points
            .iter()
            .flat_map(|p| [p.birth, p.death])
            .filter(|v| v.is_finite())
            .reduce(f64::max)
    }

    /// Canonical form: identical points merged, sorted by
    /// `(dim, birth, death)`. Two diagrams are equal as multisets iff their
    /// canonical forms are equal.
    pub fn canonical(&self) -> Self {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(a.birth.total_cmp(&b.birth))
                .then(a.death.total_cmp(&b.death))
        });
        let mut out: Vec<DiagramPoint> = Vec::with_capacity(pts.len());
        for p in pts {
            match out.last_mut() {
                Some(q) if q.dim == p.dim && q.birth == p.birth && q.death == p.death => {
                    q.multiplicity += p.multiplicity
                }
                _ => out.push(p),
            }
        }
        Self { points: out }
    }

    /// Unit-multiplicity copies of every point.
    pub fn expanded(&self) -> Vec<DiagramPoint> {
        self.points
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.with_multiplicity(1), p.multiplicity))
            .collect()
    }

    pub fn push(&mut self, p: DiagramPoint) {
        if p.multiplicity > 0 && p.death > p.birth {
            self.points.push(p);
        }
    }
}
