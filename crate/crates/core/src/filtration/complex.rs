use super::FiltrationError;

/// Whether the complex is simplicial or cubical; fixes the face-count rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Simplex,
    Cube,
}

/// One cell of a filtered complex. Its id is its index in
/// [`FilteredComplex::cells`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dim: usize,
    /// Sorted ids of the codimension-one faces.
    pub boundary: Vec<usize>,
    pub value: f64,
}

impl Cell {
    pub fn vertex(value: f64) -> Self {
        Self {
            dim: 0,
            boundary: Vec::new(),
            value,
        }
    }

    pub fn new(dim: usize, mut boundary: Vec<usize>, value: f64) -> Self {
        boundary.sort_unstable();
        Self {
            dim,
            boundary,
            value,
        }
    }
}

/// Cells with filtration values and the reduction order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredComplex {
    kind: CellKind,
    cells: Vec<Cell>,
    ordering: Vec<usize>,
}

impl FilteredComplex {
    /// Validates face relations and the sublevel property, then sorts the
    /// cells by `(value, dimension, id)`.
    pub fn new(kind: CellKind, cells: Vec<Cell>) -> Result<Self, FiltrationError> {
        for (id, cell) in cells.iter().enumerate() {
            if !cell.value.is_finite() {
                return Err(FiltrationError::InvalidCell {
                    cell: id,
                    reason: format!("non-finite value {}", cell.value),
                });
            }
            if cell.dim > 2 {
                return Err(FiltrationError::InvalidCell {
                    cell: id,
                    reason: format!("dimension {} above 2", cell.dim),
                });
            }
            let expected = match (kind, cell.dim) {
                (_, 0) => 0,
                (CellKind::Simplex, d) => d + 1,
                (CellKind::Cube, d) => 2 * d,
            };
            if cell.boundary.len() != expected {
                return Err(FiltrationError::InvalidCell {
                    cell: id,
                    reason: format!(
                        "{} faces, expected {expected} for a {}-cell",
                        cell.boundary.len(),
                        cell.dim
                    ),
                });
            }
            for w in cell.boundary.windows(2) {
                if w[0] >= w[1] {
                    return Err(FiltrationError::InvalidCell {
                        cell: id,
                        reason: "boundary not sorted or has repeated faces".into(),
                    });
                }
            }
            for &face in &cell.boundary {
                let Some(f) = cells.get(face) else {
                    return Err(FiltrationError::InvalidCell {
                        cell: id,
                        reason: format!("face {face} does not exist"),
                    });
                };
                if f.dim + 1 != cell.dim {
                    return Err(FiltrationError::InvalidCell {
                        cell: id,
                        reason: format!("face {face} has dimension {}", f.dim),
                    });
                }
                if f.value > cell.value {
                    return Err(FiltrationError::NotSublevel {
                        cell: id,
                        value: cell.value,
                        face,
                        face_value: f.value,
                    });
                }
            }
        }
        let mut ordering: Vec<usize> = (0..cells.len()).collect();
        ordering.sort_by(|&a, &b| {
            cells[a]
                .value
                .total_cmp(&cells[b].value)
                .then(cells[a].dim.cmp(&cells[b].dim))
                .then(a.cmp(&b))
        });
        Ok(Self {
            kind,
            cells,
            ordering,
        })
    }

    pub fn empty(kind: CellKind) -> Self {
        Self {
            kind,
            cells: Vec::new(),
            ordering: Vec::new(),
        }
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Cell ids in filtration order.
    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Highest cell dimension, `None` for the empty complex.
    pub fn dim(&self) -> Option<usize> {
        self.cells.iter().map(|c| c.dim).max()
    }

    pub fn count_dim(&self, dim: usize) -> usize {
        self.cells.iter().filter(|c| c.dim == dim).count()
    }

    /// Largest filtration value, `None` for the empty complex.
    pub fn max_value(&self) -> Option<f64> {
        self.ordering.last().map(|&id| self.cells[id].value)
    }

    /// Sorted distinct filtration values `a_1 < … < a_d`.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for &id in &self.ordering {
            let v = self.cells[id].value;
            if out.last() != Some(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Appends a cell at the end of the filtration. Used to build complexes
    /// incrementally in tests.
    pub fn push(&mut self, cell: Cell) -> Result<usize, FiltrationError> {
        let mut cells = self.cells.clone();
        cells.push(cell);
        *self = Self::new(self.kind, cells)?;
        Ok(self.cells.len() - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_faces_before_cofaces_on_ties() {
        let cells = vec![
            Cell::vertex(0.0),
            Cell::vertex(1.0),
            Cell::new(1, vec![0, 1], 1.0),
        ];
        let fc = FilteredComplex::new(CellKind::Simplex, cells).unwrap();
        assert_eq!(fc.ordering(), &[0, 1, 2]);
        assert_eq!(fc.distinct_values(), vec![0.0, 1.0]);
    }

    #[test]
    fn rejects_sublevel_violation() {
        let cells = vec![
            Cell::vertex(0.0),
            Cell::vertex(2.0),
            Cell::new(1, vec![0, 1], 1.0),
        ];
        let err = FilteredComplex::new(CellKind::Simplex, cells).unwrap_err();
        assert!(matches!(err, FiltrationError::NotSublevel { cell: 2, .. }));
    }

    #[test]
    fn rejects_wrong_face_count() {
        let cells = vec![Cell::vertex(0.0), Cell::new(1, vec![0], 0.0)];
        assert!(FilteredComplex::new(CellKind::Simplex, cells).is_err());
    }
}
