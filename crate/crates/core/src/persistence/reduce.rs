use super::{DiagramPoint, PersistenceDiagram, PersistenceError, HOMOLOGY_DIMS};
use crate::filtration::{FilteredComplex, FiltrationError};

const NONE: u32 = u32::MAX;

/// Persistence diagram (dimensions 0 and 1) of a filtered complex.
///
/// Columns of the boundary matrix are indexed by filtration position and
/// reduced left to right, one dimension at a time from the top down. Columns
/// whose cell is already the pivot of a higher-dimensional column are cleared
/// without reduction. Births and deaths are reported as filtration values;
/// zero-persistence pairs are dropped.
pub fn reduce(fc: &FilteredComplex) -> Result<PersistenceDiagram, PersistenceError> {
    let n = fc.len();
    let cells = fc.cells();
    let order = fc.ordering();
    let mut pos = vec![0u32; n];
    for (p, &id) in order.iter().enumerate() {
        pos[id] = p as u32;
    }

    let mut columns: Vec<Vec<u32>> = Vec::with_capacity(n);
    for (p, &id) in order.iter().enumerate() {
        let cell = &cells[id];
        let mut col: Vec<u32> = Vec::with_capacity(cell.boundary.len());
        for &face in &cell.boundary {
            let fp = pos[face];
            if fp as usize >= p || cells[face].value > cell.value {
                return Err(FiltrationError::NotSublevel {
                    cell: id,
                    value: cell.value,
                    face,
                    face_value: cells[face].value,
                }
                .into());
            }
            col.push(fp);
        }
        col.sort_unstable();
        columns.push(col);
    }

    let mut pivot_of_row = vec![NONE; n];
    let mut cleared = vec![false; n];
    let mut negative = vec![false; n];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut scratch: Vec<u32> = Vec::new();
    let top = fc.dim().unwrap_or(0);

    for dim in (1..=top).rev() {
        for j in 0..n {
            if cells[order[j]].dim != dim {
                continue;
            }
            if cleared[j] {
                columns[j].clear();
                continue;
            }
            let mut col = std::mem::take(&mut columns[j]);
            while let Some(&low) = col.last() {
                let k = pivot_of_row[low as usize];
                if k == NONE {
                    break;
                }
                symmetric_difference(&col, &columns[k as usize], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&low) = col.last() {
                pivot_of_row[low as usize] = j as u32;
                cleared[low as usize] = true;
                negative[j] = true;
                pairs.push((low as usize, j));
            }
            columns[j] = col;
        }
    }

    let mut points = Vec::new();
    for (birth_pos, death_pos) in pairs {
        let b = &cells[order[birth_pos]];
        let d = &cells[order[death_pos]];
        if b.dim < HOMOLOGY_DIMS && d.value > b.value {
            points.push(DiagramPoint::new(b.dim, b.value, d.value));
        }
    }
    for p in 0..n {
        let cell = &cells[order[p]];
        if !negative[p] && !cleared[p] && cell.dim < HOMOLOGY_DIMS {
            points.push(DiagramPoint::essential(cell.dim, cell.value));
        }
    }
    Ok(PersistenceDiagram::new(points).canonical())
}

fn symmetric_difference(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}
