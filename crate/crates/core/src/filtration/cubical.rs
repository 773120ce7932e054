use std::f64::consts::PI;

use super::{Cell, CellKind, FilteredComplex, FiltrationError, GreyImage};

/// Binarisation threshold used by the height filtration unless configured.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Cubical complex of a grey-scale image: one 2-cube per pixel carrying its
/// grey value, and every edge and vertex of the grid carrying the minimum value
/// of the pixels that contain it.
///
/// Vertices come first (row-major over the `(h+1)×(w+1)` corner grid), then
/// horizontal edges, vertical edges and finally the squares.
pub fn cubical_filtration(img: &GreyImage) -> FilteredComplex {
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return FilteredComplex::empty(CellKind::Cube);
    }
    let vid = |row: usize, col: usize| row * (w + 1) + col;
    let n_vertices = (w + 1) * (h + 1);
    let n_hedges = w * (h + 1);
    let hid = |row: usize, col: usize| n_vertices + row * w + col;
    let vedge = |row: usize, col: usize| n_vertices + n_hedges + row * (w + 1) + col;

    let mut vertex_value = vec![f64::INFINITY; n_vertices];
    let mut hedge_value = vec![f64::INFINITY; n_hedges];
    let mut vedge_value = vec![f64::INFINITY; (w + 1) * h];
    for row in 0..h {
        for col in 0..w {
            let p = img.get(row, col);
            for (r, c) in [
                (row, col),
                (row, col + 1),
                (row + 1, col),
                (row + 1, col + 1),
            ] {
                let v = &mut vertex_value[vid(r, c)];
                *v = v.min(p);
            }
            for r in [row, row + 1] {
                let e = &mut hedge_value[r * w + col];
                *e = e.min(p);
            }
            for c in [col, col + 1] {
                let e = &mut vedge_value[row * (w + 1) + c];
                *e = e.min(p);
            }
        }
    }

    let mut cells: Vec<Cell> = Vec::with_capacity(n_vertices + n_hedges + (w + 1) * h + w * h);
    cells.extend(vertex_value.iter().map(|&v| Cell::vertex(v)));
    for row in 0..=h {
        for col in 0..w {
            cells.push(Cell::new(
                1,
                vec![vid(row, col), vid(row, col + 1)],
                hedge_value[row * w + col],
            ));
        }
    }
    for row in 0..h {
        for col in 0..=w {
            cells.push(Cell::new(
                1,
                vec![vid(row, col), vid(row + 1, col)],
                vedge_value[row * (w + 1) + col],
            ));
        }
    }
    for row in 0..h {
        for col in 0..w {
            cells.push(Cell::new(
                2,
                vec![
                    hid(row, col),
                    hid(row + 1, col),
                    vedge(row, col),
                    vedge(row, col + 1),
                ],
                img.get(row, col),
            ));
        }
    }
    FilteredComplex::new(CellKind::Cube, cells).expect("cubical filtration is sublevel")
}

/// Height-function image for the height filtration.
///
/// Pixels with value `>= threshold` form the foreground and receive
/// `⟨p, direction⟩` for pixel position `p = (col, row)`, rescaled so that the
/// range over the whole grid maps to `[0, 1]`. Background pixels receive 1 and
/// therefore enter last.
pub fn height_transform(
    img: &GreyImage,
    direction: (f64, f64),
    threshold: f64,
) -> Result<GreyImage, FiltrationError> {
    let norm = direction.0.hypot(direction.1);
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(FiltrationError::NonUnitDirection(direction.0, direction.1));
    }
    let (w, h) = (img.width(), img.height());
    let height = |row: usize, col: usize| direction.0 * col as f64 + direction.1 * row as f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    if w > 0 && h > 0 {
        for (r, c) in [(0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)] {
            lo = lo.min(height(r, c));
            hi = hi.max(height(r, c));
        }
    }
    let span = hi - lo;
    let mut values = Vec::with_capacity(w * h);
    for row in 0..h {
        for col in 0..w {
            if img.get(row, col) >= threshold {
                let v = if span > 0.0 {
                    ((height(row, col) - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                values.push(v);
            } else {
                values.push(1.0);
            }
        }
    }
    GreyImage::new(w, h, values)
}

/// `k` unit vectors at angles `2πi/k`.
pub fn uniform_directions(k: usize) -> Vec<(f64, f64)> {
    (0..k)
        .map(|i| {
            let a = 2.0 * PI * i as f64 / k as f64;
            (a.cos(), a.sin())
        })
        .collect()
}
