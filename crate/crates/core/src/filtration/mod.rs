//! Filtered complexes built from graphs and grey-scale images.
//!
//! Every builder returns a [`FilteredComplex`]: a list of cells with
//! filtration values plus the total order `(value, dimension, id)` used by the
//! boundary-matrix reduction. Faces always precede their cofaces in that order.

mod complex;
mod cubical;
mod graph;

pub use complex::{Cell, CellKind, FilteredComplex};
pub use cubical::{cubical_filtration, height_transform, uniform_directions, DEFAULT_THRESHOLD};
pub use graph::{
    degree_filtration, shortest_path_metric, vietoris_rips, DistanceMatrix, Edge, Graph,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiltrationError {
    #[error("vertex id {id} out of range for graph with {n} vertices")]
    VertexOutOfRange { id: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) has invalid weight {w}")]
    InvalidWeight { u: usize, v: usize, w: f64 },
    #[error("image has {got} values, expected {expected}")]
    ImageShape { expected: usize, got: usize },
    #[error("pixel {index} has value {value} outside [0, 1]")]
    PixelValue { index: usize, value: f64 },
    #[error("distance matrix is not symmetric at ({i}, {j})")]
    NotSymmetric { i: usize, j: usize },
    #[error("distance matrix has nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),
    #[error("max_dim must be 0, 1 or 2, got {0}")]
    MaxDim(usize),
    #[error("direction ({0}, {1}) is not a unit vector")]
    NonUnitDirection(f64, f64),
    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: usize, reason: String },
    #[error("cell {cell} has value {value} below face {face} with value {face_value}")]
    NotSublevel {
        cell: usize,
        value: f64,
        face: usize,
        face_value: f64,
    },
}

/// A grey-scale image with row-major pixel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreyImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GreyImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, FiltrationError> {
        let expected = width * height;
        if values.len() != expected {
            return Err(FiltrationError::ImageShape {
                expected,
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(FiltrationError::PixelValue { index, value });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds an image from 8-bit pixels, scaling by `1/255`.
    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self, FiltrationError> {
        Self::new(
            width,
            height,
            pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Pixel value at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}
