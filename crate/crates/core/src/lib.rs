//! Persistence diagrams from graphs and grey-scale images, their learnable
//! representations on the Poincaré ball, and the small training stack used to
//! fit them end-to-end.
//!
//! The crate is organised bottom-up:
//!
//! - [`filtration`] builds filtered complexes (Vietoris–Rips on shortest-path
//!   metrics, vertex-degree, cubical and height filtrations).
//! - [`persistence`] reduces boundary matrices over Z/2 into
//!   [`PersistenceDiagram`]s, with a persistent-Betti oracle for testing.
//! - [`metrics`] holds Wasserstein/bottleneck distances and the stability audit.
//! - [`hyperbolic`] provides Poincaré-ball primitives with analytic Jacobians.
//! - [`representation`] assembles diagram representations (and the histogram
//!   baseline).
//! - [`learn`] is a scalar reverse-mode tape, a dense head, Adam and the
//!   cross-validated training loop.
//! - [`data`] loads datasets, generates synthetic ones and caches diagrams.

pub mod data;
pub mod filtration;
pub mod hyperbolic;
pub mod learn;
pub mod metrics;
pub mod persistence;
pub mod representation;

pub use filtration::{FilteredComplex, Graph, GreyImage};
pub use hyperbolic::{BallPoint, TangentVector};
pub use representation::{ReprParams, Variant};

pub use persistence::{DiagramPoint, PersistenceDiagram};
