//! Numerical laboratory for Poisson brackets of partitions of unity on
//! discretized closed surfaces.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the experiments use.
//!
//! ```
//! use pblab::bracket::bracket_report;
//! use pblab::partition::sharp_cover;
//! use pblab::Grid;
//!
//! let g = Grid::torus(64, 64, 1.0, 1.0)?;
//! let (cover, p) = sharp_cover(4, &g, false)?;
//! let (_, q) = sharp_cover(4, &g, true)?;
//! let r = bracket_report(&p, &q)?;
//! assert!(r.pb_upper.value >= r.pb_lower.bound);
//! assert_eq!(cover.essential_indices().len(), 16);
//! # Ok::<(), pblab::Error>(())
//! ```

pub mod bracket;
pub mod cover;
pub mod cube;
pub mod dense;
pub mod divisions;
pub mod error;
pub mod geom;
pub mod io;
pub mod levelset;
pub mod partition;
pub mod real;
pub mod surface;
pub mod svg;
pub mod symplinalg;

pub use error::{Error, Result};
pub use real::{pairwise_sum, Real};

pub type Grid = surface::SurfaceGrid<f64>;
pub type Field = surface::ScalarField<f64>;
pub type Cover = cover::Cover<f64>;
pub type Partition = partition::PartitionOfUnity<f64>;
pub type VectorSet = symplinalg::SympVectorSet<f64>;
