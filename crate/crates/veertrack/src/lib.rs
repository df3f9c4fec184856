//! Veering train tracks of L∞ Delaunay triangulations along the Teichmüller
//! flow, with Hilbert-metric tools for the associated cones of measures.

pub mod cones;
pub mod delaunay;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod lab;
pub mod linalg;
pub mod polyhedral;
pub mod scalar;
pub mod surface;
pub mod traintrack;

pub use error::{Error, Result};
