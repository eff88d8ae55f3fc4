//! Guided curve extrusion of vector clipart.
//!
//! A flat clipart (closed, filled, layered paths) plus a rough guiding 3D shape
//! and a handful of structural annotations become a set of extruded prisms,
//! one or more per path. The prisms form a reference model that can be
//! rendered from any viewpoint as a drawing scaffold.
//!
//! Pipeline: [`svg::parse_clipart`] → [`shape::load_shape`] + [`mask::rasterize_mask`]
//! + [`shape::filter_by_mask`] → [`extrude::solve`] → [`render::render`].

pub mod constraints;
pub mod error;
pub mod extrude;
pub mod geom;
pub mod mask;
pub mod model;
pub mod render;
pub mod shape;
pub mod svg;
pub mod synthetic;

pub use error::{Error, Result};
