//! Geometric spanner workbench.

pub mod analytic;
pub mod configs;
pub mod error;
pub mod geom;
pub mod mc;
pub mod metrics;
pub mod nets;
pub mod quad;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geom::Point<f64>;
pub type Segment = geom::Segment<f64>;
pub type Rect = geom::Rect<f64>;
pub type RoutingGraph = geom::RoutingGraph<f64>;
