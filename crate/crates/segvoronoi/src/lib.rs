//! Order-k Voronoi diagrams of line segments.

pub mod bisector;
pub mod cli;
pub mod instances;
pub mod kernel;
pub mod nearest;
pub mod orderk;
pub mod poly;
pub mod subdivision;
pub mod verify;
