pub mod catalog;
pub mod curvature;
pub mod expr;
pub mod genericity;
pub mod geometry;
pub mod jet;
pub mod linalg;
pub mod obstructions;
pub mod scalar;
pub mod tractor;
