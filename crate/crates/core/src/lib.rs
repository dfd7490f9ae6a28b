//! Numerical toolkit for Carnot–Carathéodory geometry of real and complex
//! vector field systems: expressions, flows, balls and metrics, volume
//! functionals, wedge-quotient linear algebra, function-space norms,
//! structure checks and exponential scaling charts.

pub mod charts;
pub mod document;
pub mod error;
pub mod expr;
pub mod fields;
pub mod flows;
pub mod jet;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod registry;
pub mod rng;
pub mod spaces;
pub mod structure;
pub mod verify;
pub mod volumes;
pub mod wedge;
pub mod zoo;

pub use error::{Error, Result};
