//! Hypersphere secure sketches over the `C_α` code, and attacks against them.

pub mod aux;
pub mod ecc;
pub mod error;
pub mod ironmask;
pub mod plra;
pub mod sphere;

pub use ecc::{decode, CodeParams, Codeword};
pub use error::{Error, Result};
pub use ironmask::{recover, sketch, SketchRecord};
pub use sphere::{angle, RandomStream, RotationMatrix, Template};
