//! Numerical toolkit for planar complex vector fields L = d/dt + a(x,t) d/dx:
//! series first integrals, weak boundary traces via correction towers, FBI
//! transforms with decay-rate classification of wave-front directions, and
//! structural probes of boundary measures.

pub mod branch;
pub mod diff;
pub mod error;
pub mod fbi;
pub mod field;
pub mod first_integral;
pub mod presets;
pub mod quad;
pub mod trace;

pub use error::Error;
pub use num_complex::Complex64;
