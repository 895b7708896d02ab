pub mod basis;
pub mod field;
pub mod poly;

pub use basis::{basis_dim, block_dim, eigenvalue, harmonic_dim, Basis, BasisBlock};
pub use field::{sample, Field, GridField, SphereFunction};
