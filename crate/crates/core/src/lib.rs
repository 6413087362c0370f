pub mod clifford;
pub mod error;
pub mod flow;
pub mod index;
pub mod lattice;
pub mod linalg;
pub mod models;
pub mod monopole;

pub use error::{Error, Result};
