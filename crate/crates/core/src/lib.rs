pub mod error;
pub mod clifford;
pub mod complex;
pub mod ingest;
pub mod matgeo;
pub mod persistence;
pub mod pipeline;
pub mod bundle;
pub mod charclass;

pub use error::{Error, Result};
