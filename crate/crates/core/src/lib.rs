pub mod error;
pub mod ot;

pub use error::{Error, Result};
