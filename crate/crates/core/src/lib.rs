pub mod bundle;
pub mod error;
pub mod io;
pub mod isomorphism;
pub mod multidomain;
pub mod norms;
pub mod numerics;
pub mod sections;

pub use error::{Error, Result};
