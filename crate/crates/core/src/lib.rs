pub mod design;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod optimize;
pub mod pipeline;
pub mod profiles;
pub mod rng;
pub mod testfns;
pub mod uq;

pub use error::{Error, Result};
