pub mod avar;
pub mod error;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod ols;
pub mod optim;
pub mod tobit;

pub use error::{Error, Result};
