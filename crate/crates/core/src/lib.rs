pub mod calib;
pub mod device;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod modulation;
pub mod optim;
pub mod pulse;
pub mod special;
pub mod transmon;

pub use error::{Error, ErrorClass, Result};
