pub mod arch;
pub mod data;
pub mod error;
pub mod explore;
pub mod frontend;
pub mod nn;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
