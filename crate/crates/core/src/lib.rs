pub mod error;
pub mod matops;
pub mod sdp;
pub mod serde_mat;
pub mod system;
pub mod analysis;
pub mod lmi;
pub mod power;
pub mod sparsifier;

pub use error::{Error, Result};
