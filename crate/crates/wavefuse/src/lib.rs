//! File formats, image IO and the command-line front end for
//! [`wavefuse_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod imageio;
pub mod model_io;
pub mod report;

pub use error::{Error, Result};
pub use imageio::{load_grayscale, save_grayscale};
pub use model_io::{load_model, save_model};
