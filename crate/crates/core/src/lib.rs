pub mod datapipe;
pub mod error;
pub mod evalcli;
pub mod models;
pub mod numerics;
pub mod objectives;
pub mod synthcam;
pub mod trainer;

pub use error::{Error, Result};
