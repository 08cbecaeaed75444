pub mod acceptance;
pub mod config;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod master;
pub mod models;
pub mod oracle;
pub mod quad;
pub mod reservoir;
pub mod scenario;
pub mod series;

pub use error::{Error, Result};
