pub mod adaptive;
pub mod btl;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod problems;
pub mod second_order;
pub mod solver;
pub mod system;

pub use error::{MorError, Result, Side};
