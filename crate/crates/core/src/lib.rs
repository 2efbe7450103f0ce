pub mod attention;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod scene_sim;
pub mod semantic_map;

pub use error::{Error, Result};
