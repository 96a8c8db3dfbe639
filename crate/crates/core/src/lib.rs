pub mod error;
pub mod linalg;
pub mod trigpoly;
pub mod measure;
pub mod transform;
pub mod kernel;
pub mod spaces;
pub mod decompose;
pub mod kernelpair;
pub mod json;
pub mod cli;
pub mod forms;
