//! The Siamese network: backbone, adjust layers, depth-wise correlation, score / box /
//! mask heads and the refinement decoder.

mod config;
mod net;
mod params;

pub use config::{BackboneKind, LevelSides, ModelConfig, Variant};
pub use net::{FeaturePyramid, Network, ResponseGrid, SearchVars};
pub use params::{Binder, ParamId, Params};

#[cfg(test)]
mod tests;
