//! Generation and resolution of perspective-aware spatial referring
//! expressions for symbolic tabletop scenes.
//!
//! The pipeline: load a [`scene::Scene`], build a landmark chain for a target
//! ([`generator::build_landmark_chain`]), enumerate one candidate expression
//! per reference-frame strategy ([`generator::expression_space`]), score each
//! candidate with the probabilistic listener model ([`resolver::denote`]),
//! and keep the best ([`optimizer::select_best`]).

pub mod fixtures;
pub mod frames;
pub mod generator;
pub mod geometry;
pub mod harness;
pub mod optimizer;
pub mod prepositions;
pub mod resolver;
pub mod scene;
