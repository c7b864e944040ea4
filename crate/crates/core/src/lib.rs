//! Robust pricing and superhedging of American claims on finite scenario trees.

pub mod characteristics;
pub mod error;
pub mod families;
pub mod hedging;
pub mod linalg;
pub mod lp;
pub mod market_model;
pub mod penalization;
pub mod sample;
pub mod snell;

pub use error::{Error, Result};
pub use market_model::{
    load_model, parse_model, paste, path_probability, LocalTransitionSet, Measure, MeasureFamily,
    NodeIx, Process, ScenarioTree, Strategy, TreeBuilder, TreeModel,
};
