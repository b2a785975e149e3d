//! Desk-scale laboratory for objective-space racing between two planner-driven
//! cars: a deterministic 2D simulator, a sampling-based motion planner,
//! multi-objective evolutionary search over planner weights, exhaustive
//! two-player game solving with exact counterfactual regrets, a regret
//! prediction model, and an online pipeline that races the pieces against
//! each other.

pub mod error;
pub mod evo;
pub mod game;
pub mod harness;
pub mod objectives;
pub mod pipeline;
pub mod planner;
pub mod regret_model;
pub mod sim;
pub mod track;
pub mod util;

pub use error::{Error, Result};
