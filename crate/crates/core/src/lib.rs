//! Semantic crowd navigation: a 2D social-force crowd simulator with
//! class-specific safety zones, zone-aware reward systems, a recurrent
//! actor-critic trained with clipped policy optimisation, and the evaluation
//! metrics used to compare zone-aware policies.

pub mod env;
pub mod eval;
pub mod geometry;
pub mod learner;
pub mod rewards;
pub mod sensing;
pub mod sim;
pub mod zones;

pub use geometry::Vec2;
pub use sim::{Action, AgentClass, World};
