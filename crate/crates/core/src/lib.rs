//! Discrete solvers for optimal spatial pricing under transportation costs.
//!
//! A region is a finite point set; customers living at `x` buy one unit at
//! the shop `y` minimising `c(x, y) + p(y)`. The crate covers
//!
//! - [`model_one`]: the agent prices the whole region below a bound `p0`;
//! - [`model_two`]: prices on a fixed subregion are imposed, the agent
//!   prices the rest;
//! - [`nash`]: two agents pricing complementary regions, best-response
//!   dynamics and equilibrium checks.
//!
//! [`ctransform`] holds the shared c-concavity machinery and [`search`] the
//! finite-dimensional maximisers behind the non-closed-form solvers.

pub mod ctransform;
pub mod error;
pub mod geometry;
pub mod model_one;
pub mod model_two;
pub mod nash;
pub mod search;

pub use ctransform::{AssignmentMap, ValueFunction, ValueKind};
pub use error::{Error, Result};
pub use geometry::{
    CostKernel, CostKind, CustomerMeasure, Layout, Mask, Point, Price, PricePattern, Region,
    Window2,
};
pub use model_one::{ModelOneMethod, ModelOneReport};
pub use model_two::{CdfKind, ModelTwoMethod, ModelTwoReport, PartitionContext};
pub use nash::{GameContext, Player};
pub use search::{Diagnostics, SearchConfig, SearchMode};
