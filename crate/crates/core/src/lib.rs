//! Optimal designs for linear models with non-normal location errors, and the
//! observed-information adaptive design that steers per-point information
//! toward the optimal allocation.

// NaN-rejecting guards read as `!(x > 0.0)` on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod error_models;
pub mod fod;
pub mod inference;
pub mod linalg;
pub mod location;
pub mod models;
pub mod par;
pub mod road;
pub mod session;
pub mod sim;
pub mod stats;

pub use design::{Criterion, Design, ExactDesign, InfoMatrix};
pub use error::{Error, Result};
pub use error_models::{ErrorDraw, ErrorModel, ErrorMoments};
pub use fod::{FodOptions, FodResult};
pub use models::ModelSpec;
pub use road::{ExperimentState, RoadConfig};
