//! Minimum t-wise interaction sampling for constrained Boolean feature models.
//!
//! The crate computes small samples of valid configurations that cover every
//! valid t-wise interaction of a feature model, together with lower bounds in
//! the form of mutually exclusive interaction sets. Both artifacts can be
//! checked independently, so a matching pair certifies optimality.
//!
//! The main entry point is [`upper_bound::samplns`], which runs a large
//! neighborhood search over an exact SAT-based subsolver for the sample and,
//! alongside it, a large neighborhood search over maximum independent sets for
//! the bound.

pub mod certification;
pub mod clock;
pub mod harness;
pub mod interactions;
pub mod lower_bound;
pub mod model;
pub mod mutex;
pub mod sample;
pub mod sat;
pub mod upper_bound;

pub use certification::{check_duality, GapReport, GapStatus};
pub use clock::{Clock, Deadline};
pub use interactions::{Interaction, InteractionUniverse};
pub use lower_bound::MutexSet;
pub use model::{Configuration, FeatureModel, Literal, PartialAssignment};
pub use mutex::MutexLevel;
pub use sample::Sample;
