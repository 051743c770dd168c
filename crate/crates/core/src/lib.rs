//! Degrees-of-freedom analysis for `K`-user MIMO interference channels whose
//! cross links are rank constrained.
//!
//! The crate decides when half the cake (`M_sum / 2`) is optimal, computes
//! replication-based outer bounds, and builds and checks linear
//! interference-alignment schemes.

pub mod channel;
pub mod error;
pub mod feasibility;
pub mod flow;
pub mod linalg;
pub mod presets;
pub mod rational;
pub mod replication;
pub mod schemes;

pub use channel::{
    canonical_realization, extend_ergodic_pair, sample_generic, strip_desired, validate_spec,
    BlockMatrix, ChannelRealization, ExtendedRealization, NetworkSpec, RawNetworkSpec,
};
pub use error::{Error, Result};
pub use linalg::ScalarDomain;
pub use rational::Dof;
