//! Recovery of an initial datum of a linear evolution equation on `[0, π]`
//! from point samples `u(x0, t_j)` taken on a geometric time schedule.
//!
//! The pipeline is: an [`OperatorSpec`] (or a time-dependent
//! [`DiffusivityProfile`]) and an [`InitialDatum`] produce a [`Trace`] of
//! certified samples along a [`SamplingPlan`]; [`recovery::recover`] turns the
//! trace back into Fourier coefficients with a-priori error bounds.

pub mod bench;
pub mod config;
pub mod datum;
pub mod error;
pub mod expr;
pub mod forward;
pub mod lemmas;
pub mod operator;
pub mod oracle;
pub mod pipeline;
pub mod precision;
pub mod profile;
pub mod recovery;
pub mod schedule;

pub use datum::InitialDatum;
pub use error::{Error, Result};
pub use forward::{sample_trace, Dynamics, Trace};
pub use operator::OperatorSpec;
pub use profile::{DiffusivityProfile, ProfileKind};
pub use recovery::{recover, RecoveryResult};
pub use schedule::{SamplingPlan, SamplingPoint};
