//! Simulation and analysis toolkit for the many-access Gaussian multiple-access
//! channel with a shared spherical codebook.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: sampling on the sphere of radius `sqrt(nP)`, hemisphericity
//!   testing (minimum-norm point of the convex hull), cap distances and the
//!   projection density of a uniform point.
//! * [`wendel`]: exact and log-domain hemisphere probabilities and the
//!   regime classification in the user density `beta`.
//! * [`channel`]: parameter derivation, reproducible codebooks, active-set
//!   selection and the additive Gaussian channel.
//! * [`decoder`]: direction estimate, cap pre-filter and maximum-likelihood
//!   subset selection (exact branch-and-bound and greedy + 1-swap local search).
//! * [`asymptotics`]: closed-form limits and bounds (alignment constant,
//!   retention limits, pairwise error, error-term ladder, exponent `P/4`).
//! * [`harness`]: deterministic parallel Monte Carlo trials, estimators and
//!   report/CSV output.

pub mod asymptotics;
pub mod channel;
pub mod decoder;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod rng;
pub mod special;
pub mod wendel;

pub use asymptotics::{ComponentLimits, LimitReport, PairwiseError, SumRate};
pub use channel::{
    ActiveSet, ActiveSetMode, ChannelParams, Codebook, NoiseMode, Observation, SamplingMode,
};
pub use decoder::{
    CapFilter, DecodeMethod, DecodeOutcome, DecodeStrategy, DecoderSettings, TauSchedule,
};
pub use error::{DecodeError, Error, Result};
pub use geometry::{HemisphereWitness, SphereVector};
pub use harness::{ExperimentConfig, ExperimentReport, MeanStderr, Measurement, TrialRecord};
pub use wendel::{RegimeClass, RegimeKind};
