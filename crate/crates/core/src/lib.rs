//! Optimal barrier and multibarrier strategies for singular stochastic control
//! of a spectrally negative Lévy process with a state-dependent marginal yield.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation: building a [`LevyModel`], evaluating its q-scale functions,
//! selecting the one-barrier threshold, running the multibarrier algorithm
//! and checking the HJB variational inequality of the resulting value
//! function. File formats, simulation and the command line live in the
//! `barropt` crate.
#![no_std]
#![deny(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod hjb;
pub mod model;
pub mod multibarrier;
pub mod numeric;
pub mod one_barrier;
pub mod reward;
pub mod scale;
pub mod value;

pub use error::{Error, Result};
pub use hjb::{apply_generator, check_hjb, Generator, GeneratorValue, GridSpec, HjbReport, PastingGap};
pub use model::{HyperExpJumps, LevyModel, Phase};
pub use multibarrier::{
    MultibarrierSolution, SolveOptions, SolveWarning, StopReason, TraceRow, TraceStage,
};
pub use one_barrier::{find_bstar, OneBarrierOptions, OneBarrierSolution};
pub use reward::{GrowthCheck, RewardFunction, RewardKind};
pub use scale::ScaleFunctions;
pub use value::{BarrierSet, Regime, ValueFunction, ValuePoint};
