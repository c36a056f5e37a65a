//! Error type shared by every module of the core crate.

use alloc::string::String;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Failures reported by model construction and the solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    /// Model parameters violate an invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),
    /// Jump rates too close together to separate the roots of ψ(θ) = q.
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    /// A root or extremum search did not reach its tolerance.
    #[error("convergence failure in {0}")]
    ConvergenceFailure(&'static str),
    /// Reward parameters violate an invariant.
    #[error("invalid reward: {0}")]
    InvalidReward(String),
    /// The reward cannot be evaluated at this point.
    #[error("reward undefined at x = {0}")]
    DomainError(f64),
    /// A push must move the state down.
    #[error("invalid push from {from} to {to}")]
    InvalidPush {
        /// Starting level.
        from: f64,
        /// Target level.
        to: f64,
    },
    /// Exit problem with `b <= x <= a`, `b < a` violated.
    #[error("invalid interval: need b <= x <= a, b < a (x = {x}, a = {a}, b = {b})")]
    InvalidInterval {
        /// Start.
        x: f64,
        /// Upper level.
        a: f64,
        /// Lower level.
        b: f64,
    },
    /// Barrier levels are not a strictly increasing odd-length list in [0, ∞).
    #[error("invalid barriers: {0}")]
    InvalidBarriers(String),
    /// The maximized function was still increasing at the search limit.
    #[error("search still rising at upper limit {0}")]
    UnboundedSearch(f64),
    /// The point does not lie in the regime the formula is defined on.
    #[error("x = {x} outside regime interval ({lo}, {hi})")]
    OutOfRegime {
        /// Point.
        x: f64,
        /// Left end.
        lo: f64,
        /// Right end.
        hi: f64,
    },
    /// F(v, z) needs z > v.
    #[error("invalid pair: need z > v (v = {v}, z = {z})")]
    InvalidPair {
        /// First argument.
        v: f64,
        /// Second argument.
        z: f64,
    },
    /// Operation only defined for Brownian motion with drift.
    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),
    /// The generator of the push branch never turns positive.
    #[error("(L-q)H never crosses zero on ({from}, {to}]")]
    NoSignChange {
        /// Left end of the scan.
        from: f64,
        /// Right end of the scan.
        to: f64,
    },
    /// No grid point of [b, c] has its maximizer strictly to the right.
    #[error("D-set empty on [{from}, {to}] at grid resolution")]
    EmptyD {
        /// Left end.
        from: f64,
        /// Right end (the c point).
        to: f64,
    },
    /// The smooth-fit equality at an even barrier did not hold.
    #[error("matching condition failed at v = {v}: boundary {boundary}, interior {interior}")]
    MatchingFailure {
        /// Even barrier.
        v: f64,
        /// F(v, v+).
        boundary: f64,
        /// F(v, z(v)).
        interior: f64,
    },
}
