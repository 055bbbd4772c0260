//! Design and analysis of sparse sensing systems for compressed covariance
//! recovery.
//!
//! The crate covers the full pipeline from sensing-matrix design to graph
//! structure estimation:
//!
//! * [`model`] — Gaussian Bayesian networks (linear SEMs), their covariance
//!   matrices, and synthetic data generation.
//! * [`factorgraph`] — sparse sign sensing matrices and the bipartite factor
//!   graph induced by the Kronecker measurement operator.
//! * [`de`] — scalar density evolution tracking the error/variance state of
//!   iterative L1 recovery, with spike-and-slab priors.
//! * [`design`] — degree-distribution optimization: linear programs for
//!   single-class designs and a projected-gradient solver for two-class
//!   (priority/background) designs.
//! * [`sampler`] — configuration-model sampling of sensing matrices with
//!   prescribed degree distributions, and left-regular baselines.
//! * [`recovery`] — accelerated proximal-gradient (FISTA) solver for the L1
//!   covariance recovery program, plus constrained L1 inversion (CLIME)
//!   estimating a precision matrix.
//! * [`causal`] — terminal-node elimination recovering a DAG from covariance
//!   and precision matrices.
//! * [`metrics`] — error and support/edge precision-recall metrics.
//!
//! The crate is `no_std` (with `alloc`); all floating-point special functions
//! come from [`libm`]. Randomness is explicit: every sampling routine takes a
//! caller-supplied RNG, so results are reproducible given a seed.

#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod causal;
pub mod de;
pub mod design;
pub mod factorgraph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod recovery;
pub mod sampler;
pub mod special;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter was outside its documented domain.
    InvalidParameter(&'static str),
    /// A linear system was singular (or numerically indistinguishable from
    /// singular) where an invertible one was required.
    Singular(&'static str),
    /// A linear program had no feasible point.
    Infeasible(&'static str),
    /// A linear program's objective decreases without bound.
    Unbounded(&'static str),
    /// An iterative routine exhausted its iteration budget without meeting
    /// its convergence tolerance.
    NoConvergence(&'static str),
    /// Graph sampling could not place all edges without duplicates.
    Sampling(&'static str),
    /// Structure recovery could not identify a terminal node.
    NoTerminal(&'static str),
    /// A computation produced a non-finite intermediate value.
    Numeric(&'static str),
    /// A computation failed at a specific graph node.
    AtNode {
        /// Node index the failure is attributed to.
        node: usize,
        /// What went wrong there.
        message: &'static str,
    },
    /// A step of an iterative procedure failed at a specific round.
    AtRound {
        /// Zero-based round index.
        round: usize,
        /// The step error.
        inner: alloc::boxed::Box<Error>,
    },
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            Error::Singular(m) => write!(f, "singular matrix: {m}"),
            Error::Infeasible(m) => write!(f, "infeasible program: {m}"),
            Error::Unbounded(m) => write!(f, "unbounded program: {m}"),
            Error::NoConvergence(m) => write!(f, "no convergence: {m}"),
            Error::Sampling(m) => write!(f, "sampling failed: {m}"),
            Error::NoTerminal(m) => write!(f, "no terminal node: {m}"),
            Error::Numeric(m) => write!(f, "numeric error: {m}"),
            Error::AtNode { node, message } => write!(f, "node {node}: {message}"),
            Error::AtRound { round, inner } => write!(f, "round {round}: {inner}"),
        }
    }
}

#[cfg(any(test, feature = "std"))]
impl std::error::Error for Error {}

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Derives an independent sub-seed from a master seed and a stream index.
///
/// Uses the SplitMix64 finalizer, so nearby `(master, stream)` pairs map to
/// statistically unrelated outputs. Pipelines that consume randomness in
/// several stages should derive one sub-seed per stage from a single master
/// seed; adding a stage then never perturbs the streams of existing ones.
///
/// # Examples
///
/// ```
/// let a = decov_core::split_seed(42, 0);
/// let b = decov_core::split_seed(42, 1);
/// assert_ne!(a, b);
/// assert_eq!(a, decov_core::split_seed(42, 0));
/// ```
pub fn split_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
