//! Finite dyadic models for two-weight norm inequalities with entropy bumps.
//!
//! Everything operates on the unit cube `[0,1)^d` (`d` = 1 or 2) discretized
//! to a fixed dyadic depth `L`. A weight is a nonnegative density per depth-`L`
//! leaf; all integrals are exact leaf sums. On top of that the crate provides
//! entropy functionals and bump constants, sparse collections and stopping
//! trees, operator-norm estimation for the weighted maximal function and for
//! sparse averaging operators, and ratio experiments that probe how tight the
//! bump bounds are on concrete instances.
//!
//! The crate is `no_std` (with `alloc`); file formats and the CLI live in the
//! companion `entropylab` crate. All randomized routines take explicit seeds
//! and are bit-deterministic for a given input.

#![no_std]

extern crate alloc;

pub mod bump;
pub mod cube;
pub mod eig;
pub mod epsilon;
pub mod maximal;
pub mod norm;
pub mod rng;
pub mod sparse;
pub mod suite;
pub mod verify;
pub mod weight;

pub use bump::{joint_bump, product_bump, sparse_ainfty, sparse_ap, BumpReport, CubeValue};
pub use cube::DyadicCube;
pub use epsilon::EpsilonFn;
pub use maximal::{bumped_entropy, entropy, local_maximal, maximal_of};
pub use norm::{
    carleson_constant, maximal_norm, maximal_testing, sawyer_testing, sparse_norm_general,
    sparse_norm_p2, CarlesonReport, IterationParams, NormEstimate, NormKind, TestingConstants,
};
pub use suite::{
    canonical_count, canonical_instance, canonical_suite, norm_agreement_suite, sandwich_suite,
};
pub use sparse::{
    apply_sparse, build_stopping_tree, maximal_domination_check, pairing, pigeonhole,
    DominationReport, PigeonholeClass, PigeonholeMode, SparseCollection, SparsityCheck,
    StoppingNode, StoppingTree, NULL_BAND, STOPPING_FACTOR,
};
pub use verify::{
    generate_weight, run_experiment, sharpness_search, verify_ap_ainfty_bound,
    verify_joint_bump_sum_bound, verify_maximal_bound, verify_separated_bump_bound, Experiment,
    ExperimentKind, SearchOutcome, SparseSpec, VerificationReport, WeightKind, WeightSpec,
};
pub use weight::{weighted_average, DyadicWeight, LeafFunction};

use core::fmt;

/// Errors for the whole crate. `is_degenerate` separates inputs that are
/// structurally valid but carry no usable mass (rejected by experiments)
/// from plain validation failures; the CLI maps the two to different exit
/// codes.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Dimension must be 1 or 2.
    InvalidDimension { dimension: u32 },
    /// Depth is outside `1..=16` (d=1) or `1..=8` (d=2).
    InvalidDepth { dimension: u32, depth: u32 },
    /// Cube index has a coordinate `>= 2^level` or the wrong arity.
    InvalidCube { level: u32, index: [u64; 2] },
    /// Two arguments live on different trees.
    ShapeMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    /// A cube lies below the leaf level of the tree it is used with.
    CubeBelowLeaves { level: u32, depth: u32 },
    /// A leaf array had the wrong length.
    BadLeafCount { expected: usize, got: usize },
    /// A density was negative, NaN or infinite.
    InvalidDensity { index: usize, value: f64 },
    /// A leaf-function value was NaN or infinite.
    InvalidValue { index: usize, value: f64 },
    /// Entropy-bump evaluation below the domain `[1, inf)`.
    EpsilonDomain { t: f64 },
    /// Integrability exponent outside `(1, inf)`.
    InvalidExponent { p: f64 },
    /// Bump parameter outside `(0, inf)`.
    InvalidDelta { delta: f64 },
    /// Power-law exponent at or below -1 (non-integrable spike).
    InvalidPowerLawExponent { alpha: f64 },
    /// Power-law center coincides with a leaf midpoint while the exponent
    /// is negative, which would demand an infinite density.
    PowerLawSingularity,
    /// Spike leaf index outside the tree, or nonpositive mass.
    InvalidSpike,
    /// Lognormal variance was negative or not finite.
    InvalidVariance { variance: f64 },
    /// A weight with zero total mass where positive mass is required.
    ZeroWeight,
    /// A cube with zero mass where positive mass is required.
    ZeroMassCube { cube_level: u32 },
    /// A collection failed the sparsity test where a sparse one is required.
    NotSparse { worst_ratio: f64 },
    /// Sparse collection members must sit inside the stated root cube.
    CubeOutsideRoot,
    /// The dense p=2 eigenvalue route only handles moderate problem sizes.
    TooLargeForExact { size: usize, limit: usize },
    /// A scale factor was nonpositive or not finite.
    InvalidScale { factor: f64 },
    /// Search or iteration budget parameter out of range.
    InvalidBudget,
}

impl Error {
    /// True for inputs that are well-formed but unusable (zero mass):
    /// experiments reject them rather than dividing by zero.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::ZeroWeight | Error::ZeroMassCube { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimension { dimension } => {
                write!(f, "dimension must be 1 or 2, got {dimension}")
            }
            Error::InvalidDepth { dimension, depth } => write!(
                f,
                "depth {depth} out of range for dimension {dimension} (1..=16 for d=1, 1..=8 for d=2)"
            ),
            Error::InvalidCube { level, index } => write!(
                f,
                "cube index {index:?} invalid at level {level}"
            ),
            Error::ShapeMismatch { expected, got } => write!(
                f,
                "tree shape mismatch: expected dimension {} depth {}, got dimension {} depth {}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::CubeBelowLeaves { level, depth } => write!(
                f,
                "cube at level {level} is below the leaf level {depth}"
            ),
            Error::BadLeafCount { expected, got } => {
                write!(f, "expected {expected} leaf values, got {got}")
            }
            Error::InvalidDensity { index, value } => write!(
                f,
                "density at leaf {index} must be finite and nonnegative, got {value}"
            ),
            Error::InvalidValue { index, value } => {
                write!(f, "leaf value at {index} must be finite, got {value}")
            }
            Error::EpsilonDomain { t } => {
                write!(f, "entropy bump evaluated at t = {t}, domain is [1, inf)")
            }
            Error::InvalidExponent { p } => {
                write!(f, "exponent p must lie in (1, inf), got {p}")
            }
            Error::InvalidDelta { delta } => {
                write!(f, "delta must be positive and finite, got {delta}")
            }
            Error::InvalidPowerLawExponent { alpha } => {
                write!(f, "power-law exponent must exceed -1, got {alpha}")
            }
            Error::PowerLawSingularity => write!(
                f,
                "power-law center sits on a leaf midpoint with a negative exponent"
            ),
            Error::InvalidSpike => write!(f, "spike leaf out of range or mass not positive"),
            Error::InvalidVariance { variance } => {
                write!(f, "lognormal variance must be finite and nonnegative, got {variance}")
            }
            Error::ZeroWeight => write!(f, "weight has zero total mass"),
            Error::ZeroMassCube { cube_level } => {
                write!(f, "cube at level {cube_level} carries zero mass")
            }
            Error::NotSparse { worst_ratio } => write!(
                f,
                "collection is not sparse: worst strict-subcube cover ratio {worst_ratio}"
            ),
            Error::CubeOutsideRoot => {
                write!(f, "collection member lies outside the designated root cube")
            }
            Error::TooLargeForExact { size, limit } => write!(
                f,
                "dense spectral route limited to {limit} active leaves, instance has {size}"
            ),
            Error::InvalidScale { factor } => {
                write!(f, "scale factor must be positive and finite, got {factor}")
            }
            Error::InvalidBudget => write!(f, "budget or iteration parameter out of range"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
