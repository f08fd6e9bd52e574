//! Canonical seeded instance streams.
//!
//! Regression bounds on the checker ratios are calibrated against fixed
//! suites and frozen; later runs must reproduce the same instances bit for
//! bit. Everything here is pure bookkeeping over seeds: weights stay
//! declarative (lognormal specs) until a checker materializes them.

use crate::rng::{derive_seed, GOLDEN};
use crate::verify::{Experiment, ExperimentKind, WeightSpec};
use alloc::vec::Vec;

pub const CANONICAL_VARIANCE: f64 = 1.0;

const P_CYCLE: [f64; 3] = [1.5, 2.0, 3.0];
const DELTA_CYCLE: [f64; 2] = [0.5, 1.0];

fn stream_tag(kind: ExperimentKind) -> u64 {
    match kind {
        ExperimentKind::MaximalBound => 1,
        ExperimentKind::SeparatedBumpBound => 2,
        ExperimentKind::JointBumpSumBound => 3,
        ExperimentKind::ApAinftyBound => 4,
    }
}

/// Suite sizes for the calibrated regression runs.
pub fn canonical_count(kind: ExperimentKind) -> u64 {
    match kind {
        ExperimentKind::MaximalBound => 500,
        ExperimentKind::SeparatedBumpBound => 200,
        ExperimentKind::JointBumpSumBound => 200,
        ExperimentKind::ApAinftyBound => 500,
    }
}

/// Every tenth instance is planar; the rest sweep d=1 depths 4 through 8.
fn instance_shape(i: u64) -> (u32, u32) {
    if i % 10 == 9 {
        (2, 4)
    } else {
        (1, 4 + (i % 5) as u32)
    }
}

fn lognormal_pair(base: u64, i: u64, dimension: u32, depth: u32) -> (WeightSpec, WeightSpec) {
    (
        WeightSpec::lognormal(dimension, depth, derive_seed(base, 2 * i), CANONICAL_VARIANCE),
        WeightSpec::lognormal(
            dimension,
            depth,
            derive_seed(base, 2 * i + 1),
            CANONICAL_VARIANCE,
        ),
    )
}

/// Instance `i` of the canonical suite for one checker. Sparse collections
/// and root cubes are left at their defaults (stopping tree, unit cube).
pub fn canonical_instance(kind: ExperimentKind, i: u64) -> Experiment {
    let base = derive_seed(GOLDEN, stream_tag(kind));
    let (dimension, depth) = instance_shape(i);
    let (sigma, w) = lognormal_pair(base, i, dimension, depth);
    Experiment {
        kind,
        sigma,
        w,
        p: P_CYCLE[(i % 3) as usize],
        delta: DELTA_CYCLE[(i % 2) as usize],
        sparse: None,
        q0: None,
    }
}

pub fn canonical_suite(kind: ExperimentKind) -> Vec<Experiment> {
    (0..canonical_count(kind))
        .map(|i| canonical_instance(kind, i))
        .collect()
}

/// 200 sparse-operator instances on a stream of their own, used to calibrate
/// the testing-constant sandwich (norm against forward + dual testing).
pub fn sandwich_suite() -> Vec<Experiment> {
    let base = derive_seed(GOLDEN, 5);
    (0..200)
        .map(|i| {
            let (dimension, depth) = instance_shape(i);
            let (sigma, w) = lognormal_pair(base, i, dimension, depth);
            Experiment {
                kind: ExperimentKind::SeparatedBumpBound,
                sigma,
                w,
                p: P_CYCLE[(i % 3) as usize],
                delta: DELTA_CYCLE[(i % 2) as usize],
                sparse: None,
                q0: None,
            }
        })
        .collect()
}

/// 100 line instances at p=2, depths 4 through 6, where the iterative norm
/// estimate can be checked against the dense eigenvalue route.
pub fn norm_agreement_suite() -> Vec<Experiment> {
    let base = derive_seed(GOLDEN, 6);
    (0..100)
        .map(|i| {
            let depth = 4 + (i % 3) as u32;
            let (sigma, w) = lognormal_pair(base, i, 1, depth);
            Experiment {
                kind: ExperimentKind::SeparatedBumpBound,
                sigma,
                w,
                p: 2.0,
                delta: 1.0,
                sparse: None,
                q0: None,
            }
        })
        .collect()
}
