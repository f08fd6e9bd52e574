//! Bump constants: suprema of entropy-weighted average products over cubes.
//!
//! For a weight pair (sigma, w), exponent p in (1, inf) and an envelope eps:
//!
//! * joint constant: `sup_Q rho_{sigma,eps}(Q) <sigma>_Q^(p-1) <w>_Q`;
//! * separated-product constant:
//!   `sup_Q <sigma>_Q^(p-1) rho_{sigma,eps}(Q) <w>_Q rho_{w,eps}(Q)^(p-1)`;
//! * restricted variants over a sparse collection: the plain two-weight
//!   characteristic `sup_{Q in S} <sigma>_Q^(p-1) <w>_Q` and the entropy
//!   characteristic `sup_{Q in S} rho_sigma(Q)`.
//!
//! The supremum is an exhaustive scan over every dyadic cube of levels
//! `0..=depth` (or over the collection). Reports carry the attaining cube;
//! ties go to the first cube in witness order (level, then index).

use crate::cube::{cubes_up_to, DyadicCube};
use crate::epsilon::{check_exponent, EpsilonFn};
use crate::maximal::{bumped_entropy, entropy};
use crate::sparse::SparseCollection;
use crate::weight::DyadicWeight;
use crate::Result;
use alloc::vec::Vec;

/// A cube together with the value a functional takes on it.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CubeValue {
    pub cube: DyadicCube,
    pub value: f64,
}

/// Result of a supremum scan: the value, the first cube attaining it, and
/// optionally the full per-cube table.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BumpReport {
    pub value: f64,
    pub witness: Option<DyadicCube>,
    #[cfg_attr(feature = "serde", serde(skip_serializing_if = "Option::is_none"))]
    pub table: Option<Vec<CubeValue>>,
}

fn check_pair(sigma: &DyadicWeight, w: &DyadicWeight) -> Result<()> {
    if sigma.dimension() != w.dimension() || sigma.depth() != w.depth() {
        return Err(crate::Error::ShapeMismatch {
            expected: (sigma.dimension(), sigma.depth()),
            got: (w.dimension(), w.depth()),
        });
    }
    Ok(())
}

fn scan<F>(cubes: &[DyadicCube], mut contribution: F, with_table: bool) -> Result<BumpReport>
where
    F: FnMut(&DyadicCube) -> Result<f64>,
{
    let mut best: Option<CubeValue> = None;
    let mut table = if with_table {
        Some(Vec::with_capacity(cubes.len()))
    } else {
        None
    };
    for cube in cubes {
        let v = contribution(cube)?;
        if best.as_ref().is_none_or(|b| v > b.value) {
            best = Some(CubeValue {
                cube: *cube,
                value: v,
            });
        }
        if let Some(t) = table.as_mut() {
            t.push(CubeValue {
                cube: *cube,
                value: v,
            });
        }
    }
    Ok(match best {
        Some(b) => BumpReport {
            value: b.value,
            witness: Some(b.cube),
            table,
        },
        None => BumpReport {
            value: 0.0,
            witness: None,
            table,
        },
    })
}

fn joint_contribution(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
    cube: &DyadicCube,
) -> Result<f64> {
    let sa = sigma.average(cube)?;
    let wa = w.average(cube)?;
    if sa == 0.0 || wa == 0.0 {
        return Ok(0.0);
    }
    Ok(bumped_entropy(sigma, cube, eps)? * libm::pow(sa, p - 1.0) * wa)
}

fn product_contribution(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
    cube: &DyadicCube,
) -> Result<f64> {
    let sa = sigma.average(cube)?;
    let wa = w.average(cube)?;
    if sa == 0.0 || wa == 0.0 {
        return Ok(0.0);
    }
    let s_part = libm::pow(sa, p - 1.0) * bumped_entropy(sigma, cube, eps)?;
    let w_part = wa * libm::pow(bumped_entropy(w, cube, eps)?, p - 1.0);
    Ok(s_part * w_part)
}

/// Joint bump constant over all cubes. Homogeneity:
/// `joint(lambda sigma, mu w) = lambda^(p-1) mu joint(sigma, w)`.
pub fn joint_bump(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
) -> Result<BumpReport> {
    joint_bump_impl(sigma, w, p, eps, false)
}

/// As [`joint_bump`] but also records the per-cube contribution table.
pub fn joint_bump_with_table(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
) -> Result<BumpReport> {
    joint_bump_impl(sigma, w, p, eps, true)
}

fn joint_bump_impl(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
    with_table: bool,
) -> Result<BumpReport> {
    check_pair(sigma, w)?;
    check_exponent(p)?;
    eps.validate()?;
    let cubes = cubes_up_to(sigma.dimension(), sigma.depth())?;
    scan(
        &cubes,
        |q| joint_contribution(sigma, w, p, eps, q),
        with_table,
    )
}

/// Separated-product bump constant over all cubes; same homogeneity as the
/// joint one.
pub fn product_bump(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
) -> Result<BumpReport> {
    product_bump_impl(sigma, w, p, eps, false)
}

pub fn product_bump_with_table(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
) -> Result<BumpReport> {
    product_bump_impl(sigma, w, p, eps, true)
}

fn product_bump_impl(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    eps: &EpsilonFn,
    with_table: bool,
) -> Result<BumpReport> {
    check_pair(sigma, w)?;
    check_exponent(p)?;
    eps.validate()?;
    let cubes = cubes_up_to(sigma.dimension(), sigma.depth())?;
    scan(
        &cubes,
        |q| product_contribution(sigma, w, p, eps, q),
        with_table,
    )
}

/// Two-weight characteristic restricted to a sparse collection:
/// `sup_{Q in S} <sigma>_Q^(p-1) <w>_Q`. Empty collections report 0 with no
/// witness.
pub fn sparse_ap(
    sigma: &DyadicWeight,
    w: &DyadicWeight,
    p: f64,
    collection: &SparseCollection,
) -> Result<BumpReport> {
    check_pair(sigma, w)?;
    check_exponent(p)?;
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    scan(
        collection.cubes(),
        |q| {
            let sa = sigma.average(q)?;
            if sa == 0.0 {
                return Ok(0.0);
            }
            Ok(libm::pow(sa, p - 1.0) * w.average(q)?)
        },
        false,
    )
}

/// Entropy characteristic of a collection: `sup_{Q in S} rho_sigma(Q)`.
pub fn sparse_ainfty(sigma: &DyadicWeight, collection: &SparseCollection) -> Result<BumpReport> {
    collection.check_tree(sigma.dimension(), sigma.depth())?;
    scan(collection.cubes(), |q| entropy(sigma, q), false)
}
